"""Store-buffer summarization for context-bounded runs.

The machine replaces per-thread FIFO buffers with finitely many summary
variables, exploiting that in a k-context run every buffered write either
commits to memory at the end of some context where its thread is active, or
never commits at all:

  shared(x)        current memory value of x
  reg(r)           register r
  ctxvar(x, j)     value of the last write on x committing at the end of
                   context j ("flush context j")
  thrvar(x, t)     value of t's newest buffered write on x
  sentinel         pinned 0; every other value is >= it

Control state: per-thread program states, the context-to-thread assignment
`act` (guessed up front), the current context j, the map c(x, t) giving the
flush context of t's newest write on x (0 = none pending, k+1 = the write
never commits), and per-context sets u(j) of variables with a write
committing at the end of j.

Transitions emit effect descriptors instead of touching values directly:

  copy   dst := src
  fresh  dst := caller-chosen natural
  guard  relation test between two summary variables
  multi  simultaneous batch of copies (the context-switch flush)

so the same rules drive both concrete replay (values supplied) and the order
abstraction (effects interpreted over rank states).

A write must pick its flush context j' at issue time: j <= j' <= k with the
writer active in j', and j' at least every flush context already pending for
the thread, so commits respect FIFO order.  Choosing j' = k+1 leaves the
write in the buffer forever; FIFO then forces every later write of the
thread to do the same.  Without the k+1 option the machine would miss runs
that commit only a prefix of a buffer, e.g. a thread publishing one variable
while a second, later write stays buffered past the end of its last context.

Bookkeeping that can no longer influence the future is canonicalized away
when a context ends: c entries <= the finished context drop to 0 and its u
set is cleared.  States merged this way have identical outgoing behavior.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Mapping, Optional, Sequence, Union

from .model import (
    EQ, Arw, Assign, Guard, NewValue, Program, Read, Relation, Target,
    Transition, Write, eval_rel, program_index,
)
from .verdict import (
    BOUND_EXHAUSTED, REACHABLE, UNREACHABLE, Stats, Verdict,
)

VK_SENTINEL = "sentinel"
VK_SHARED = "shared"
VK_REG = "reg"
VK_CTX = "ctxvar"
VK_THR = "thrvar"


@dataclass(frozen=True)
class AbVar:
    kind: str
    name: Optional[str] = None
    thread: Optional[str] = None
    ctx: Optional[int] = None

    def render(self) -> str:
        if self.kind == VK_SENTINEL:
            return "$zero"
        if self.kind in (VK_SHARED, VK_REG):
            return self.name
        if self.kind == VK_CTX:
            return f"{self.name}@c{self.ctx}"
        return f"{self.name}@{self.thread}"


SENTINEL = AbVar(VK_SENTINEL)


def shared_var(x: str) -> AbVar:
    return AbVar(VK_SHARED, name=x)


def reg_var(r: str) -> AbVar:
    return AbVar(VK_REG, name=r)


def ctx_var(x: str, j: int) -> AbVar:
    return AbVar(VK_CTX, name=x, ctx=j)


def thr_var(x: str, t: str) -> AbVar:
    return AbVar(VK_THR, name=x, thread=t)


@dataclass(frozen=True)
class CopyVar:
    dst: AbVar
    src: AbVar

    def render(self) -> str:
        return f"{self.dst.render()} := {self.src.render()}"


@dataclass(frozen=True)
class FreshVar:
    dst: AbVar

    def render(self) -> str:
        return f"{self.dst.render()} := *"


@dataclass(frozen=True)
class GuardRel:
    rel: Relation
    left: AbVar
    right: AbVar

    def render(self) -> str:
        return f"assume {self.left.render()} {self.rel.render()} {self.right.render()}"


@dataclass(frozen=True)
class MultiCopy:
    pairs: tuple[tuple[AbVar, AbVar], ...]

    def render(self) -> str:
        inner = ", ".join(f"{d.render()} := {s.render()}" for d, s in self.pairs)
        return "{" + inner + "}"


AbEffect = Union[CopyVar, FreshVar, GuardRel, MultiCopy]

_RULES = ("local", "buffer_read", "memory_read", "write", "switch",
          "buffer_arw", "memory_arw")
R_LOCAL, R_BUF_READ, R_MEM_READ, R_WRITE, R_SWITCH, R_BUF_ARW, R_MEM_ARW = range(7)


@dataclass(frozen=True)
class AbLabel:
    rule: str
    thread: Optional[str] = None
    delta: Optional[Transition] = None
    flush_ctx: Optional[int] = None   # for writes; k+1 means "never commits"
    to_ctx: Optional[int] = None      # for context switches
    act: Optional[tuple[str, ...]] = None  # for the initial guess

    def render(self) -> str:
        if self.rule == "init":
            return "init act=(" + ",".join(self.act or ()) + ")"
        if self.rule == "switch":
            return f"{self.thread}: switch to context {self.to_ctx}"
        d = self.delta
        s = f"{self.thread}: {d.src} -> {d.dst} : {d.op.render()} [{self.rule}]"
        if self.flush_ctx is not None:
            s += f" [flush@{self.flush_ctx}]"
        return s


class GuardFailedError(ValueError):
    pass


class AbNotEnabledError(ValueError):
    pass


class AbMachine:
    """Compiled form of the summarized machine for one (program, k)."""

    def __init__(self, program: Program, k: int):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.program = program
        self.k = k
        self.idx = idx = program_index(program)
        self.nt = nt = len(idx.thread_ids)
        self.nx = nx = len(idx.vars)
        self.nr = nr = len(idx.regs)
        self.never = k + 1

        self.table: list[AbVar] = [SENTINEL]
        for x in idx.vars:
            self.table.append(shared_var(x))
        for r in idx.regs:
            self.table.append(reg_var(r))
        for x in idx.vars:
            for j in range(1, k + 1):
                self.table.append(ctx_var(x, j))
        for x in idx.vars:
            for t in idx.thread_ids:
                self.table.append(thr_var(x, t))
        self.nab = len(self.table)
        self.var_index = {v: i for i, v in enumerate(self.table)}

        # flat control-state layout
        self.ST = 0
        self.ACT = nt
        self.J = nt + k
        self.C = nt + k + 1
        self.U = self.C + nx * nt
        self.flat_len = self.U + k * nx

        if self.nab > 255 or self.flat_len > 4096 or k + 1 > 255:
            raise ValueError("model above the desk-scale encoding limits")
        for names in idx.state_names:
            if len(names) > 255:
                raise ValueError("thread above the desk-scale limit of 255 states")

        # Backward register liveness per thread.  A register that cannot be
        # read again before being overwritten is reset to the sentinel after
        # each step, so runs differing only in stale register values fall
        # together.  dead_regs[ti][pos] lists the summary indices to reset
        # after taking transition pos of thread ti.
        self._dead_regs: list[list[tuple[int, ...]]] = []
        for ti, t in enumerate(program.threads):
            sid = idx.state_id[ti]
            edges = []
            for tr in t.transitions:
                op = tr.op
                if isinstance(op, Assign):
                    g, kl = {op.src}, {op.dst}
                elif isinstance(op, NewValue):
                    g, kl = set(), {op.dst}
                elif isinstance(op, Guard):
                    g, kl = {op.left, op.right}, set()
                elif isinstance(op, Read):
                    g, kl = set(), {op.dst}
                elif isinstance(op, Write):
                    g, kl = {op.src}, set()
                else:
                    g, kl = {op.expect, op.update}, set()
                edges.append((sid[tr.src], sid[tr.dst], g, kl))
            live: list[set[str]] = [set() for _ in t.states]
            changed = True
            while changed:
                changed = False
                for si, di, g, kl in edges:
                    new = g | (live[di] - kl)
                    if not new <= live[si]:
                        live[si] |= new
                        changed = True
            dead = []
            for pos in range(len(t.transitions)):
                si, di, g, kl = edges[pos]
                gone = (live[si] | kl) - live[di]
                dead.append(tuple(sorted(self.i_reg(idx.rid[r]) for r in gone)))
            self._dead_regs.append(dead)

    # summary-variable indices
    def i_shared(self, x: int) -> int:
        return 1 + x

    def i_reg(self, r: int) -> int:
        return 1 + self.nx + r

    def i_ctx(self, x: int, j: int) -> int:
        return 1 + self.nx + self.nr + x * self.k + (j - 1)

    def i_thr(self, x: int, t: int) -> int:
        return 1 + self.nx + self.nr + self.nx * self.k + x * self.nt + t

    def initial_flat(self, act: tuple[int, ...]) -> tuple[int, ...]:
        if len(act) != self.k or any(t < 0 or t >= self.nt for t in act):
            raise ValueError("act must map each of the k contexts to a thread")
        return (tuple(self.idx.init_states) + tuple(act) + (1,)
                + (0,) * (self.nx * self.nt) + (0,) * (self.k * self.nx))

    def all_initial_flats(self) -> list[tuple[int, ...]]:
        return [self.initial_flat(act) for act in product(range(self.nt), repeat=self.k)]

    def _c_max(self, s: tuple[int, ...], ti: int) -> int:
        base = self.C + ti
        nt = self.nt
        m = 0
        for x in range(self.nx):
            v = s[base + x * nt]
            if v > m:
                m = v
        return m

    def transitions_flat(self, s: tuple[int, ...]):
        """All successors: [(label_core, effects, s')].

        label_core = (rule_code, thread, transition position, flush/to ctx).
        The enumeration order is fixed: the active thread's transitions in
        declaration order (write alternatives by ascending flush context,
        never-commits last), then the context switch.
        """
        k = self.k
        nt = self.nt
        j = s[self.J]
        ti = s[self.ACT + j - 1]
        out = []
        idx = self.idx
        state = s[self.ST + ti]
        for pos, tr in idx.out[ti][state]:
            op = tr.op
            dst_state = idx.state_id[ti][tr.dst]
            dz = tuple(("copy", d, 0) for d in self._dead_regs[ti][pos])
            if isinstance(op, Assign):
                eff = (("copy", self.i_reg(idx.rid[op.dst]), self.i_reg(idx.rid[op.src])),) + dz
                out.append(((R_LOCAL, ti, pos, -1), eff, self._with_state(s, ti, dst_state)))
            elif isinstance(op, NewValue):
                eff = (("fresh", self.i_reg(idx.rid[op.dst])),) + dz
                out.append(((R_LOCAL, ti, pos, -1), eff, self._with_state(s, ti, dst_state)))
            elif isinstance(op, Guard):
                eff = (("guard", op.rel, self.i_reg(idx.rid[op.left]),
                        self.i_reg(idx.rid[op.right])),) + dz
                out.append(((R_LOCAL, ti, pos, -1), eff, self._with_state(s, ti, dst_state)))
            elif isinstance(op, Read):
                x = idx.vid[op.var]
                rd = self.i_reg(idx.rid[op.dst])
                c_xt = s[self.C + x * nt + ti]
                if c_xt >= j:
                    # newest write on x still buffered: read the thread summary
                    eff = (("copy", rd, self.i_thr(x, ti)),) + dz
                    out.append(((R_BUF_READ, ti, pos, -1), eff,
                                self._with_state(s, ti, dst_state)))
                else:
                    eff = (("copy", rd, self.i_shared(x)),) + dz
                    out.append(((R_MEM_READ, ti, pos, -1), eff,
                                self._with_state(s, ti, dst_state)))
            elif isinstance(op, Write):
                x = idx.vid[op.var]
                rs = self.i_reg(idx.rid[op.src])
                lo = max(j, self._c_max(s, ti))
                for jp in range(lo, k + 1):
                    if s[self.ACT + jp - 1] != ti:
                        continue
                    eff = (("copy", self.i_thr(x, ti), rs),
                           ("copy", self.i_ctx(x, jp), rs)) + dz
                    s2 = list(s)
                    s2[self.ST + ti] = dst_state
                    s2[self.C + x * nt + ti] = jp
                    s2[self.U + (jp - 1) * self.nx + x] = 1
                    out.append(((R_WRITE, ti, pos, jp), eff, tuple(s2)))
                # the write may stay buffered past the end of the run
                eff = (("copy", self.i_thr(x, ti), rs),) + dz
                s2 = list(s)
                s2[self.ST + ti] = dst_state
                s2[self.C + x * nt + ti] = self.never
                out.append(((R_WRITE, ti, pos, self.never), eff, tuple(s2)))
            else:  # Arw
                x = idx.vid[op.var]
                re = self.i_reg(idx.rid[op.expect])
                ru = self.i_reg(idx.rid[op.update])
                if j >= self._c_max(s, ti):
                    c_xt = s[self.C + x * nt + ti]
                    if c_xt == j:
                        # newest write on x commits this context: operate on it
                        eff = (("guard", EQ, re, self.i_thr(x, ti)),
                               ("copy", self.i_thr(x, ti), ru),
                               ("copy", self.i_ctx(x, j), ru)) + dz
                        out.append(((R_BUF_ARW, ti, pos, -1), eff,
                                    self._with_state(s, ti, dst_state)))
                    else:  # c_xt < j: nothing pending on x
                        eff = (("guard", EQ, re, self.i_shared(x)),
                               ("copy", self.i_shared(x), ru)) + dz
                        out.append(((R_MEM_ARW, ti, pos, -1), eff,
                                    self._with_state(s, ti, dst_state)))
        if j < k:
            out.append(self._switch(s, ti, j))
        return out

    def _with_state(self, s: tuple[int, ...], ti: int, dst_state: int) -> tuple[int, ...]:
        s2 = list(s)
        s2[self.ST + ti] = dst_state
        return tuple(s2)

    def _switch(self, s: tuple[int, ...], ti: int, j: int):
        nx = self.nx
        pairs = tuple(
            (self.i_shared(x), self.i_ctx(x, j))
            for x in range(nx)
            if s[self.U + (j - 1) * nx + x]
        )
        eff = [("multi", pairs)]
        # the flushed summaries are unreadable from here on (nothing consults
        # a context summary after its flush, or a thread summary once its
        # newest write has committed), so reset them to the sentinel; states
        # that differ only in such leftovers then coincide
        for x in range(nx):
            if s[self.U + (j - 1) * nx + x]:
                eff.append(("copy", self.i_ctx(x, j), 0))
        for x in range(nx):
            if s[self.C + x * self.nt + ti] == j:
                eff.append(("copy", self.i_thr(x, ti), 0))
        s2 = list(s)
        s2[self.J] = j + 1
        # nothing reads the schedule entry of a finished context again, so
        # overwrite it with the out-of-range marker; runs from different
        # schedules that converge on the same tail then share states
        s2[self.ACT + j - 1] = self.nt
        for x in range(nx):
            s2[self.U + (j - 1) * nx + x] = 0
        for i in range(self.C, self.C + nx * self.nt):
            if 0 < s2[i] <= j:
                s2[i] = 0
        return ((R_SWITCH, ti, -1, j + 1), tuple(eff), tuple(s2))

    def apply_flat(self, s: tuple[int, ...], label_core):
        """Re-derive (effects, s') for a label; raises if not enabled."""
        for cand, eff, s2 in self.transitions_flat(s):
            if cand == label_core:
                return eff, s2
        raise AbNotEnabledError(f"label {label_core} is not enabled")

    def apply_effects(self, m: tuple[int, ...], effects,
                      fresh_value: Optional[int] = None) -> tuple[int, ...]:
        vals = list(m)
        for eff in effects:
            tag = eff[0]
            if tag == "copy":
                vals[eff[1]] = vals[eff[2]]
            elif tag == "guard":
                if not eval_rel(eff[1], vals[eff[2]], vals[eff[3]]):
                    raise GuardFailedError(f"guard {eff[1].render()} failed")
            elif tag == "fresh":
                if fresh_value is None or fresh_value < 0:
                    raise ValueError("a natural fresh value is required")
                vals[eff[1]] = fresh_value
            else:  # multi: simultaneous
                olds = [vals[src] for _, src in eff[1]]
                for (dst, _), v in zip(eff[1], olds):
                    vals[dst] = v
        return tuple(vals)

    # --- conversions to the public surface ---------------------------------

    def label_public(self, label_core) -> AbLabel:
        rule, ti, pos, jx = label_core
        tname = self.idx.thread_ids[ti]
        if rule == R_SWITCH:
            return AbLabel("switch", thread=tname, to_ctx=jx)
        tr = self.idx.thread_transitions[ti][pos]
        return AbLabel(_RULES[rule], thread=tname, delta=tr,
                       flush_ctx=jx if rule == R_WRITE else None)

    def label_core_of(self, label: AbLabel):
        ti = self.idx.tid[label.thread]
        if label.rule == "switch":
            return (R_SWITCH, ti, -1, label.to_ctx)
        pos = self.idx.thread_transitions[ti].index(label.delta)
        rule = _RULES.index(label.rule)
        return (rule, ti, pos, label.flush_ctx if rule == R_WRITE else -1)

    def effects_public(self, effects) -> tuple[AbEffect, ...]:
        t = self.table
        out = []
        for eff in effects:
            if eff[0] == "copy":
                out.append(CopyVar(t[eff[1]], t[eff[2]]))
            elif eff[0] == "fresh":
                out.append(FreshVar(t[eff[1]]))
            elif eff[0] == "guard":
                out.append(GuardRel(eff[1], t[eff[2]], t[eff[3]]))
            else:
                out.append(MultiCopy(tuple((t[d], t[s]) for d, s in eff[1])))
        return tuple(out)

    def effects_core_of(self, effects: tuple[AbEffect, ...]):
        vi = self.var_index
        out = []
        for e in effects:
            if isinstance(e, CopyVar):
                out.append(("copy", vi[e.dst], vi[e.src]))
            elif isinstance(e, FreshVar):
                out.append(("fresh", vi[e.dst]))
            elif isinstance(e, GuardRel):
                out.append(("guard", e.rel, vi[e.left], vi[e.right]))
            else:
                out.append(("multi", tuple((vi[d], vi[s]) for d, s in e.pairs)))
        return tuple(out)

    def values_public(self, m: tuple[int, ...]) -> dict[AbVar, int]:
        return {v: m[i] for i, v in enumerate(self.table)}

    def values_flat(self, m: Mapping[AbVar, int] | Sequence[int]) -> tuple[int, ...]:
        if isinstance(m, Mapping):
            return tuple(m[v] for v in self.table)
        if len(m) != self.nab:
            raise ValueError("value vector has the wrong length")
        return tuple(m)


@dataclass(frozen=True)
class ABState:
    """Public view of a summarized control state."""
    machine: AbMachine = field(compare=False, repr=False, hash=False)
    flat: tuple[int, ...] = ()

    def __hash__(self) -> int:
        return hash(self.flat)

    @property
    def j(self) -> int:
        return self.flat[self.machine.J]

    @property
    def act(self) -> tuple[str, ...]:
        """Schedule tail; entries of finished contexts read as '-'."""
        m = self.machine
        return tuple("-" if t == m.nt else m.idx.thread_ids[t]
                     for t in self.flat[m.ACT:m.ACT + m.k])

    def state_of(self, thread: str) -> str:
        m = self.machine
        ti = m.idx.tid[thread]
        return m.idx.state_names[ti][self.flat[m.ST + ti]]

    def c_of(self, var: str, thread: str) -> int:
        m = self.machine
        return self.flat[m.C + m.idx.vid[var] * m.nt + m.idx.tid[thread]]

    def u_of(self, j: int) -> frozenset[str]:
        m = self.machine
        return frozenset(
            m.idx.vars[x] for x in range(m.nx)
            if self.flat[m.U + (j - 1) * m.nx + x]
        )

    @property
    def active_thread(self) -> str:
        return self.act[self.j - 1]


@lru_cache(maxsize=None)
def ab_machine(program: Program, k: int) -> AbMachine:
    return AbMachine(program, k)


def ab_initial(program: Program, k: int, act: tuple[str, ...]) -> ABState:
    m = ab_machine(program, k)
    act_idx = tuple(m.idx.tid[t] for t in act)
    return ABState(m, m.initial_flat(act_idx))


def ab_initial_states(program: Program, k: int) -> list[ABState]:
    m = ab_machine(program, k)
    return [ABState(m, f) for f in m.all_initial_flats()]


def ab_transitions(program: Program, k: int, s: ABState):
    m = ab_machine(program, k)
    return [
        (m.label_public(core), m.effects_public(eff), ABState(m, s2))
        for core, eff, s2 in m.transitions_flat(s.flat)
    ]


def ab_concrete_step(program: Program, k: int, s: ABState,
                     values: Mapping[AbVar, int] | Sequence[int],
                     label: AbLabel, fresh_value: Optional[int] = None):
    """Take one step with concrete natural values attached to every summary
    variable.  Raises GuardFailedError if a guard effect fails and
    AbNotEnabledError if the label does not apply at s."""
    m = ab_machine(program, k)
    eff, s2 = m.apply_flat(s.flat, m.label_core_of(label))
    m2 = m.apply_effects(m.values_flat(values), eff, fresh_value)
    return ABState(m, s2), m.values_public(m2)


def ab_reach_concrete(program: Program, target: Target, k: int,
                      value_pool: Sequence[int], depth: int = 10_000,
                      max_states: int = 200_000) -> Verdict:
    """Explicit search of the summarized machine with concrete values drawn
    from a finite pool.  Exact up to the pool, depth and state caps; meant
    for small differential checks against the bounded TSO search."""
    m = ab_machine(program, k)
    tti, tsi = m.idx.target_idx(target)
    stats = Stats()
    pool = sorted(set(value_pool))

    from collections import deque
    import time
    start = time.perf_counter()

    seen: set[tuple] = set()
    parents: dict[tuple, tuple] = {}
    frontier = deque()
    m0 = (0,) * m.nab

    def finish(found, status, node=None):
        stats.wall_ms = (time.perf_counter() - start) * 1000.0
        witness = None
        if found:
            steps = []
            cur = node
            while parents[cur] is not None:
                prev, core, fresh = parents[cur]
                steps.append((m.label_public(core), fresh))
                cur = prev
            steps.reverse()
            witness = steps
        return Verdict(found, status, witness, stats)

    for flat in m.all_initial_flats():
        node = (flat, m0)
        if node not in seen:
            seen.add(node)
            parents[node] = None
            frontier.append(node)
            if flat[m.ST + tti] == tsi:
                return finish(True, REACHABLE, node)

    level = 0
    while frontier and level < depth:
        level += 1
        nxt = deque()
        while frontier:
            node = frontier.popleft()
            s, vals = node
            stats.states_explored += 1
            for core, eff, s2 in m.transitions_flat(s):
                has_fresh = any(e[0] == "fresh" for e in eff)
                choices = pool if has_fresh else (None,)
                for v in choices:
                    try:
                        vals2 = m.apply_effects(vals, eff, v)
                    except GuardFailedError:
                        continue
                    node2 = (s2, vals2)
                    if node2 in seen:
                        continue
                    seen.add(node2)
                    parents[node2] = (node, core, v)
                    if s2[m.ST + tti] == tsi:
                        return finish(True, REACHABLE, node2)
                    if len(seen) > max_states:
                        return finish(False, BOUND_EXHAUSTED)
                    nxt.append(node2)
        frontier = nxt
        stats.peak_frontier = max(stats.peak_frontier, len(frontier))
    if frontier:
        return finish(False, BOUND_EXHAUSTED)
    return finish(False, UNREACHABLE)
