"""Program model: guard relations, thread-local operations, static validation.

Programs run over the naturals.  Guards compare two registers with one of
`=`, `!=`, `<n` (left + n < right) or `<=n` (left + n <= right); the plain
`<` and `<=` are the n = 0 cases.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Union


class RelKind(enum.Enum):
    EQ = "="
    NEQ = "!="
    LT = "<"
    LE = "<="


@dataclass(frozen=True)
class Relation:
    kind: RelKind
    n: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("relation offset must be a natural number")
        if self.kind in (RelKind.EQ, RelKind.NEQ) and self.n != 0:
            raise ValueError(f"'{self.kind.value}' does not take an offset")

    def render(self) -> str:
        if self.kind in (RelKind.EQ, RelKind.NEQ):
            return self.kind.value
        return self.kind.value + (str(self.n) if self.n else "")


EQ = Relation(RelKind.EQ)
NEQ = Relation(RelKind.NEQ)
LT = Relation(RelKind.LT, 0)
LE = Relation(RelKind.LE, 0)


def lt(n: int) -> Relation:
    return Relation(RelKind.LT, n)


def le(n: int) -> Relation:
    return Relation(RelKind.LE, n)


def eval_rel(rel: Relation, d1: int, d2: int) -> bool:
    """Evaluate a guard relation on two naturals."""
    if rel.kind is RelKind.EQ:
        return d1 == d2
    if rel.kind is RelKind.NEQ:
        return d1 != d2
    if rel.kind is RelKind.LT:
        return d1 + rel.n < d2
    return d1 + rel.n <= d2


@dataclass(frozen=True)
class Assign:
    """dst := src (both registers of the same thread)."""
    dst: str
    src: str

    def render(self) -> str:
        return f"{self.dst} := {self.src}"


@dataclass(frozen=True)
class NewValue:
    """dst := * -- load an arbitrary natural."""
    dst: str

    def render(self) -> str:
        return f"{self.dst} := *"


@dataclass(frozen=True)
class Guard:
    rel: Relation
    left: str
    right: str

    def render(self) -> str:
        return f"assume {self.left} {self.rel.render()} {self.right}"


@dataclass(frozen=True)
class Read:
    """Read shared variable var into register dst."""
    var: str
    dst: str

    def render(self) -> str:
        return f"read {self.var} {self.dst}"


@dataclass(frozen=True)
class Write:
    """Append (var, value of src) to the thread's store buffer."""
    var: str
    src: str

    def render(self) -> str:
        return f"write {self.var} {self.src}"


@dataclass(frozen=True)
class Arw:
    """Atomic read-write: requires an empty buffer and memory value = expect,
    then sets var := update. expect/update are registers."""
    var: str
    expect: str
    update: str

    def render(self) -> str:
        return f"arw {self.var} {self.expect} {self.update}"


Op = Union[Assign, NewValue, Guard, Read, Write, Arw]


@dataclass(frozen=True)
class Transition:
    src: str
    op: Op
    dst: str


@dataclass(frozen=True)
class Thread:
    id: str
    states: tuple[str, ...]
    regs: tuple[str, ...]
    init: str
    transitions: tuple[Transition, ...]


@dataclass(frozen=True)
class Program:
    threads: tuple[Thread, ...]
    shared_vars: tuple[str, ...]
    n_max: int = 0

    @staticmethod
    def make(threads, shared_vars) -> "Program":
        """Build a program, computing n_max from the guard offsets used."""
        threads = tuple(threads)
        n_max = 0
        for t in threads:
            for tr in t.transitions:
                if isinstance(tr.op, Guard):
                    n_max = max(n_max, tr.op.rel.n)
        return Program(threads, tuple(shared_vars), n_max)


@dataclass(frozen=True)
class Target:
    thread: str
    state: str


def _op_regs(op: Op) -> tuple[str, ...]:
    if isinstance(op, Assign):
        return (op.dst, op.src)
    if isinstance(op, NewValue):
        return (op.dst,)
    if isinstance(op, Guard):
        return (op.left, op.right)
    if isinstance(op, Read):
        return (op.dst,)
    if isinstance(op, Write):
        return (op.src,)
    return (op.expect, op.update)


def _op_var(op: Op) -> str | None:
    if isinstance(op, (Read, Write, Arw)):
        return op.var
    return None


def validate(program: Program) -> list[str]:
    """Static checks. Returns a list of diagnostics; empty means valid."""
    diags: list[str] = []
    seen_tids: set[str] = set()
    for t in program.threads:
        if t.id in seen_tids:
            diags.append(f"duplicate thread id '{t.id}'")
        seen_tids.add(t.id)

    if len(set(program.shared_vars)) != len(program.shared_vars):
        diags.append("duplicate shared variable declaration")

    reg_owner: dict[str, str] = {}
    for t in program.threads:
        states = set(t.states)
        if len(states) != len(t.states):
            diags.append(f"thread '{t.id}': duplicate state")
        if len(set(t.regs)) != len(t.regs):
            diags.append(f"thread '{t.id}': duplicate register")
        if t.init not in states:
            diags.append(f"thread '{t.id}': init state '{t.init}' undeclared")
        for r in t.regs:
            if r in reg_owner:
                diags.append(
                    f"register '{r}' shared by threads "
                    f"'{reg_owner[r]}' and '{t.id}': register sets must be disjoint")
            else:
                reg_owner[r] = t.id
        regs = set(t.regs)
        for tr in t.transitions:
            if tr.src not in states or tr.dst not in states:
                diags.append(
                    f"thread '{t.id}': transition {tr.src}->{tr.dst} uses undeclared state")
            for r in _op_regs(tr.op):
                if r not in regs:
                    diags.append(
                        f"thread '{t.id}': operation '{tr.op.render()}' uses "
                        f"register '{r}' not owned by the thread")
            v = _op_var(tr.op)
            if v is not None and v not in program.shared_vars:
                diags.append(
                    f"thread '{t.id}': operation '{tr.op.render()}' uses "
                    f"undeclared shared variable '{v}'")

    n_max = 0
    for t in program.threads:
        for tr in t.transitions:
            if isinstance(tr.op, Guard):
                n_max = max(n_max, tr.op.rel.n)
    if program.n_max != n_max:
        diags.append(f"n_max is {program.n_max} but the largest guard offset is {n_max}")
    return diags


class InvalidProgramError(ValueError):
    def __init__(self, diags: list[str]):
        super().__init__("; ".join(diags))
        self.diagnostics = diags


class ProgramIndex:
    """Dense integer interning of thread / state / register / variable names.

    Built once per validated program; every engine works on these indices and
    only converts back to names at API boundaries.
    """

    def __init__(self, program: Program):
        diags = validate(program)
        if diags:
            raise InvalidProgramError(diags)
        self.program = program
        self.thread_ids = tuple(t.id for t in program.threads)
        self.tid = {t.id: i for i, t in enumerate(program.threads)}
        self.vars = program.shared_vars
        self.vid = {x: i for i, x in enumerate(program.shared_vars)}
        self.state_id: list[dict[str, int]] = []
        self.state_names: list[tuple[str, ...]] = []
        self.init_states: list[int] = []
        regs: list[str] = []
        self.reg_thread: list[int] = []
        self.rid: dict[str, int] = {}
        for ti, t in enumerate(program.threads):
            sid = {s: i for i, s in enumerate(t.states)}
            self.state_id.append(sid)
            self.state_names.append(t.states)
            self.init_states.append(sid[t.init])
            for r in t.regs:
                self.rid[r] = len(regs)
                regs.append(r)
                self.reg_thread.append(ti)
        self.regs = tuple(regs)
        # outgoing transitions per (thread, state), in declaration order
        self.out: list[list[list[tuple[int, Transition]]]] = []
        self.thread_transitions: list[tuple[Transition, ...]] = []
        for ti, t in enumerate(program.threads):
            by_state: list[list[tuple[int, Transition]]] = [[] for _ in t.states]
            for pos, tr in enumerate(t.transitions):
                by_state[self.state_id[ti][tr.src]].append((pos, tr))
            self.out.append(by_state)
            self.thread_transitions.append(t.transitions)

    def target_idx(self, target: Target) -> tuple[int, int]:
        if target.thread not in self.tid:
            raise KeyError(f"unknown thread '{target.thread}'")
        ti = self.tid[target.thread]
        if target.state not in self.state_id[ti]:
            raise KeyError(f"unknown state '{target.state}' in thread '{target.thread}'")
        return ti, self.state_id[ti][target.state]


@lru_cache(maxsize=None)
def program_index(program: Program) -> ProgramIndex:
    return ProgramIndex(program)
