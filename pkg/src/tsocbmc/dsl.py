"""Text formats for programs, DFAs and lossy channel models.

Program format::

    domain nat
    vars x y                    # shared variables

    thread t1 {
      regs r0 r1
      states q0 q1              # optional; derived from transitions if absent
      init q0
      q0 -> q1 : write x r0
      q1 -> q1 : assume r0 <2 r1
    }

    target t1 : q1              # optional

Operations: `r := r'`, `r := *`, `assume r REL r'` with REL one of
= != < <= <N <=N, `read x r`, `write x r`, `arw x r r'`.

DFA format::

    dfa
    alphabet a b
    states q0 q1
    init q0
    finals q1
    q0 a -> q1

Lossy-channel format::

    dlcs
    states q0 q1
    vars x
    alphabet a
    init q0
    target q1                   # optional
    q0 -> q1 : send a x

with ops `x := y`, `x := *`, `assume x = y`, `assume x != y`,
`send a x`, `recv a x`.

Rendering is canonical: parse(render(m)) == m for all three formats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .model import (
    EQ, LE, LT, NEQ, Arw, Assign, Guard, NewValue, Op, Program, Read,
    Relation, RelKind, Target, Thread, Transition, Write,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"line {span.line}, column {span.column}: {message}")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class _Token:
    kind: str  # 'ident' | 'sym' | 'rel' | 'eof'
    text: str
    line: int
    col: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, max(1, len(self.text)))


_SYMBOLS = ("->", ":=", "{", "}", ":", "*")


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in "<=!":
            # relation tokens: = != < <= and offset forms <N <=N
            j = i
            if text.startswith("!=", i):
                j = i + 2
            elif text.startswith("<=", i):
                j = i + 2
            elif ch == "<":
                j = i + 1
            elif ch == "=":
                j = i + 1
            else:
                raise ParseError(f"stray '{ch}'", SourceSpan(line, start_col, 1))
            base = text[i:j]
            if base in ("<", "<="):
                while j < n and text[j].isdigit():
                    j += 1
            toks.append(_Token("rel", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        matched = False
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(_Token("sym", sym, line, start_col))
                i += len(sym)
                col += len(sym)
                matched = True
                break
        if not matched:
            raise ParseError(f"unexpected character '{ch}'", SourceSpan(line, start_col, 1))
    toks.append(_Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def fail(self, message: str, tok: Optional[_Token] = None) -> "ParseError":
        tok = tok or self.peek()
        return ParseError(message, tok.span)

    def expect_ident(self, what: str) -> _Token:
        t = self.next()
        if t.kind != "ident":
            raise self.fail(f"expected {what}", t)
        return t

    def expect_sym(self, sym: str) -> _Token:
        t = self.next()
        if t.kind != "sym" or t.text != sym:
            raise self.fail(f"expected '{sym}'", t)
        return t

    def expect_keyword(self, kw: str) -> _Token:
        t = self.next()
        if t.kind != "ident" or t.text != kw:
            raise self.fail(f"expected '{kw}'", t)
        return t

    def at_keyword(self, kw: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == kw

    def ident_list(self) -> list[str]:
        # the list runs to the end of the introducing keyword's line; the
        # tokenizer keeps no newline tokens, so compare source lines instead
        names = []
        line = self.toks[self.pos - 1].line if self.pos else None
        while self.peek().kind == "ident" and self.peek().line == line:
            names.append(self.next().text)
        return names


def _parse_relation(p: _Parser) -> Relation:
    t = p.next()
    if t.kind != "rel":
        raise p.fail("expected a relation (= != < <= <N <=N)", t)
    s = t.text
    if s == "=":
        return EQ
    if s == "!=":
        return NEQ
    if s.startswith("<="):
        return LE if len(s) == 2 else Relation(RelKind.LE, int(s[2:]))
    return LT if len(s) == 1 else Relation(RelKind.LT, int(s[1:]))


def _parse_op(p: _Parser) -> Op:
    t = p.peek()
    if t.kind == "ident" and t.text == "assume":
        p.next()
        left = p.expect_ident("a register").text
        rel = _parse_relation(p)
        right = p.expect_ident("a register").text
        return Guard(rel, left, right)
    if t.kind == "ident" and t.text == "read":
        p.next()
        var = p.expect_ident("a shared variable").text
        dst = p.expect_ident("a register").text
        return Read(var, dst)
    if t.kind == "ident" and t.text == "write":
        p.next()
        var = p.expect_ident("a shared variable").text
        src = p.expect_ident("a register").text
        return Write(var, src)
    if t.kind == "ident" and t.text == "arw":
        p.next()
        var = p.expect_ident("a shared variable").text
        expect = p.expect_ident("a register").text
        update = p.expect_ident("a register").text
        return Arw(var, expect, update)
    dst = p.expect_ident("an operation").text
    p.expect_sym(":=")
    nxt = p.next()
    if nxt.kind == "sym" and nxt.text == "*":
        return NewValue(dst)
    if nxt.kind == "ident":
        return Assign(dst, nxt.text)
    raise p.fail("expected a register or '*' after ':='", nxt)


def _parse_thread(p: _Parser) -> Thread:
    p.expect_keyword("thread")
    tid = p.expect_ident("a thread name").text
    p.expect_sym("{")
    p.expect_keyword("regs")
    regs = p.ident_list()
    declared_states: Optional[list[str]] = None
    if p.at_keyword("states"):
        p.next()
        declared_states = p.ident_list()
    p.expect_keyword("init")
    init = p.expect_ident("the initial state").text
    transitions: list[Transition] = []
    while not (p.peek().kind == "sym" and p.peek().text == "}"):
        if p.peek().kind == "eof":
            raise p.fail("unterminated thread block")
        src = p.expect_ident("a state").text
        p.expect_sym("->")
        dst = p.expect_ident("a state").text
        p.expect_sym(":")
        op = _parse_op(p)
        transitions.append(Transition(src, op, dst))
    p.expect_sym("}")
    if declared_states is not None:
        states = tuple(declared_states)
    else:
        seen: list[str] = [init]
        for tr in transitions:
            for s in (tr.src, tr.dst):
                if s not in seen:
                    seen.append(s)
        states = tuple(seen)
    return Thread(tid, states, tuple(regs), init, tuple(transitions))


def parse_program_with_target(text: str) -> tuple[Program, Optional[Target]]:
    """Parse a program file; returns the program and its inline target, if any."""
    p = _Parser(text)
    p.expect_keyword("domain")
    dom = p.expect_ident("a domain name")
    if dom.text != "nat":
        raise p.fail(f"unsupported domain '{dom.text}'", dom)
    shared: list[str] = []
    while p.at_keyword("vars"):
        p.next()
        shared.extend(p.ident_list())
    threads: list[Thread] = []
    while p.at_keyword("thread"):
        threads.append(_parse_thread(p))
    if not threads:
        raise p.fail("a program needs at least one thread")
    target: Optional[Target] = None
    if p.at_keyword("target"):
        p.next()
        tt = p.expect_ident("a thread name").text
        p.expect_sym(":")
        ts = p.expect_ident("a state").text
        target = Target(tt, ts)
    t = p.peek()
    if t.kind != "eof":
        raise p.fail("unexpected trailing input", t)
    return Program.make(threads, shared), target


def parse_program(text: str) -> Program:
    return parse_program_with_target(text)[0]


def render_program(program: Program, target: Optional[Target] = None) -> str:
    lines = ["domain nat"]
    if program.shared_vars:
        lines.append("vars " + " ".join(program.shared_vars))
    for t in program.threads:
        lines.append("")
        lines.append(f"thread {t.id} {{")
        lines.append("  regs" + ("" if not t.regs else " " + " ".join(t.regs)))
        lines.append("  states " + " ".join(t.states))
        lines.append(f"  init {t.init}")
        for tr in t.transitions:
            lines.append(f"  {tr.src} -> {tr.dst} : {tr.op.render()}")
        lines.append("}")
    if target is not None:
        lines.append("")
        lines.append(f"target {target.thread} : {target.state}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Dfa:
    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    init: str
    finals: tuple[str, ...]
    transitions: tuple[tuple[str, str, str], ...]  # (state, letter, state)


def parse_dfa(text: str) -> Dfa:
    p = _Parser(text)
    p.expect_keyword("dfa")
    p.expect_keyword("alphabet")
    alphabet = p.ident_list()
    p.expect_keyword("states")
    states = p.ident_list()
    p.expect_keyword("init")
    init = p.expect_ident("the initial state").text
    p.expect_keyword("finals")
    finals = p.ident_list()
    transitions: list[tuple[str, str, str]] = []
    while p.peek().kind == "ident":
        src = p.next().text
        letter = p.expect_ident("a letter").text
        p.expect_sym("->")
        dst = p.expect_ident("a state").text
        transitions.append((src, letter, dst))
    t = p.peek()
    if t.kind != "eof":
        raise p.fail("unexpected trailing input", t)
    dfa = Dfa(tuple(states), tuple(alphabet), init, tuple(finals), tuple(transitions))
    diags = validate_dfa(dfa)
    if diags:
        raise p.fail(diags[0], p.toks[0])
    return dfa


def validate_dfa(dfa: Dfa) -> list[str]:
    diags = []
    states = set(dfa.states)
    letters = set(dfa.alphabet)
    if dfa.init not in states:
        diags.append(f"init state '{dfa.init}' undeclared")
    for f in dfa.finals:
        if f not in states:
            diags.append(f"final state '{f}' undeclared")
    for (a, letter, b) in dfa.transitions:
        if a not in states or b not in states:
            diags.append(f"transition {a} {letter} -> {b} uses undeclared state")
        if letter not in letters:
            diags.append(f"transition {a} {letter} -> {b} uses undeclared letter")
    return diags


def render_dfa(dfa: Dfa) -> str:
    lines = ["dfa"]
    lines.append("alphabet " + " ".join(dfa.alphabet))
    lines.append("states " + " ".join(dfa.states))
    lines.append(f"init {dfa.init}")
    lines.append("finals" + ("" if not dfa.finals else " " + " ".join(dfa.finals)))
    for (a, letter, b) in dfa.transitions:
        lines.append(f"{a} {letter} -> {b}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DlcsAssign:
    dst: str
    src: str

    def render(self) -> str:
        return f"{self.dst} := {self.src}"


@dataclass(frozen=True)
class DlcsFresh:
    dst: str

    def render(self) -> str:
        return f"{self.dst} := *"


@dataclass(frozen=True)
class DlcsEq:
    left: str
    right: str

    def render(self) -> str:
        return f"assume {self.left} = {self.right}"


@dataclass(frozen=True)
class DlcsNeq:
    left: str
    right: str

    def render(self) -> str:
        return f"assume {self.left} != {self.right}"


@dataclass(frozen=True)
class DlcsSend:
    letter: str
    var: str

    def render(self) -> str:
        return f"send {self.letter} {self.var}"


@dataclass(frozen=True)
class DlcsRecv:
    letter: str
    var: str

    def render(self) -> str:
        return f"recv {self.letter} {self.var}"


DlcsOp = Union[DlcsAssign, DlcsFresh, DlcsEq, DlcsNeq, DlcsSend, DlcsRecv]


@dataclass(frozen=True)
class DlcsModel:
    states: tuple[str, ...]
    vars: tuple[str, ...]
    alphabet: tuple[str, ...]
    init: str
    transitions: tuple[tuple[str, DlcsOp, str], ...]
    target: Optional[str] = None


def parse_dlcs(text: str) -> DlcsModel:
    p = _Parser(text)
    p.expect_keyword("dlcs")
    p.expect_keyword("states")
    states = p.ident_list()
    p.expect_keyword("vars")
    dvars = p.ident_list()
    p.expect_keyword("alphabet")
    alphabet = p.ident_list()
    p.expect_keyword("init")
    init = p.expect_ident("the initial state").text
    target = None
    if p.at_keyword("target"):
        p.next()
        target = p.expect_ident("a state").text
    transitions: list[tuple[str, DlcsOp, str]] = []
    while p.peek().kind == "ident":
        src = p.next().text
        p.expect_sym("->")
        dst = p.expect_ident("a state").text
        p.expect_sym(":")
        t = p.peek()
        op: DlcsOp
        if t.kind == "ident" and t.text == "assume":
            p.next()
            left = p.expect_ident("a variable").text
            rel = _parse_relation(p)
            right = p.expect_ident("a variable").text
            if rel == EQ:
                op = DlcsEq(left, right)
            elif rel == NEQ:
                op = DlcsNeq(left, right)
            else:
                raise p.fail("channel models only support = and != guards", t)
        elif t.kind == "ident" and t.text == "send":
            p.next()
            letter = p.expect_ident("a letter").text
            var = p.expect_ident("a variable").text
            op = DlcsSend(letter, var)
        elif t.kind == "ident" and t.text == "recv":
            p.next()
            letter = p.expect_ident("a letter").text
            var = p.expect_ident("a variable").text
            op = DlcsRecv(letter, var)
        else:
            dst_var = p.expect_ident("an operation").text
            p.expect_sym(":=")
            nxt = p.next()
            if nxt.kind == "sym" and nxt.text == "*":
                op = DlcsFresh(dst_var)
            elif nxt.kind == "ident":
                op = DlcsAssign(dst_var, nxt.text)
            else:
                raise p.fail("expected a variable or '*' after ':='", nxt)
        transitions.append((src, op, dst))
    t = p.peek()
    if t.kind != "eof":
        raise p.fail("unexpected trailing input", t)
    m = DlcsModel(tuple(states), tuple(dvars), tuple(alphabet), init,
                  tuple(transitions), target)
    diags = validate_dlcs(m)
    if diags:
        raise p.fail(diags[0], p.toks[0])
    return m


def validate_dlcs(m: DlcsModel) -> list[str]:
    diags = []
    states = set(m.states)
    dvars = set(m.vars)
    letters = set(m.alphabet)
    if m.init not in states:
        diags.append(f"init state '{m.init}' undeclared")
    if m.target is not None and m.target not in states:
        diags.append(f"target state '{m.target}' undeclared")
    for (a, op, b) in m.transitions:
        if a not in states or b not in states:
            diags.append(f"transition {a} -> {b} uses undeclared state")
        if isinstance(op, (DlcsSend, DlcsRecv)):
            if op.letter not in letters:
                diags.append(f"op '{op.render()}' uses undeclared letter")
            if op.var not in dvars:
                diags.append(f"op '{op.render()}' uses undeclared variable")
        elif isinstance(op, DlcsFresh):
            if op.dst not in dvars:
                diags.append(f"op '{op.render()}' uses undeclared variable")
        elif isinstance(op, DlcsAssign):
            for v in (op.dst, op.src):
                if v not in dvars:
                    diags.append(f"op '{op.render()}' uses undeclared variable")
        else:
            for v in (op.left, op.right):
                if v not in dvars:
                    diags.append(f"op '{op.render()}' uses undeclared variable")
    return diags


def render_dlcs(m: DlcsModel) -> str:
    lines = ["dlcs"]
    lines.append("states " + " ".join(m.states))
    lines.append("vars" + ("" if not m.vars else " " + " ".join(m.vars)))
    lines.append("alphabet" + ("" if not m.alphabet else " " + " ".join(m.alphabet)))
    lines.append(f"init {m.init}")
    if m.target is not None:
        lines.append(f"target {m.target}")
    for (a, op, b) in m.transitions:
        lines.append(f"{a} -> {b} : {op.render()}")
    return "\n".join(lines) + "\n"
