import pytest

from tsocbmc import (
    EQ, LE, LT, NEQ, Arw, Assign, Guard, InvalidProgramError, NewValue,
    Program, Read, Relation, Target, Thread, Transition, Write, eval_rel, le,
    lt, validate,
)
from tsocbmc.model import program_index


@pytest.mark.parametrize("rel,d1,d2,expected", [
    (EQ, 3, 3, True), (EQ, 3, 4, False),
    (NEQ, 3, 4, True), (NEQ, 0, 0, False),
    (LT, 2, 3, True), (LT, 3, 3, False),
    (LE, 3, 3, True), (LE, 4, 3, False),
    (lt(2), 1, 4, True),   # 1 + 2 < 4
    (lt(2), 1, 3, False),  # 1 + 2 < 3 fails
    (le(2), 1, 3, True),   # 1 + 2 <= 3
    (le(5), 0, 4, False),
])
def test_eval_rel(rel, d1, d2, expected):
    assert eval_rel(rel, d1, d2) is expected


def test_relation_offsets_only_for_orders():
    with pytest.raises(ValueError):
        Relation(EQ.kind, 1)
    with pytest.raises(ValueError):
        lt(-1)
    assert lt(0) == LT
    assert le(0) == LE
    assert lt(3).render() == "<3"
    assert le(1).render() == "<=1"
    assert EQ.render() == "="
    assert NEQ.render() == "!="


def test_op_renders():
    assert Assign("a", "b").render() == "a := b"
    assert NewValue("a").render() == "a := *"
    assert Guard(lt(1), "a", "b").render() == "assume a <1 b"
    assert Read("x", "a").render() == "read x a"
    assert Write("x", "a").render() == "write x a"
    assert Arw("x", "a", "b").render() == "arw x a b"


def _thread(tid, regs, trs, init="q0", states=None):
    if states is None:
        states = [init]
        for tr in trs:
            for s in (tr.src, tr.dst):
                if s not in states:
                    states.append(s)
    return Thread(tid, tuple(states), tuple(regs), init, tuple(trs))


def test_make_computes_largest_offset():
    t = _thread("t", ["a", "b"], [Transition("q0", Guard(lt(4), "a", "b"), "q1"),
                                  Transition("q0", Guard(le(2), "a", "b"), "q1")])
    p = Program.make([t], ["x"])
    assert p.n_max == 4
    assert validate(p) == []


def test_validate_rejects_foreign_register():
    t1 = _thread("t1", ["a"], [Transition("q0", Write("x", "a"), "q1")])
    t2 = _thread("t2", ["b"], [Transition("q0", Read("x", "a"), "q1")])
    p = Program.make([t1, t2], ["x"])
    diags = validate(p)
    assert any("not owned" in d for d in diags)


def test_validate_rejects_shared_register_name():
    t1 = _thread("t1", ["a"], [])
    t2 = _thread("t2", ["a"], [])
    diags = validate(Program.make([t1, t2], ["x"]))
    assert any("disjoint" in d for d in diags)


def test_validate_rejects_undeclared_variable_and_state():
    t = _thread("t", ["a"], [Transition("q0", Write("y", "a"), "q1")])
    diags = validate(Program.make([t], ["x"]))
    assert any("undeclared shared variable 'y'" in d for d in diags)

    bad = Thread("t", ("q0",), ("a",), "q0",
                 (Transition("q0", Assign("a", "a"), "q9"),))
    diags = validate(Program.make([bad], []))
    assert any("undeclared state" in d for d in diags)


def test_validate_rejects_bad_init_and_duplicates():
    bad = Thread("t", ("q0", "q0"), ("a", "a"), "q7", ())
    diags = validate(Program.make([bad], ["x", "x"]))
    assert any("duplicate state" in d for d in diags)
    assert any("duplicate register" in d for d in diags)
    assert any("init state 'q7' undeclared" in d for d in diags)
    assert any("duplicate shared variable" in d for d in diags)


def test_program_index_interning_and_target():
    t1 = _thread("t1", ["a"], [Transition("q0", Write("x", "a"), "q1")])
    t2 = _thread("t2", ["b"], [Transition("p0", Read("x", "b"), "p1")], init="p0")
    p = Program.make([t1, t2], ["x", "y"])
    idx = program_index(p)
    assert idx.thread_ids == ("t1", "t2")
    assert idx.regs == ("a", "b")
    assert idx.vid == {"x": 0, "y": 1}
    assert idx.target_idx(Target("t2", "p1")) == (1, 1)
    with pytest.raises(KeyError):
        idx.target_idx(Target("t3", "p1"))
    with pytest.raises(KeyError):
        idx.target_idx(Target("t1", "p1"))


def test_program_index_refuses_invalid():
    bad = Thread("t", ("q0",), ("a",), "missing", ())
    with pytest.raises(InvalidProgramError):
        program_index(Program.make([bad], []))
