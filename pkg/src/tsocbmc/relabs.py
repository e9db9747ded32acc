"""Order abstraction over the summary variables.

A state keeps only the ordering of the current values: each variable gets a
rank, equal values share a rank, and ranks are dense (0..m with every rank
occupied).  The sentinel variable always sits in rank 0 because naturals
cannot go below its fixed value 0.

Relation tests soften to what ranks can express:

  =            same rank
  !=           different ranks
  <N  (any N)  strictly smaller rank
  <=           rank less or equal
  <=N (N >= 1) strictly smaller rank

Distance constraints (the N offsets) cannot be decided from ranks alone;
requiring a strict rank gap is the exact necessary condition, and witness
concretization later restores sufficiency by inflating gaps.

A fresh value lands either inside one of the m+1 existing classes or in one
of the m+1 slots strictly between adjacent classes or above the top class.
There is no slot below the bottom class: the sentinel lives there and no
natural is smaller than 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import LE, LT, EQ, NEQ, Program, Relation
from .model import program_index


def _densify(vals: Sequence[int]) -> tuple[int, ...]:
    ordered = sorted(set(vals))
    remap = {v: i for i, v in enumerate(ordered)}
    return tuple(remap[v] for v in vals)


def abstract_of(values: Sequence[int]) -> tuple[int, ...]:
    """Rank tuple of a concrete value vector."""
    return _densify(values)


def rel_check(rel: Relation, rank_left: int, rank_right: int) -> bool:
    if rel.kind == EQ.kind:
        return rank_left == rank_right
    if rel.kind == NEQ.kind:
        return rank_left != rank_right
    if rel.kind == LT.kind:
        return rank_left < rank_right
    # <=: exact for offset 0, strict for any positive offset
    if rel.n == 0:
        return rank_left <= rank_right
    return rank_left < rank_right


def rel_apply(ranks: tuple[int, ...], effects) -> list[tuple[int, ...]]:
    """Successor rank tuples of one effect list (core encoding).

    copy, multi and passing guards give one successor, failing guards give
    none, and a fresh assignment branches over every placement of the new
    value relative to the other variables.
    """
    states = [ranks]
    for eff in effects:
        tag = eff[0]
        if tag == "copy":
            _, d, s = eff
            nxt = []
            for r in states:
                r2 = list(r)
                r2[d] = r[s]
                nxt.append(_densify(r2))
            states = nxt
        elif tag == "guard":
            _, rel, a, b = eff
            states = [r for r in states if rel_check(rel, r[a], r[b])]
        elif tag == "fresh":
            d = eff[1]
            nxt = []
            for r in states:
                others = [r[i] for i in range(len(r)) if i != d]
                classes = sorted(set(others))
                # double the scale: even slots join a class, odd slots sit
                # strictly above it (between classes, or above the top)
                doubled = {v: 2 * i for i, v in enumerate(classes)}
                for slot in range(2 * len(classes)):
                    r2 = [doubled[r[i]] if i != d else slot for i in range(len(r))]
                    nxt.append(_densify(r2))
            states = nxt
        else:  # multi: simultaneous copies
            pairs = eff[1]
            nxt = []
            for r in states:
                r2 = list(r)
                srcs = [r[s] for _, s in pairs]
                for (d, _), v in zip(pairs, srcs):
                    r2[d] = v
                nxt.append(_densify(r2))
            states = nxt
    return states


@dataclass(frozen=True)
class RelState:
    """Public wrapper around a rank tuple."""
    ranks: tuple[int, ...]

    def __post_init__(self):
        if self.ranks != _densify(self.ranks):
            raise ValueError("ranks must be dense")

    @property
    def width(self) -> int:
        return max(self.ranks) + 1 if self.ranks else 0

    def classes(self) -> list[tuple[int, ...]]:
        by_rank: dict[int, list[int]] = {}
        for i, r in enumerate(self.ranks):
            by_rank.setdefault(r, []).append(i)
        return [tuple(by_rank[r]) for r in sorted(by_rank)]


def rel_initial(nab: int) -> tuple[int, ...]:
    """All summary variables start equal (everything is 0)."""
    return (0,) * nab


def canonical_key(flat: tuple[int, ...], ranks: tuple[int, ...]) -> bytes:
    """Injective byte encoding of a search state.  Every component is a
    small natural, so the identity byte map works and decoding is direct."""
    return bytes(flat) + bytes(ranks)


def decode_key(flat_len: int, key: bytes) -> tuple[tuple[int, ...], tuple[int, ...]]:
    return tuple(key[:flat_len]), tuple(key[flat_len:])


def key_length(program: Program, k: int) -> int:
    """Closed form for the byte length of every canonical key:

        control: nt + k + 1 + nx*nt + k*nx
        ranks:   1 + nx + nr + nx*k + nx*nt
    """
    idx = program_index(program)
    nt, nx, nr = len(idx.thread_ids), len(idx.vars), len(idx.regs)
    control = nt + k + 1 + nx * nt + k * nx
    ranks = 1 + nx + nr + nx * k + nx * nt
    return control + ranks
