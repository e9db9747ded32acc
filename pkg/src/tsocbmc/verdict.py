"""Shared result types for the reachability engines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

REACHABLE = "reachable"
UNREACHABLE = "unreachable"
UNREACHABLE_WITHIN_BOUNDS = "unreachable_within_bounds"
BOUND_EXHAUSTED = "bound_exhausted"


@dataclass
class Stats:
    states_explored: int = 0
    peak_frontier: int = 0
    wall_ms: float = 0.0


@dataclass
class Verdict:
    reachable: bool
    status: str
    witness: Optional[Any] = None
    stats: Stats = field(default_factory=Stats)
