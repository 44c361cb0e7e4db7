"""Shared data model: sample matrices, edge records, graphs and run config."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from .errors import (
    BadDimsError,
    DuplicateNameError,
    IndexOutOfRangeError,
    NonFiniteError,
    TooFewSamplesError,
)

VariableSet = Tuple[int, ...]

CIT_KINDS = ("kernel", "permutation")
VARIANTS = ("full", "restricted", "blanket")


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n x p sample matrix with named columns.

    Values are stored column-major so that ``column(j)`` is a contiguous view.
    Construction does not validate; call :func:`validate`.
    """

    values: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        vals = np.asfortranarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2:
            raise TooFewSamplesError("data must be a 2-d matrix")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))
        if len(self.names) != vals.shape[1]:
            raise DuplicateNameError(
                f"<{len(self.names)} names for {vals.shape[1]} columns>"
            )

    @classmethod
    def from_array(cls, values, names: Optional[Sequence[str]] = None) -> "DataMatrix":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"X{k + 1}" for k in range(values.shape[1])]
        return cls(values, tuple(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        check_index(j, self.p)
        return self.values[:, j]

    def columns(self, idx: Iterable[int]) -> np.ndarray:
        idx = list(idx)
        for j in idx:
            check_index(j, self.p)
        return self.values[:, idx]

    def index_of(self, name: str) -> int:
        from .errors import UnknownColumnError

        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownColumnError(name) from None


def check_index(j: int, p: int) -> None:
    if not 0 <= j < p:
        raise IndexOutOfRangeError(f"index {j} outside [0, {p})")


def variable_set(indices: Iterable[int], p: int) -> VariableSet:
    """Return an ordered, duplicate-free tuple of valid column indices."""
    out = []
    seen = set()
    for k in indices:
        k = int(k)
        check_index(k, p)
        if k not in seen:
            seen.add(k)
            out.append(k)
    return tuple(out)


def validate(data: DataMatrix) -> None:
    """Raise if ``data`` violates any DataMatrix invariant."""
    vals = data.values
    bad = ~np.isfinite(vals)
    if bad.any():
        # report in row-major order
        row, col = np.argwhere(bad)[0]
        raise NonFiniteError(int(row), int(col))
    if data.n < 3:
        raise TooFewSamplesError(f"need n >= 3 samples, got {data.n}")
    if data.p < 2:
        raise TooFewSamplesError(f"need p >= 2 variables, got {data.p}")
    seen = set()
    for name in data.names:
        if name in seen:
            raise DuplicateNameError(name)
        seen.add(name)


def column_ranks(data: DataMatrix, col: int) -> np.ndarray:
    """Ranks 1..n of one column, ties averaged."""
    return rankdata(data.column(col), method="average")


@dataclass
class EdgeTestRecord:
    i: int
    j: int
    cond_set: VariableSet
    statistic: float
    raw_p: float
    adj_p: float = float("nan")
    selected: bool = False

    def __post_init__(self):
        if self.i <= self.j:
            raise IndexOutOfRangeError(f"edge record needs i > j, got ({self.i}, {self.j})")
        if self.i in self.cond_set or self.j in self.cond_set:
            raise IndexOutOfRangeError(
                f"conditioning set of ({self.i}, {self.j}) contains an endpoint"
            )


def edge_key(a: int, b: int) -> Tuple[int, int]:
    """Canonical (larger, smaller) ordering of an unordered pair."""
    return (a, b) if a > b else (b, a)


@dataclass(frozen=True)
class UndirectedGraph:
    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise IndexOutOfRangeError(f"self-loop on node {a}")
            check_index(a, self.p)
            check_index(b, self.p)
            norm.add(edge_key(a, b))
        object.__setattr__(self, "edges", frozenset(norm))

    def __contains__(self, pair) -> bool:
        return edge_key(*pair) in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def neighbors(self, a: int) -> set:
        return {u if v == a else v for u, v in self.edges if a in (u, v)}

    def subgraph(self, nodes: Iterable[int]) -> "UndirectedGraph":
        nodes = set(nodes)
        return UndirectedGraph(
            self.p, frozenset(e for e in self.edges if e[0] in nodes and e[1] in nodes)
        )

    def sorted_edges(self):
        return sorted(self.edges, key=lambda e: (e[1], e[0]))


def default_ns(n: int) -> int:
    """Screening size floor(n / log n)."""
    return max(1, int(math.floor(n / math.log(n))))


def _default_cit():
    from .cit import CitConfig

    return CitConfig()


@dataclass
class LearnConfig:
    """Structure-learning settings.

    ``ns=None`` resolves to ``floor(n / log n)`` (capped at p - 2) when the
    data are seen. ``max_cond=None`` caps conditioning sets at ``2 * ns``.
    """

    ns: Optional[int] = None
    alpha: float = 0.01
    cit_kind: str = "kernel"
    variant: str = "full"
    seed: int = 0
    workers: int = 1
    cit_params: "object" = field(default_factory=_default_cit)
    max_cond: Optional[int] = None
    force_features: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.cit_kind not in CIT_KINDS:
            raise ValueError(f"cit_kind must be one of {CIT_KINDS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.ns is not None and self.ns < 1:
            raise ValueError("ns must be positive")

    def resolve_ns(self, n: int, p: int) -> int:
        ns = self.ns if self.ns is not None else min(default_ns(n), p - 2)
        if ns >= n:
            raise BadDimsError(f"ns={ns} must be smaller than n={n}")
        return max(1, min(ns, p - 2)) if p > 2 else 1

    def resolve_max_cond(self, ns: int) -> int:
        return self.max_cond if self.max_cond is not None else 2 * ns
