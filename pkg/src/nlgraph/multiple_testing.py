"""Holm step-down adjustment and edge selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .core import EdgeTestRecord, UndirectedGraph
from .errors import OutOfRangePError


@dataclass(frozen=True)
class AdjustedPValues:
    raw: np.ndarray
    adjusted: np.ndarray

    @property
    def m(self) -> int:
        return len(self.raw)


def holm_adjust(raw: Sequence[float]) -> AdjustedPValues:
    """Holm (1979) step-down adjusted p-values, returned in input order.

    Ties are ordered by input position.
    """
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.size and (np.any(~np.isfinite(raw)) or raw.min() < 0 or raw.max() > 1):
        raise OutOfRangePError("p-values must lie in [0, 1]")
    m = raw.size
    order = np.argsort(raw, kind="stable")
    scaled = (m - np.arange(m)) * raw[order]
    stepped = np.minimum(np.maximum.accumulate(scaled), 1.0)
    adjusted = np.empty(m)
    adjusted[order] = stepped
    return AdjustedPValues(raw.copy(), adjusted)


def select_edges(
    records: List[EdgeTestRecord], alpha: float, p: Optional[int] = None
) -> UndirectedGraph:
    """Holm-adjust all records jointly and keep pairs with adjusted p <= alpha.

    Fills ``adj_p`` and ``selected`` on the records in place.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if p is None:
        p = 1 + max((r.i for r in records), default=0)
    adj = holm_adjust([r.raw_p for r in records]).adjusted
    edges = []
    for rec, a in zip(records, adj):
        rec.adj_p = float(max(a, rec.raw_p))
        rec.selected = bool(rec.adj_p <= alpha)
        if rec.selected:
            edges.append((rec.i, rec.j))
    return UndirectedGraph(p, frozenset(edges))
