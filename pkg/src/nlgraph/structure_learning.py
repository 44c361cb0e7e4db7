"""Double regression structure learning and causal-neighborhood discovery.

Every pair test (i, j) conditions on the union of two screened
neighborhoods instead of all remaining variables. Three variants share the
same machinery:

* ``full``: all C(p, 2) pairs, conditioning on S_i | S_{j\\i};
* ``restricted``: only pairs of the moral graph built by treating each
  screened set as a parent set;
* ``blanket``: restricted pairs, conditioning on the smaller of the two
  super Markov blankets (screened set plus spouses).
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .cit import CitConfig, kernel_cit, permutation_cit
from .core import (
    DataMatrix,
    EdgeTestRecord,
    LearnConfig,
    UndirectedGraph,
    VariableSet,
    edge_key,
    validate,
)
from .errors import SelfParentError
from .multiple_testing import holm_adjust, select_edges
from .screening import NeighborhoodMap, nonparanormal, reduced_set, screen_all, screen_response

log = logging.getLogger(__name__)


def pair_seed(seed: int, i: int, j: int) -> int:
    """Per-test seed derived from the global seed and the pair only."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(i), int(j)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def moralize(parent_sets: Sequence[Sequence[int]]) -> UndirectedGraph:
    """Moral graph: parent-child links plus links between co-parents."""
    p = len(parent_sets)
    edges = set()
    for child, parents in enumerate(parent_sets):
        parents = sorted(set(int(k) for k in parents))
        if child in parents:
            raise SelfParentError(f"node {child} lists itself as a parent")
        for k in parents:
            edges.add(edge_key(child, k))
        for a, b in combinations(parents, 2):
            edges.add(edge_key(a, b))
    return UndirectedGraph(p, frozenset(edges))


@dataclass(frozen=True)
class CandidateGraph:
    parent_sets: Tuple[VariableSet, ...]
    moral_edges: UndirectedGraph


@dataclass(frozen=True)
class BlanketMap:
    spouses: Tuple[VariableSet, ...]
    blankets: Tuple[VariableSet, ...]


def candidate_graph(nmap: NeighborhoodMap, ns: int) -> CandidateGraph:
    parents = tuple(nmap.screened(i, ns) for i in range(nmap.p))
    return CandidateGraph(parents, moralize(parents))


def spouse_sets(
    parent_sets: Sequence[Sequence[int]], exclude_adjacent: bool = True
) -> Tuple[VariableSet, ...]:
    """A_i = {j : S_i and S_j share a member}, in ascending order.

    With ``exclude_adjacent`` nodes already linked to i in the moral graph of
    the parent sets are dropped.
    """
    sets = [set(int(k) for k in s) for s in parent_sets]
    moral = moralize(parent_sets) if exclude_adjacent else None
    out = []
    for i, own in enumerate(sets):
        out.append(tuple(
            j for j in range(len(sets))
            if j != i and own & sets[j] and not (moral is not None and (i, j) in moral)
        ))
    return tuple(out)


def build_blankets(
    nmap: NeighborhoodMap, ns: Optional[int] = None, exclude_adjacent: bool = True
) -> BlanketMap:
    """Spouse sets and blankets S_i | A_i from the screened sets at ``ns``.

    Spouses are listed by descending screening score against i, so a capped
    blanket keeps the most relevant ones.
    """
    ns = nmap.ns if ns is None else ns
    parents = [nmap.screened(i, ns) for i in range(nmap.p)]
    spouses, blankets = [], []
    for i, found in enumerate(spouse_sets(parents, exclude_adjacent)):
        found = sorted(found, key=lambda j: (-nmap.scores[i, j], j))
        spouses.append(tuple(found))
        blankets.append(parents[i] + tuple(j for j in found if j not in parents[i]))
    return BlanketMap(tuple(spouses), tuple(blankets))


def _cap(cond: List[int], i: int, j: int, nmap: NeighborhoodMap, cap: int) -> VariableSet:
    if len(cond) <= cap:
        return tuple(cond)
    rel = np.maximum(nmap.scores[i, cond], nmap.scores[j, cond])
    keep = np.argsort(-rel, kind="stable")[:cap]
    return tuple(cond[k] for k in sorted(keep))


def double_regression_set(nmap: NeighborhoodMap, i: int, j: int, ns: int, cap: int) -> VariableSet:
    """S_i | S_{j\\i} with both i and j removed, capped at ``cap`` members."""
    cond = []
    for k in nmap.screened(i, ns) + reduced_set(nmap, j, i, ns):
        if k != i and k != j and k not in cond:
            cond.append(k)
    return _cap(cond, i, j, nmap, cap)


def blanket_set(blankets: BlanketMap, nmap: NeighborhoodMap, i: int, j: int, cap: int) -> VariableSet:
    """Conditioning set from the smaller blanket; ties go to node i."""
    mi = [k for k in blankets.blankets[i] if k not in (i, j)]
    mj = [k for k in blankets.blankets[j] if k not in (i, j)]
    chosen = mi if len(mi) <= len(mj) else mj
    return tuple(chosen[:cap])


# --- pair tests, optionally in worker processes -----------------------------

_SHARED: Dict[str, object] = {}


def _init_worker(values: np.ndarray, cit_kind: str, cit_params: CitConfig, seed: int) -> None:
    _SHARED.update(values=values, cit_kind=cit_kind, cit_params=cit_params, seed=seed)


def run_cit(values, x: int, y: int, cond: VariableSet, cit_kind: str, params: CitConfig,
            seed: int, transformed: bool = False):
    cfg = replace(params, seed=pair_seed(seed, x, y))
    z = values[:, list(cond)] if cond else np.empty((values.shape[0], 0))
    test = kernel_cit if cit_kind == "kernel" else permutation_cit
    return test(values[:, x], values[:, y], z, cfg, transformed=transformed)


def _test_chunk(jobs):
    out = []
    with threadpool_limits(limits=1):
        for i, j, cond in jobs:
            res = run_cit(
                _SHARED["values"], i, j, cond,
                _SHARED["cit_kind"], _SHARED["cit_params"], _SHARED["seed"], True,
            )
            out.append((res.statistic, res.p_value))
    return out


def run_pair_tests(values: np.ndarray, jobs, cfg: LearnConfig) -> List[Tuple[float, float]]:
    """Run (i, j, cond) tests; results are identical for any worker count."""
    # rank-transform once; each test would otherwise redo it per column
    args = (np.asfortranarray(nonparanormal(values)), cfg.cit_kind, cfg.cit_params, cfg.seed)
    if cfg.workers <= 1 or len(jobs) < 2:
        _init_worker(*args)
        return _test_chunk(jobs)
    size = max(1, len(jobs) // (cfg.workers * 4))
    chunks = [jobs[k:k + size] for k in range(0, len(jobs), size)]
    with ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=args) as pool:
        results = list(pool.map(_test_chunk, chunks))
    return [r for chunk in results for r in chunk]


@dataclass
class LearnResult:
    records: List[EdgeTestRecord]
    graph: UndirectedGraph
    ns: int
    neighborhoods: NeighborhoodMap
    candidate: Optional[CandidateGraph] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def tested_pairs(self) -> int:
        return len(self.records)


def learn(data: DataMatrix, cfg: LearnConfig) -> LearnResult:
    """Screen once, test the variant's pairs, then Holm-select at cfg.alpha."""
    validate(data)
    ns = cfg.resolve_ns(data.n, data.p)
    cap = cfg.resolve_max_cond(ns)
    timings = {}

    t0 = time.perf_counter()
    nmap = screen_all(data, ns, workers=cfg.workers)
    timings["screening"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    candidate = None
    if cfg.variant == "full":
        pairs = [(i, j) for i in range(data.p) for j in range(i)]
        jobs = [(i, j, double_regression_set(nmap, i, j, ns, cap)) for i, j in pairs]
    else:
        candidate = candidate_graph(nmap, ns)
        pairs = candidate.moral_edges.sorted_edges()
        if cfg.variant == "restricted":
            jobs = [(i, j, double_regression_set(nmap, i, j, ns, cap)) for i, j in pairs]
        else:
            blankets = build_blankets(nmap, ns)
            jobs = [(i, j, blanket_set(blankets, nmap, i, j, cap)) for i, j in pairs]
    timings["candidates"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    results = run_pair_tests(data.values, jobs, cfg)
    timings["tests"] = time.perf_counter() - t0

    records = [
        EdgeTestRecord(i, j, cond, stat, pval)
        for (i, j, cond), (stat, pval) in zip(jobs, results)
    ]
    t0 = time.perf_counter()
    graph = select_edges(records, cfg.alpha, data.p)
    timings["selection"] = time.perf_counter() - t0
    log.info("tested %d pairs, selected %d edges", len(records), len(graph))
    return LearnResult(records, graph, ns, nmap, candidate, timings)


def learn_full(data: DataMatrix, cfg: LearnConfig) -> List[EdgeTestRecord]:
    return learn(data, replace(cfg, variant="full")).records


def learn_restricted(data: DataMatrix, cfg: LearnConfig) -> List[EdgeTestRecord]:
    return learn(data, replace(cfg, variant="restricted")).records


def learn_blanket(data: DataMatrix, cfg: LearnConfig) -> List[EdgeTestRecord]:
    return learn(data, replace(cfg, variant="blanket")).records


# --- causal neighborhood of a response ----------------------------------------


@dataclass
class CausalRecord:
    j: int
    cond_set: VariableSet
    statistic: float
    raw_p: float
    adj_p: float = float("nan")
    selected: bool = False


@dataclass
class CausalResult:
    records: List[CausalRecord]
    screened: VariableSet
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def selected(self) -> VariableSet:
        return tuple(r.j for r in self.records if r.selected)


def causal_search(data: DataMatrix, y, cfg: LearnConfig) -> CausalResult:
    """Test each screened feature X_j against y given X over S | xi_j minus j."""
    validate(data)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != data.n:
        raise ValueError(f"response has {y.shape[0]} rows, data has {data.n}")
    ns = cfg.resolve_ns(data.n, data.p)
    timings = {}

    t0 = time.perf_counter()
    order, _ = screen_response(y, data, workers=cfg.workers)
    screened = [int(k) for k in order[:ns]]
    for k in cfg.force_features:
        if k not in screened:
            screened.append(int(k))
    nmap = screen_all(data, ns, workers=cfg.workers)
    timings["screening"] = time.perf_counter() - t0

    jobs = []
    for j in screened:
        cond = [k for k in screened if k != j]
        cond += [k for k in nmap.screened(j, ns) if k != j and k not in cond]
        jobs.append((j, data.p, tuple(cond)))

    t0 = time.perf_counter()
    values = np.column_stack([data.values, y])
    results = run_pair_tests(values, jobs, cfg)
    timings["tests"] = time.perf_counter() - t0

    records = [
        CausalRecord(j, cond, stat, pval)
        for (j, _, cond), (stat, pval) in zip(jobs, results)
    ]
    if records:
        adj = holm_adjust([r.raw_p for r in records]).adjusted
        for rec, a in zip(records, adj):
            rec.adj_p = float(a)
            rec.selected = bool(a <= cfg.alpha)
    return CausalResult(records, tuple(screened), timings)


def causal_discovery(data: DataMatrix, y, cfg: LearnConfig) -> List[CausalRecord]:
    return causal_search(data, y, cfg).records


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("NLGRAPH_WORKERS", "1")))
    except ValueError:
        return 1
