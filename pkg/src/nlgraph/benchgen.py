"""Synthetic benchmark models with known moral graphs, and PR-curve scoring."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import DataMatrix, UndirectedGraph, edge_key
from .errors import BadDimsError, EmptyTruthError

# 1-based parent sets of the seven-node nonlinear system
EXAMPLE1_PARENTS = {2: (1,), 3: (1, 2), 4: (3, 6), 5: (2, 6), 7: (3, 5)}

LINKS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "abs_cos": lambda z: np.abs(z) * np.cos(z),
    "tanh": np.tanh,
    "log_abs": lambda z: np.log(np.abs(z) + 1.0),
}
LINK_NAMES = tuple(LINKS)
NOISE_KINDS = ("normal", "uniform")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parametric description of a synthetic dataset.

    For example2, ``f[i]``/``g[i]``/``noise[i]`` describe column i (0-based);
    entries that do not apply are None.
    """

    kind: str
    n: int
    p: int
    seed: int
    f: Tuple[Optional[str], ...] = ()
    g: Tuple[Optional[str], ...] = ()
    noise: Tuple[Optional[str], ...] = ()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(
            d["kind"], int(d["n"]), int(d["p"]), int(d["seed"]),
            tuple(d.get("f", ())), tuple(d.get("g", ())), tuple(d.get("noise", ())),
        )


def _names(p: int) -> Tuple[str, ...]:
    return tuple(f"X{k + 1}" for k in range(p))


def example1_truth(p: int) -> UndirectedGraph:
    from .structure_learning import moralize

    parents = [()] * p
    for child, ps in EXAMPLE1_PARENTS.items():
        parents[child - 1] = tuple(k - 1 for k in ps)
    return moralize(parents)


def gen_example1(n: int, p: int, seed: int):
    """Seven-node nonlinear, non-Gaussian system padded with N(0, 1) noise columns."""
    if p < 7 or n < 10:
        raise BadDimsError(f"example1 needs p >= 7 and n >= 10, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    x = np.empty((n, p))
    x1 = rng.uniform(-1, 1, n)
    x6 = rng.uniform(-1, 1, n)
    x2 = 6 * np.cos(x1) + rng.uniform(-1, 1, n)
    x3 = 5 * np.sin(x1) + x2 + rng.standard_normal(n)
    x4 = 5 * np.cos(x3 * x6) + 3 * x3 + 3 * x6 + rng.standard_normal(n)
    x5 = 0.05 * (x2 + x6) ** 3 + rng.standard_normal(n)
    x7 = 6 * np.cos(0.2 * (x3 + np.log(np.abs(5 * x5) + 1))) + rng.uniform(-1, 1, n)
    x[:, :7] = np.column_stack([x1, x2, x3, x4, x5, x6, x7])
    x[:, 7:] = rng.standard_normal((n, p - 7))
    return DataMatrix(x, _names(p)), example1_truth(p)


def example2_truth(p: int) -> UndirectedGraph:
    edges = [(i, i - 1) for i in range(1, p)] + [(i, i - 2) for i in range(2, p)]
    return UndirectedGraph(p, frozenset(edges))


def gen_example2(n: int, p: int, seed: int):
    """Second-order nonlinear chain with randomly drawn links and noise types."""
    if p < 3 or n < 1:
        raise BadDimsError(f"example2 needs p >= 3, got p={p}")
    rng = np.random.default_rng(seed)
    f: List[Optional[str]] = [None] * p
    g: List[Optional[str]] = [None] * p
    noise: List[Optional[str]] = [None] * p
    x = np.empty((n, p))
    x[:, 0] = rng.uniform(-1, 1, n)
    g[1] = LINK_NAMES[rng.integers(3)]
    noise[1] = "normal"
    x[:, 1] = LINKS[g[1]](x[:, 0]) + rng.standard_normal(n)
    for i in range(2, p):
        f[i] = LINK_NAMES[rng.integers(3)]
        g[i] = LINK_NAMES[rng.integers(3)]
        noise[i] = NOISE_KINDS[rng.integers(2)]
        eps = rng.standard_normal(n) if noise[i] == "normal" else rng.uniform(-0.5, 0.5, n)
        x[:, i] = LINKS[f[i]](x[:, i - 2]) + LINKS[g[i]](x[:, i - 1]) + eps
    spec = GeneratorSpec("example2", n, p, seed, tuple(f), tuple(g), tuple(noise))
    return DataMatrix(x, _names(p)), example2_truth(p), spec


def generate(kind: str, n: int, p: int, seed: int):
    """(data, truth, spec) for either model."""
    if kind == "example1":
        data, truth = gen_example1(n, p, seed)
        return data, truth, GeneratorSpec("example1", n, p, seed)
    if kind == "example2":
        return gen_example2(n, p, seed)
    raise ValueError(f"unknown model {kind!r}")


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float


def pr_curve(records, truth: UndirectedGraph) -> List[PrPoint]:
    """Precision/recall as the raw p-value threshold sweeps its distinct values.

    True edges that were never tested count as false negatives throughout.
    """
    if len(truth.edges) == 0:
        raise EmptyTruthError("ground-truth graph has no edges")
    if not records:
        return []
    raw = np.array([r.raw_p for r in records], dtype=np.float64)
    hit = np.array([edge_key(r.i, r.j) in truth.edges for r in records], dtype=np.int64)
    order = np.argsort(raw, kind="stable")
    raw, hit = raw[order], hit[order]
    tp = np.cumsum(hit)
    predicted = np.arange(1, len(raw) + 1)
    # last position of each distinct p-value
    last = np.flatnonzero(np.r_[raw[1:] != raw[:-1], True])
    total = len(truth.edges)
    return [
        PrPoint(float(raw[k]), float(tp[k] / predicted[k]), float(tp[k] / total))
        for k in last
    ]


def pr_auc(points: Sequence[PrPoint]) -> float:
    """Step-wise area: sum of (recall increment) * precision, recall_0 = 0."""
    pts = sorted(points, key=lambda q: q.recall)
    area, prev = 0.0, 0.0
    for q in pts:
        area += (q.recall - prev) * q.precision
        prev = q.recall
    return float(min(max(area, 0.0), 1.0))


def f1_score(
    predicted: UndirectedGraph, truth: UndirectedGraph, nodes: Optional[Sequence[int]] = None
) -> float:
    """Edge-set F1; with ``nodes`` both graphs are first cut to that node set."""
    if nodes is not None:
        predicted, truth = predicted.subgraph(nodes), truth.subgraph(nodes)
    tp = len(predicted.edges & truth.edges)
    if tp == 0:
        return 0.0
    precision = tp / len(predicted.edges)
    recall = tp / len(truth.edges)
    return 2 * precision * recall / (precision + recall)


def truth_nodes(truth: UndirectedGraph) -> List[int]:
    """Nodes touched by at least one true edge."""
    return sorted({k for e in truth.edges for k in e})


def replicate_seed(seed: int, r: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(r)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class ReplicateResult:
    replicate: int
    seed: int
    auc: float
    f1: float
    tested_pairs: int
    selected_edges: int
    timings: Dict[str, float] = field(default_factory=dict)


def run_replicate(model: str, n: int, p: int, r: int, cfg, seed: int) -> ReplicateResult:
    """Generate one dataset, learn its graph, and score it against the truth."""
    from dataclasses import replace

    from .structure_learning import learn

    rseed = replicate_seed(seed, r)
    data, truth, _ = generate(model, n, p, rseed)
    res = learn(data, replace(cfg, seed=rseed))
    auc = pr_auc(pr_curve(res.records, truth))
    return ReplicateResult(
        r, rseed, auc, f1_score(res.graph, truth), res.tested_pairs, len(res.graph), res.timings
    )
