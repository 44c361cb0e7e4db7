"""Nonparanormal transform and Henze-Zirkler sure independence screening.

Each pair of variables is scored by the bivariate Henze-Zirkler normality
statistic of its rank-Gaussianized, whitened columns. Large scores mean the
pair is far from jointly Gaussian, i.e. strongly dependent.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from . import _kernels
from .core import DataMatrix, VariableSet, check_index, validate
from .errors import SingularCovarianceError

log = logging.getLogger(__name__)

WHITEN = True


def nonparanormal(values: np.ndarray) -> np.ndarray:
    """Map each column of an (n, d) array (or a vector) to Phi^-1(rank / (n + 1))."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    ranks = rankdata(values, axis=0, method="average")
    return ndtri(ranks / (n + 1.0))


def nonparanormal_transform(data: DataMatrix) -> DataMatrix:
    validate(data)
    return DataMatrix(nonparanormal(data.values), data.names)


def hz_beta(n: int, d: int) -> float:
    """Henze-Zirkler smoothing parameter for sample size n in dimension d."""
    return 2.0**-0.5 * ((2 * d + 1) * n / 4.0) ** (1.0 / (d + 4))


def whiten(z: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Center and rotate so the (1/n) sample covariance is the identity."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    zc = z - z.mean(axis=0)
    cov = zc.T @ zc / z.shape[0]
    evals = np.linalg.eigvalsh(cov)
    if evals[0] <= tol * max(evals[-1], 1e-300):
        raise SingularCovarianceError(
            f"sample covariance is singular (eigenvalues {evals[0]:.3g} .. {evals[-1]:.3g})"
        )
    chol = np.linalg.cholesky(cov)
    return np.linalg.solve(chol, zc.T).T


def hz_statistic(z: np.ndarray) -> float:
    """Henze-Zirkler statistic of an (n, d) sample.

    The input is whitened first (a no-op for already whitened data), so the
    result is invariant to affine maps of the sample.
    """
    w = whiten(z)
    n, d = w.shape
    b2 = hz_beta(n, d) ** 2
    sq = np.einsum("ij,ij->i", w, w)
    gram = w @ w.T
    dist = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(dist, 0.0, out=dist)
    term_pair = np.exp(-0.5 * b2 * dist).sum() / n**2
    term_one = 2.0 * (1.0 + b2) ** (-d / 2.0) * np.exp(-b2 * sq / (2.0 * (1.0 + b2))).sum() / n
    term_const = (1.0 + 2.0 * b2) ** (-d / 2.0)
    return float(max(n * (term_pair - term_one + term_const), 0.0))


def _standardized_rows(values: np.ndarray):
    """Nonparanormal columns as standardized (1/n) rows, plus a constant-column mask."""
    z = nonparanormal(values)
    z = z - z.mean(axis=0)
    sd = np.sqrt((z * z).mean(axis=0))
    constant = sd == 0.0
    sd[constant] = 1.0
    return np.ascontiguousarray((z / sd).T), constant


def pair_scores(
    values: np.ndarray,
    pairs,
    workers: int = 1,
    backend: Optional[str] = None,
    whiten: Optional[bool] = None,
) -> np.ndarray:
    """Bivariate HZ-SIS scores for the given column pairs of an (n, p) array.

    Pairs involving a constant column score 0 with a warning. A collinear
    pair cannot be whitened and is scored unwhitened instead, which ranks it
    as strongly dependent.
    """
    whiten = WHITEN if whiten is None else whiten
    zs, constant = _standardized_rows(values)
    pairs = np.ascontiguousarray(np.asarray(pairs, dtype=np.intp).reshape(-1, 2))
    beta = hz_beta(zs.shape[1], 2)
    scores = _kernels.hz_pair_scores(zs, pairs, beta, workers, backend=backend, whiten=whiten)
    if constant.any():
        scores[constant[pairs[:, 0]] | constant[pairs[:, 1]]] = np.nan
    bad = ~np.isfinite(scores)
    if bad.any():
        log.warning("%d degenerate pair(s) scored 0 during screening", int(bad.sum()))
        scores[bad] = 0.0
    return np.maximum(scores, 0.0)


@dataclass(frozen=True, eq=False)
class NeighborhoodMap:
    """Per-node relevance rankings.

    ``order[i]`` lists the other p - 1 nodes by descending score; ``scores``
    is the full symmetric p x p score matrix (diagonal unused).
    """

    order: np.ndarray
    scores: np.ndarray
    ns: int

    @property
    def p(self) -> int:
        return self.order.shape[0]

    def ranking(self, i: int) -> np.ndarray:
        check_index(i, self.p)
        return self.order[i]

    def ranked_scores(self, i: int) -> np.ndarray:
        return self.scores[i, self.order[i]]

    def screened(self, i: int, ns: Optional[int] = None) -> VariableSet:
        ns = self.ns if ns is None else ns
        return tuple(int(k) for k in self.ranking(i)[:ns])

    def to_tsv(self, path, names=None) -> None:
        names = names or [str(k) for k in range(self.p)]
        with open(path, "w") as fh:
            fh.write("node\trank\tneighbor\tscore\n")
            for i in range(self.p):
                for r, (k, s) in enumerate(zip(self.order[i], self.ranked_scores(i)), start=1):
                    fh.write(f"{names[i]}\t{r}\t{names[k]}\t{s:.10g}\n")


def rank_from_scores(scores: np.ndarray, ns: int) -> NeighborhoodMap:
    p = scores.shape[0]
    order = np.empty((p, p - 1), dtype=np.intp)
    for i in range(p):
        others = np.array([k for k in range(p) if k != i], dtype=np.intp)
        # stable: equal scores keep ascending index order
        order[i] = others[np.argsort(-scores[i, others], kind="stable")]
    return NeighborhoodMap(order, scores, ns)


def screen_all(
    data: DataMatrix,
    ns: int,
    workers: int = 1,
    backend: Optional[str] = None,
    whiten: Optional[bool] = None,
) -> NeighborhoodMap:
    """Score every pair of columns once and rank each node's neighbors."""
    validate(data)
    p = data.p
    if not 1 <= ns <= max(p - 2, 1):
        raise ValueError(f"ns must lie in [1, p - 2], got {ns} for p={p}")
    iu, ju = np.triu_indices(p, k=1)
    s = pair_scores(data.values, np.column_stack([iu, ju]), workers, backend, whiten)
    scores = np.zeros((p, p))
    scores[iu, ju] = s
    scores[ju, iu] = s
    return rank_from_scores(scores, ns)


def screen_response(
    y: np.ndarray,
    data: DataMatrix,
    workers: int = 1,
    backend: Optional[str] = None,
    whiten: Optional[bool] = None,
):
    """Rank all columns of ``data`` by their HZ-SIS score against ``y``.

    Returns (order, scores) with scores indexed by column.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    stacked = np.column_stack([data.values, y])
    p = data.p
    pairs = np.column_stack([np.full(p, p), np.arange(p)])
    scores = pair_scores(stacked, pairs, workers, backend, whiten)
    order = np.argsort(-scores, kind="stable")
    return order, scores


def reduced_set(nmap: NeighborhoodMap, j: int, i: int, ns: int) -> VariableSet:
    """Top ``ns`` of node j's ranking once i is deleted from it."""
    check_index(i, nmap.p)
    if i == j:
        raise ValueError("reduced_set needs i != j")
    ranking = nmap.ranking(j)
    return tuple(int(k) for k in ranking[ranking != i][:ns])
