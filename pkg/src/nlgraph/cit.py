"""Nonparametric conditional independence tests.

``kernel_cit`` is a randomized conditional correlation test: random Fourier
features of x, y and the conditioning block z, ridge-residualization of the
x and y features on the z features, and a Frobenius-norm cross-covariance
statistic whose null is a weighted sum of chi-square(1) variables.
``permutation_cit`` computes the same statistic but calibrates it by
permuting y within strata of z.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist
from scipy.stats import chi2

from .errors import (
    AllWeightsZeroError,
    SingularRegularizedGramError,
    TooFewSamplesError,
)
from .screening import nonparanormal


@dataclass(frozen=True)
class CitConfig:
    num_features_xy: int = 25
    num_features_z: int = 100
    ridge: float = 1e-3
    num_permutations: int = 499
    bins_per_dim: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.num_features_xy < 1 or self.num_features_z < 1:
            raise ValueError("feature counts must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if self.bins_per_dim < 1:
            raise ValueError("bins_per_dim must be positive")


@dataclass(frozen=True)
class CitResult:
    statistic: float
    p_value: float
    cond_dim: int


def median_bandwidth(m: np.ndarray, max_rows: int = 500) -> float:
    """Median pairwise Euclidean distance over the first ``max_rows`` rows."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    d = pdist(m[:max_rows])
    if d.size == 0:
        return 1.0
    med = float(np.median(d))
    return med if med > 0 else 1.0


@lru_cache(maxsize=4096)
def _bandwidth_1d(raw: bytes) -> float:
    return median_bandwidth(np.frombuffer(raw, dtype=np.float64))


def _column_bandwidth(v: np.ndarray) -> float:
    # columns recur across many tests in a graph search, so memoize by content
    return _bandwidth_1d(np.ascontiguousarray(v[:500]).tobytes())


def random_fourier_features(m: np.ndarray, k: int, bandwidth: float, seed) -> np.ndarray:
    """sqrt(2/k) cos(W x / bandwidth + b) approximating a Gaussian kernel."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if k < 1 or bandwidth <= 0:
        raise ValueError("need k >= 1 and bandwidth > 0")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((m.shape[1], k))
    b = rng.uniform(0.0, 2.0 * np.pi, size=k)
    return np.sqrt(2.0 / k) * np.cos(m @ w / bandwidth + b)


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).ravel()
    w = np.where(w > 0, w, 0.0)
    if not np.any(w > 0):
        raise AllWeightsZeroError("weighted chi-square null has no positive weight")
    return w


def _hbe_from_cumulants(k1: float, k2: float, k3: float, s: float) -> float:
    if k3 <= 0 or k2 <= 0:
        # degenerate spread: the null is a point mass at k1
        return 1.0 if s <= k1 else 0.0
    b = k3 / (4.0 * k2)
    f = k2 / (2.0 * b * b)
    a = k1 - b * f
    q = (s - a) / b
    if q <= 0:
        return 1.0
    return float(min(1.0, max(0.0, chi2.sf(q, f))))


def hbe_pvalue(weights, s: float) -> float:
    """Upper tail P(sum_m w_m chi2_1 > s) by three-cumulant moment matching."""
    w = _check_weights(weights)
    return _hbe_from_cumulants(w.sum(), 2.0 * np.sum(w**2), 8.0 * np.sum(w**3), float(s))


def _product_power_sums(ex: np.ndarray, ey: np.ndarray):
    """Power sums (tr C, tr C^2, tr C^3) of C = cov(vec(ex_k outer ey_k)).

    Works in whichever of the n-dim Gram space or the kx*ky feature space is
    smaller; the nonzero spectra of both coincide.
    """
    n, kx = ex.shape
    ky = ey.shape[1]
    if kx * ky <= n:
        prod = (ex[:, :, None] * ey[:, None, :]).reshape(n, kx * ky)
        prod -= prod.mean(axis=0)
        c = prod.T @ prod / n
    else:
        g = (ex @ ex.T) * (ey @ ey.T)
        g -= g.mean(axis=0)
        g -= g.mean(axis=1)[:, None]
        c = g / n
    s1 = float(np.trace(c))
    s2 = float(np.sum(c * c))
    s3 = float(np.sum((c @ c) * c))
    return s1, s2, s3


def _standardize(f: np.ndarray) -> np.ndarray:
    # unit-variance columns keep low-variance features from being drowned out
    f = f - f.mean(axis=0)
    return f / np.maximum(f.std(axis=0), 1e-12)


def _residual_dof_scale(fz, proj, gram, ridge) -> float:
    """Variance inflation of the cross-covariance caused by residualization.

    Residuals are M F with M = I - H, H the ridge hat matrix. Under the null
    the statistic has mean proportional to tr(M^4), while the row-wise product
    covariance only sees sum_k (M^2)_kk^2; the ratio rescales the null weights.
    For an exact projection on q features it equals n / (n - q).
    """
    n, q = fz.shape
    h_diag = np.einsum("ki,ik->k", fz, proj)
    h2_diag = np.einsum("ki,ki->k", fz @ (proj @ proj.T), fz)
    m2_diag = 1.0 - 2.0 * h_diag + h2_diag
    shrink = 1.0 - ridge / np.maximum(linalg.eigvalsh(gram), 1e-300)
    tr_m4 = (n - q) + np.sum((1.0 - shrink) ** 4)
    return float(tr_m4 / np.sum(m2_diag**2))


class _Features:
    """Centered feature blocks and the ridge projection for one test."""

    def __init__(self, x, y, z, cfg: CitConfig, transformed: bool = False):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        n = x.shape[0]
        z = np.asarray(z, dtype=np.float64).reshape(n, -1)
        if not transformed:
            x, y = nonparanormal(x), nonparanormal(y)
            if z.shape[1]:
                z = nonparanormal(z)
        self.n = n
        self.d = z.shape[1]
        sx, sy, sz = np.random.SeedSequence(cfg.seed).spawn(3)
        fx = random_fourier_features(x, cfg.num_features_xy, _column_bandwidth(x), sx)
        fy = random_fourier_features(y, cfg.num_features_xy, _column_bandwidth(y), sy)
        self.fx = _standardize(fx)
        self.fy = _standardize(fy)
        self.null_scale = 1.0
        if self.d == 0:
            self.fz = None
            self.proj = None
            return
        fz = random_fourier_features(z, cfg.num_features_z, median_bandwidth(z), sz)
        self.fz = fz = _standardize(fz)
        gram = fz.T @ fz / n + cfg.ridge * np.eye(fz.shape[1])
        try:
            cf = linalg.cho_factor(gram, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularRegularizedGramError(
                f"regularized feature Gram is singular; increase ridge above {cfg.ridge}"
            ) from exc
        # (Fz'Fz/n + ridge I)^-1 Fz'/n, so residual = F - Fz @ (proj @ F)
        self.proj = linalg.cho_solve(cf, fz.T / n, check_finite=False)
        self.null_scale = _residual_dof_scale(fz, self.proj, gram, cfg.ridge)

    def residual(self, f: np.ndarray) -> np.ndarray:
        if self.fz is None:
            return f
        return f - self.fz @ (self.proj @ f)


def _statistic(ex: np.ndarray, ey: np.ndarray) -> float:
    n = ex.shape[0]
    cxy = ex.T @ ey / n
    return float(n * np.sum(cxy * cxy))


def kernel_cit(x, y, z, cfg: Optional[CitConfig] = None, transformed: bool = False) -> CitResult:
    """Random-feature kernel test of x independent of y given z (z may have 0 columns).

    Pass ``transformed=True`` when every input column is already a nonparanormal
    score; the transform is idempotent, so this only skips redundant ranking.
    """
    cfg = cfg or CitConfig()
    feats = _Features(x, y, z, cfg, transformed)
    ex = feats.residual(feats.fx)
    ey = feats.residual(feats.fy)
    stat = _statistic(ex, ey)
    s1, s2, s3 = _product_power_sums(ex, ey)
    if s1 <= 0:
        raise AllWeightsZeroError("residual feature products have zero variance")
    c = feats.null_scale
    p = _hbe_from_cumulants(c * s1, 2.0 * c**2 * s2, 8.0 * c**3 * s3, stat)
    return CitResult(stat, p, feats.d)


def _strata(z: np.ndarray, bins_per_dim: int, min_count: int = 5) -> np.ndarray:
    """Label rows by marginal-quantile cells of z, merging cells below min_count."""
    n, d = z.shape
    if d == 0:
        return np.zeros(n, dtype=np.intp)
    bins = max(1, min(bins_per_dim, int((n / min_count) ** (1.0 / d))))
    codes = np.zeros(n, dtype=np.intp)
    for c in range(d):
        ranks = np.argsort(np.argsort(z[:, c], kind="stable"), kind="stable")
        codes = codes * bins + ranks * bins // n
    cells, inverse, counts = np.unique(codes, return_inverse=True, return_counts=True)
    # walk cells in code order, closing a group once it holds min_count rows
    group_of_cell = np.empty(len(cells), dtype=np.intp)
    group, filled = 0, 0
    for t, cnt in enumerate(counts):
        group_of_cell[t] = group
        filled += cnt
        if filled >= min_count:
            group += 1
            filled = 0
    if filled and group > 0:
        group_of_cell[group_of_cell == group] = group - 1
    return group_of_cell[inverse.ravel()]


def permutation_cit(x, y, z, cfg: Optional[CitConfig] = None, transformed: bool = False) -> CitResult:
    """Kernel CIT statistic calibrated by permuting y within strata of z.

    The rows permuted are y's z-residualized features, so the permuted
    copies keep the residual structure the observed statistic sees.
    """
    cfg = cfg or CitConfig()
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if n < 50:
        raise TooFewSamplesError(f"permutation test needs n >= 50, got {n}")
    z = np.asarray(z, dtype=np.float64).reshape(n, -1)
    feats = _Features(x, y, z, cfg, transformed)
    ex = feats.residual(feats.fx)
    ey = feats.residual(feats.fy)
    stat0 = _statistic(ex, ey)
    ex_t = ex.T.copy()

    labels = _strata(z, cfg.bins_per_dim)
    members = [np.flatnonzero(labels == g) for g in np.unique(labels)]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x9E3779B9]))
    exceed = 0
    idx = np.arange(n)
    for _ in range(cfg.num_permutations):
        for rows in members:
            idx[rows] = rows[rng.permutation(len(rows))]
        cxy = ex_t @ ey[idx] / n
        if n * np.sum(cxy * cxy) >= stat0:
            exceed += 1
    p = (1.0 + exceed) / (1.0 + cfg.num_permutations)
    return CitResult(stat0, p, feats.d)
