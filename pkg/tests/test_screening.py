import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlgraph import screening
from nlgraph.benchgen import gen_example1
from nlgraph.core import DataMatrix
from nlgraph.errors import IndexOutOfRangeError, SingularCovarianceError
from nlgraph.screening import (
    NeighborhoodMap,
    hz_beta,
    hz_statistic,
    nonparanormal,
    nonparanormal_transform,
    pair_scores,
    rank_from_scores,
    reduced_set,
    screen_all,
    whiten,
)


def hz_brute(z):
    """Literal double-loop evaluation of the Henze-Zirkler statistic on whitened z."""
    n, d = z.shape
    b = 2**-0.5 * ((2 * d + 1) * n / 4.0) ** (1.0 / (d + 4))
    b2 = b * b
    pair = 0.0
    for k in range(n):
        for l in range(n):
            diff = z[k] - z[l]
            pair += np.exp(-b2 * float(diff @ diff) / 2.0)
    one = 0.0
    for k in range(n):
        one += np.exp(-b2 * float(z[k] @ z[k]) / (2.0 * (1.0 + b2)))
    return n * (pair / n**2 - 2.0 * (1.0 + b2) ** (-d / 2.0) * one / n
                + (1.0 + 2.0 * b2) ** (-d / 2.0))


def test_nonparanormal_small_column():
    out = nonparanormal(np.array([5.0, 1.0, 3.0]))
    np.testing.assert_allclose(out, [0.6744897501960817, -0.6744897501960817, 0.0], atol=1e-12)


def test_nonparanormal_transform_keeps_shape_and_names(rng):
    d = DataMatrix(rng.normal(size=(20, 3)), ("a", "b", "c"))
    t = nonparanormal_transform(d)
    assert t.values.shape == (20, 3) and t.names == ("a", "b", "c")
    np.testing.assert_array_equal(nonparanormal_transform(DataMatrix(np.exp(d.values), d.names)).values,
                                  t.values)


def test_nonparanormal_constant_column_is_zero():
    np.testing.assert_array_equal(nonparanormal(np.full(7, 2.5)), np.zeros(7))


def test_nonparanormal_is_idempotent(rng):
    x = rng.normal(size=(50, 3))
    x[:5, 0] = 1.0  # ties
    once = nonparanormal(x)
    np.testing.assert_array_equal(nonparanormal(once), once)


def test_hz_beta_bivariate():
    assert hz_beta(400, 2) == pytest.approx(2**-0.5 * (5 * 100.0) ** (1 / 6))


@pytest.mark.parametrize("seed", range(5))
def test_hz_statistic_matches_double_loop_4x2(seed):
    z = whiten(np.random.default_rng(seed).normal(size=(4, 2)))
    assert hz_statistic(z) == pytest.approx(max(hz_brute(z), 0.0), rel=1e-10)


def test_whiten_gives_identity_covariance(rng):
    z = rng.normal(size=(200, 3)) @ np.array([[1, 0.5, 0], [0, 1, 0.3], [0, 0, 2.0]])
    w = whiten(z)
    np.testing.assert_allclose(w.T @ w / len(w), np.eye(3), atol=1e-10)


def test_hz_statistic_collinear_raises(rng):
    x = rng.normal(size=50)
    with pytest.raises(SingularCovarianceError):
        hz_statistic(np.column_stack([x, x]))


def test_hz_statistic_normal_sample_is_below_null_95th_percentile():
    n = 1000
    null = [hz_statistic(np.random.default_rng(100 + r).normal(size=(n, 2))) for r in range(60)]
    t = hz_statistic(np.random.default_rng(7).normal(size=(n, 2)))
    assert t < np.quantile(null, 0.95)


def test_hz_statistic_detects_dependence(rng):
    x = rng.normal(size=400)
    indep = hz_statistic(np.column_stack([x, rng.normal(size=400)]))
    dep = hz_statistic(nonparanormal(np.column_stack([x, np.abs(x) + 0.1 * rng.normal(size=400)])))
    assert dep > 10 * indep


def test_pair_scores_match_hz_statistic(rng):
    v = rng.normal(size=(120, 3))
    v[:, 2] = v[:, 0] ** 2 + 0.3 * v[:, 1]
    scores = pair_scores(v, [(0, 1), (0, 2), (1, 2)])
    z = nonparanormal(v)
    for s, (a, b) in zip(scores, [(0, 1), (0, 2), (1, 2)]):
        assert s == pytest.approx(hz_statistic(z[:, [a, b]]), rel=1e-10)


def test_pair_scores_symmetric(rng):
    v = rng.normal(size=(150, 4))
    v[:, 1] += np.sin(2 * v[:, 0])
    pairs = list(itertools.permutations(range(4), 2))
    s = dict(zip(pairs, pair_scores(v, pairs)))
    for a, b in pairs:
        assert s[a, b] == pytest.approx(s[b, a], abs=1e-8)


def test_pair_scores_zero_for_constant_column(rng, caplog):
    v = rng.normal(size=(30, 3))
    v[:, 2] = 4.0
    s = pair_scores(v, [(0, 1), (0, 2)])
    assert s[1] == 0.0
    assert "degenerate" in caplog.text


def _fake_map():
    # node 0 ranks (1, 2, 3); node 3 ranks (0, 1, 2)
    scores = np.array([[0, 9, 8, 7], [9, 0, 1, 2], [8, 1, 0, 3], [7, 2, 3, 0]], dtype=float)
    return rank_from_scores(scores, 2)


def test_reduced_set_examples():
    m = _fake_map()
    assert tuple(m.ranking(3)) == (0, 2, 1)
    assert reduced_set(m, 3, 0, 2) == (2, 1)
    assert reduced_set(m, 0, 3, 2) == m.screened(0, 2)
    assert reduced_set(m, 0, 2, 2) == (1, 3)
    with pytest.raises(IndexOutOfRangeError):
        reduced_set(m, 0, 9, 2)
    with pytest.raises(ValueError):
        reduced_set(m, 1, 1, 2)


def test_rank_ties_keep_index_order():
    m = rank_from_scores(np.zeros((4, 4)), 1)
    assert tuple(m.ranking(2)) == (0, 1, 3)


def test_screen_all_structure(rng):
    data = DataMatrix.from_array(rng.normal(size=(80, 6)))
    m = screen_all(data, 3)
    for i in range(6):
        r = m.ranking(i)
        assert len(r) == 5 and i not in r
        assert np.all(np.diff(m.ranked_scores(i)) <= 0)
    with pytest.raises(ValueError):
        screen_all(data, 5)


def test_screen_all_invariant_to_monotone_maps(rng):
    v = rng.normal(size=(100, 5))
    v[:, 1] = v[:, 0] ** 3 + 0.2 * v[:, 1]
    base = screen_all(DataMatrix.from_array(v), 2)
    w = v.copy()
    w[:, 0] = np.exp(w[:, 0])
    w[:, 3] = np.arctan(w[:, 3]) * 5 - 1
    moved = screen_all(DataMatrix.from_array(w), 2)
    np.testing.assert_array_equal(base.order, moved.order)
    np.testing.assert_allclose(base.scores, moved.scores, rtol=1e-12)


def test_screen_all_cubic_pair_ranks_first():
    hits = 0
    for r in range(100):
        g = np.random.default_rng(r)
        x1 = g.normal(size=400)
        v = np.column_stack([x1, x1**3, g.normal(size=400)])
        hits += screen_all(DataMatrix.from_array(v), 1).screened(0) == (1,)
    assert hits >= 99


@pytest.mark.xfail(strict=True, reason=(
    "whitened HZ scores a near-linear link weakly; X3 -> X4 is mostly linear, "
    "so the rate is about 89/100 rather than 95/100"))
def test_screen_example1_node4_sees_its_parents():
    hits = 0
    for r in range(100):
        data, _ = gen_example1(400, 30, r)
        hits += {2, 5} <= set(screen_all(data, 5).screened(3))
    assert hits >= 95


def test_neighborhood_tsv(tmp_path):
    m = _fake_map()
    m.to_tsv(tmp_path / "rank.tsv", ["a", "b", "c", "d"])
    lines = (tmp_path / "rank.tsv").read_text().splitlines()
    assert lines[0] == "node\trank\tneighbor\tscore"
    assert lines[1].split("\t")[:3] == ["a", "1", "b"]
    assert len(lines) == 1 + 4 * 3


@given(st.integers(0, 2**32 - 1), st.integers(5, 40))
def test_hz_statistic_nonnegative_and_affine_invariant(seed, n):
    g = np.random.default_rng(seed)
    z = g.normal(size=(n, 2))
    a = np.array([[2.0, 0.3], [-0.4, 1.5]])
    t = hz_statistic(z)
    assert t >= 0
    assert hz_statistic(z @ a + 3.0) == pytest.approx(t, rel=1e-6, abs=1e-9)
