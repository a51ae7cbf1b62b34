import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rumigan import evaluation as E
from rumigan.distributions import Dataset, SplitSpec, make_split, sample


def test_frechet_exact_unit_gaussians():
    assert abs(E.frechet_from_moments([0.0], [[1.0]], [1.0], [[1.0]]) - 1.0) <= 1e-9


def test_frechet_closed_form_diagonal():
    # |mu|^2 + sum (sqrt(a) - sqrt(b))^2 for commuting covariances
    got = E.frechet_from_moments([0, 0], np.diag([4.0, 1.0]), [3, 4], np.diag([1.0, 9.0]), reg=0.0)
    assert math.isclose(got, 25 + 1 + 4, rel_tol=1e-12)


def test_frechet_matches_scipy_sqrtm():
    from scipy.linalg import sqrtm

    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    c1, c2 = a @ a.T, b @ b.T
    mu1, mu2 = rng.normal(size=4), rng.normal(size=4)
    ref = np.sum((mu1 - mu2) ** 2) + np.trace(c1 + c2 - 2 * np.real(sqrtm(c1 @ c2)))
    assert math.isclose(E.frechet_from_moments(mu1, c1, mu2, c2, reg=0.0), ref, rel_tol=1e-9)


def test_frechet_identical_samples_is_zero():
    x = np.random.default_rng(1).normal(size=(500, 3))
    assert E.frechet_distance(x, x) <= 1e-7


def test_frechet_errors():
    with pytest.raises(ValueError):
        E.moments(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        E.frechet_from_moments([0.0], [[1.0]], [0.0, 1.0], np.eye(2))


def test_pr_self_comparison():
    x = np.random.default_rng(2).normal(size=(10_000, 1))
    y = np.random.default_rng(3).normal(size=(10_000, 1))
    curve = E.pr_curve(x, y)
    assert curve.max_f1 >= 0.95


def test_pr_disjoint_support():
    x = np.random.default_rng(4).normal(-5, 0.5, size=(10_000, 1))
    y = np.random.default_rng(5).normal(5, 0.5, size=(10_000, 1))
    curve = E.pr_curve(x, y)
    assert curve.precision.max() <= 0.05 and curve.recall.max() <= 0.05


def test_pr_from_histograms_by_hand():
    curve = E.pr_from_histograms([0.5, 0.5, 0.0], [0.0, 0.5, 0.5], num_angles=1001)
    # the mid angle (slope 1) gives sum(min(p, q)) = 0.5 for both
    assert math.isclose(curve.precision[500], 0.5, rel_tol=1e-9)
    assert math.isclose(curve.recall[500], 0.5, rel_tol=1e-9)
    assert curve.max_f1 == pytest.approx(0.5)
    assert len(curve.points()) == 1001


def test_pr_curve_edges_and_queries():
    curve = E.pr_from_histograms([0.3, 0.7], [0.3, 0.7])
    assert curve.precision[0] < 1e-9 and curve.recall[-1] < 1e-9
    assert curve.precision_at_recall(0.1) == pytest.approx(1.0)
    assert curve.recall_at_precision(0.9) == pytest.approx(1.0)
    assert E.pr_from_histograms([1.0, 0.0], [0.0, 1.0]).precision_at_recall(0.5) == 0.0


def test_cluster_histogram_errors():
    with pytest.raises(ValueError):
        E.cluster_histograms(np.zeros((0, 1)), np.ones((5, 1)))
    with pytest.raises(ValueError):
        E.cluster_histograms(np.ones((5, 1)), np.ones((5, 1)))
    p, q = E.cluster_histograms(np.zeros((5, 1)), np.ones((5, 1)))
    assert sorted(p.tolist()) == [0.0, 1.0] and sorted(q.tolist()) == [0.0, 1.0]


def test_region_mass():
    sp = make_split("disjoint-1d")
    pos, neg, amb = E.region_mass(np.array([-4.0, -1.5, 1.5, 4.0, 0.0]), sp)
    assert (pos, neg) == (0.4, 0.4) and math.isclose(amb, 0.2)
    ds = SplitSpec(Dataset(np.zeros((3, 1)), 1), Dataset(np.ones((3, 1)), 1), "disjoint")
    with pytest.raises(TypeError):
        E.region_mass(np.zeros((2, 1)), ds)


def test_evaluate_report():
    sp = make_split("disjoint-1d")
    ref = sample(sp.positive, 2000, 0)
    gen = sample(sp.positive, 2000, 1)
    rep = E.evaluate(gen, ref, sp, step=7)
    row = rep.row()
    assert tuple(row) == E.METRIC_COLUMNS
    assert row["step"] == 7 and row["frechet"] < 0.05 and row["neg_mass"] == 0.0
    assert row["max_f1"] > 0.9 and len(rep.pr_curve) == E.DEFAULT_ANGLES
    ds = SplitSpec(Dataset(ref, 1), Dataset(ref + 10, 1), "disjoint")
    assert math.isnan(E.evaluate(gen, ref, ds).row()["neg_mass"])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_pr_curve_bounds(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
    c = E.pr_from_histograms(p, q, num_angles=101)
    assert np.all((c.precision >= 0) & (c.precision <= 1) & (c.recall >= 0) & (c.recall <= 1))
    assert np.all(np.diff(c.precision) >= -1e-12) and np.all(np.diff(c.recall) <= 1e-12)
    # swapping roles swaps precision and recall at mirrored angles
    s = E.pr_from_histograms(q, p, num_angles=101)
    np.testing.assert_allclose(s.precision, c.recall[::-1], atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_frechet_symmetry_and_nonnegativity(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    m1, m2 = rng.normal(size=3), rng.normal(size=3)
    d1 = E.frechet_from_moments(m1, a @ a.T, m2, b @ b.T)
    d2 = E.frechet_from_moments(m2, b @ b.T, m1, a @ a.T)
    assert d1 >= 0 and math.isclose(d1, d2, rel_tol=1e-8, abs_tol=1e-10)
