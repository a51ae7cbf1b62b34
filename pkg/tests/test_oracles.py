import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rumigan import oracles as O
from rumigan.losses import DIVERGENCES, LsganLabels, RumiWeights

PP = np.array([0.5, 0.3, 0.2])
PN = np.array([0.2, 0.2, 0.6])
PG = np.array([0.3, 0.4, 0.3])
MAIN = LsganLabels(a=0.0, b_plus=2.0, b_minus=-1.0, c=1.5)


# -- frozen hand-derived values ------------------------------------------------------

def test_sgan_three_point_case():
    w = RumiWeights(alpha_plus=0.8, alpha_minus=-0.2)
    np.testing.assert_allclose(O.sgan_d_star(PP, PN, PG, w), [0.4 / 0.66, 0.4, 0.16 / 0.34], rtol=1e-14)
    cf = O.sgan_pg_star(PP, PN, w)
    np.testing.assert_allclose(cf.pg_star, [0.44, 0.28, 0.28], rtol=1e-14)
    assert math.isclose(cf.lambda_star, math.log(2), rel_tol=1e-15)
    assert cf.is_feasible
    np.testing.assert_allclose(cf.extras["lambda_stationarity"], math.log(2), rtol=1e-13)
    np.testing.assert_allclose(O.brute_force_d_star("sgan", PP, PN, PG, w), O.sgan_d_star(PP, PN, PG, w), atol=1e-9)
    bf = O.brute_force_pg_star("sgan", PP, PN, w)
    assert O.tv(bf.pg, cf.pg_star) <= 1e-9
    assert math.isclose(bf.lambda_est, math.log(2), abs_tol=1e-9)


def test_sgan_corner_recovers_positive():
    cf = O.sgan_pg_star(PP, PN, RumiWeights())
    np.testing.assert_array_equal(cf.pg_star, PP)
    assert math.isclose(cf.lambda_star, math.log(2))


def test_sgan_infeasible_draw_is_flagged():
    cf = O.sgan_pg_star(PP, PN, RumiWeights(alpha_plus=1.0, alpha_minus=0.9))
    assert cf.pg_star.min() < 0 and not cf.feasible["nonnegative"]
    with pytest.raises(ValueError):
        cf.grid([0.0, 1.0, 2.0])


def test_lsgan_discriminator_main_labels():
    d = O.lsgan_d_star(PP, PN, PG, RumiWeights(), MAIN)
    np.testing.assert_allclose(d, [0.8, 0.4 / 0.9, -0.2 / 1.1], rtol=1e-14)
    np.testing.assert_allclose(O.brute_force_d_star("lsgan", PP, PN, PG, RumiWeights(), MAIN), d, atol=1e-12)


def test_lsgan_etas_main_labels():
    # beta = (1, 1): eta+ = (2*(-2) - 1) / (-2 + 1) = 5, eta- = (2*1 + 2) / (-1) = -4
    eta_p, eta_m = O.lsgan_etas(RumiWeights(), MAIN)
    assert (eta_p, eta_m) == (5.0, -4.0)
    assert O.lsgan_lambda_star(RumiWeights(), MAIN) == (-1 / 3) ** 2 - 2.25
    assert O.lsgan_special_beta_plus(MAIN) == -1 / 3


def test_lsgan_special_case():
    rep = O.lsgan_special_case_report(trials=10, seed=0)
    assert rep["beta_plus"] == pytest.approx(1 / 3, abs=1e-15)
    assert rep["max_abs_eta_minus"] <= 1e-12
    assert rep["max_tv_to_positive"] <= 1e-9
    assert rep["reading"] == "automatic"


def test_midpoint_weights_printed_sum_to_one_but_differ_from_derived():
    labels = LsganLabels(a=0.5, b_plus=2.0, b_minus=-1.0, c=1.0)  # a at the label midpoint
    for bp, bm in [(1.0, 0.5), (0.3, 2.0), (2.0, 0.7)]:
        printed = O.lsgan_midpoint_weights_printed(bp, bm)
        assert math.isclose(sum(printed), 1.0, rel_tol=1e-14)
        w = RumiWeights(beta_plus=bp, beta_minus=bm)
        eta_p, eta_m = O.lsgan_etas(w, labels)
        derived = (bp * eta_p, bm * eta_m)
        assert math.isclose(sum(derived), 1.0, rel_tol=1e-12)
        np.testing.assert_allclose(derived, (bp * (1 + 2 * bm) / (bp - bm), -bm * (1 + 2 * bp) / (bp - bm)), rtol=1e-12)
        assert not np.allclose(printed, derived)


def test_lsgan_degenerate_weights():
    with pytest.raises(ZeroDivisionError):
        O.lsgan_etas(RumiWeights(beta_plus=1.0, beta_minus=1.0), LsganLabels(a=0.5, b_plus=2.0, b_minus=-1.0))


def test_pearson_rumi_weights():
    w = RumiWeights(gamma_plus=1.5, gamma_minus=0.5)
    pn = np.array([0.4, 0.3, 0.3])
    # q = 1.5 p+ - 0.5 p- = [0.55, 0.3, 0.15]; the optimum is q itself (unit mass)
    cf = O.fgan_pg_star(PP, pn, w, "pearson-chi2")
    np.testing.assert_allclose(cf.pg_star, [0.55, 0.3, 0.15], rtol=1e-12)
    np.testing.assert_allclose(O.fgan_d_star(PP, pn, PG, w, "pearson"), 2 * (np.array([0.55, 0.3, 0.15]) / PG - 1), rtol=1e-14)
    assert O.fgan_plugback_error(PP, pn, PG, w, "pearson") <= 1e-15
    bf = O.brute_force_pg_star("fgan", PP, pn, w, div="pearson")
    assert O.tv(bf.pg, cf.pg_star) <= 1e-9


def test_fgan_d_star_rejects_negative_ratio():
    w = RumiWeights(gamma_plus=1.5, gamma_minus=0.5)
    with pytest.raises(ValueError):
        O.fgan_d_star([0.1, 0.9], [0.9, 0.1], [0.5, 0.5], w, "kl")


# -- divergence table ---------------------------------------------------------------

@pytest.fixture(scope="module")
def table():
    return {row["divergence"]: row for row in O.fgan_table_report(seed=0)}


def test_table_plugback_and_recovery(table):
    assert set(table) == set(DIVERGENCES)
    for row in table.values():
        assert row["plugback_error"] <= 1e-8
        assert row["tv_to_positive"] <= 1e-3
        assert row["brute_tv_to_positive"] <= 1e-3


def test_table_multiplier_constants(table):
    # the stationarity value and the tabulated constant agree except for KL and SGAN
    assert math.isclose(table["kl"]["lambda_table"], math.e, rel_tol=1e-12)
    assert math.isclose(table["kl"]["lambda_stationarity"], 1.0, rel_tol=1e-12)
    assert math.isclose(table["sgan"]["lambda_table"], 0.5, rel_tol=1e-12)
    assert math.isclose(table["sgan"]["lambda_stationarity"], math.log(2), rel_tol=1e-12)
    for name in ("reverse-kl", "pearson", "hellinger"):
        assert math.isclose(table[name]["lambda_table"], table[name]["lambda_stationarity"], abs_tol=1e-9)


def test_table_sgan_row_sign(table):
    row = table["sgan"]
    assert row["sign_discrepancy"] is True
    assert row["printed_fraction_defined"] == 0.0
    assert row["printed_consistent_form_error"] <= 1e-8


# -- brute force machinery -----------------------------------------------------------

def test_golden_section_vectorized():
    got = O.golden_section(lambda x: (x - np.array([0.3, -2.0])) ** 2, [-5.0, -5.0], [5.0, 5.0])
    np.testing.assert_allclose(got, [0.3, -2.0], atol=1e-9)


def test_project_simplex_examples():
    np.testing.assert_allclose(O.project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5])
    np.testing.assert_allclose(O.project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(O.project_simplex(np.array([1.0, 1.0])), [0.5, 0.5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_project_simplex_properties(v):
    v = np.array(v)
    p = O.project_simplex(v)
    assert np.all(p >= 0) and math.isclose(p.sum(), 1.0, rel_tol=1e-12)
    # optimality: v - p is constant on the support and no larger off it
    r = v - p
    on = p > 0
    assert np.ptp(r[on]) <= 1e-9
    if np.any(~on):
        assert r[~on].max() <= r[on].min() + 1e-9


def test_kkt_audit_at_closed_form():
    w = RumiWeights(alpha_plus=0.8, alpha_minus=-0.2)
    cf = O.sgan_pg_star(PP, PN, w)
    audit = O.kkt_audit("sgan", cf.pg_star, PP, PN, w)
    assert abs(audit["lambda"] - math.log(2)) <= 1e-12
    assert audit["mu_max"] <= 1e-12 and audit["slackness_max"] <= 1e-12


def test_brute_force_errors():
    w = RumiWeights()
    with pytest.raises(ValueError):
        O.brute_force_pg_star("sgan", np.ones(40) / 40, np.ones(40) / 40, w)
    with pytest.raises(ValueError):
        O.brute_force_d_star("nope", PP, PN, PG, w)
    with pytest.raises(O.NonConvergence) as err:
        O.brute_force_pg_star("sgan", PP, PN, RumiWeights(alpha_plus=0.5), max_iter=2)
    assert err.value.last.shape == PP.shape


# -- randomized trials ---------------------------------------------------------------

@pytest.mark.parametrize("family", ["sgan", "lsgan", "fgan:kl", "fgan:reverse-kl", "fgan:hellinger"])
def test_trials_pass(family):
    rows = O.run_trials(family, trials=5, seed=11)
    assert all(set(r) == set(O.TRIAL_FIELDS) for r in rows)
    assert all(r["passed"] for r in rows), [r for r in rows if not r["passed"]]


def test_trials_are_seeded():
    a = O.run_trials("sgan", trials=2, seed=3)
    b = O.run_trials("sgan", trials=2, seed=3)
    assert a == b
    with pytest.raises(ValueError):
        O.run_trials("wgan")


def test_label_report():
    rows = {(r["labels"], r["support"]): r for r in O.lsgan_label_report(seed=0)}
    main = rows[("main", "disjoint")]
    assert (main["eta_plus"], main["eta_minus"]) == (5.0, -4.0)
    assert not main["closed_form_feasible"]
    # the numerical optimum still lands on the positive class
    assert main["brute_tv_to_positive"] <= 1e-3
    ds = rows[("dataset", "disjoint")]
    assert not ds["closed_form_feasible"] and ds["brute_tv_to_positive"] <= 1e-3
    for r in rows.values():
        assert r["brute_mu_max"] <= 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.0), st.floats(0.0, 1.0))
def test_sgan_closed_form_invariants(seed, ap, frac):
    rng = np.random.default_rng(seed)
    pp, pn, pg = (rng.dirichlet(np.ones(6)) for _ in range(3))
    am = ap - 1.0 + frac * (2.0 - ap)
    w = RumiWeights(alpha_plus=ap, alpha_minus=am)
    cf = O.sgan_pg_star(pp, pn, w)
    assert math.isclose(cf.pg_star.sum(), 1.0, rel_tol=1e-12)
    d = O.sgan_d_star(pp, pn, pg, w)
    if np.all(pg + am * pn > 0):
        assert np.all((d >= 0) & (d <= 1))
    if cf.is_feasible:
        np.testing.assert_allclose(cf.extras["lambda_stationarity"], cf.lambda_star, atol=1e-9)
