"""Acceptance suite: one test per criterion, run at the declared sizes and
tolerances through the experiment registry; prints a pass/fail line each.

The heavy experiments run at their acceptance-grade ensemble sizes; the
whole module is the long pole of the test suite by design.
"""

import pytest

from hsle.harness import ExperimentSpec, run

SEED = 20_240_101


def _execute(exp_id, n=0, params=None, seed=SEED):
    spec = ExperimentSpec(exp_id=exp_id, n=n, seed=seed,
                          params=params or {})
    report = run(spec)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"[{verdict}] {exp_id}: estimate={report.estimate:.6g} "
          f"statistic={report.statistic:.6g} p={report.p_value} "
          f"details={report.details}")
    return report


def test_criterion_01_hypergeometric_identities():
    r = _execute("hypergeom-identities")
    assert r.details["worst_limit_err"] < 1e-6
    assert r.details["worst_ode_residual"] < 1e-7
    assert r.passed


def test_criterion_02_loewner_analytics():
    r = _execute("loewner-analytics", n=20)
    assert r.details["tip_err"] < 1e-3
    assert r.details["sup_err_coarse"] <= 5e-2
    assert 0.35 <= r.details["refinement_ratio"] <= 0.65
    assert r.passed


def test_criterion_03_martingale_flatness():
    r = _execute("hsle-martingale", n=10_000)
    assert r.details["worst_dev_sigmas"] <= 3.0
    assert r.passed


def test_criterion_04_pair_measure_normalization():
    r = _execute("pair-normalization", n=10_000)
    assert r.details["dev_sigmas"] <= 3.0
    assert r.details["richardson_rel_change"] < 0.01
    assert r.passed


def test_criterion_05_hsle_avoidance():
    r = _execute("hsle-avoidance", n=1000)
    fr = r.details["fractions"]
    assert fr["0.0"] <= 0.01
    assert fr["-1.4"] <= 0.01
    assert fr["-3.0"] >= 0.50
    assert r.passed


def test_criterion_06_degenerations():
    r = _execute("hsle-degenerate")
    assert r.details["rho_m2_drift"] == 0.0
    assert r.details["kappa4_drift_diff"] < 1e-12
    assert r.details["coupled_path_dist"] < 1e-3
    assert r.passed


def test_criterion_07_reversibility():
    r = _execute("hsle-reversibility", n=2000)
    assert r.p_value > 0.01
    assert r.passed


def test_criterion_08_lattice_exactness():
    r = _execute("lattice-exactness")
    assert r.details["glauber_tv"] <= 0.01
    assert r.details["fk_tv"] <= 0.01
    assert r.details["es_tv"] < 1e-12
    assert r.passed


def test_criterion_09_ising_interface_scaling():
    r = _execute("ising-interface-scaling", n=2000)
    assert r.details["rel_err"] <= 0.15
    assert min(r.details["ks_p_values"]) > 0.01
    assert r.passed


def test_criterion_10_fk_interface_scaling():
    r = _execute("fk-interface-scaling", n=2000)
    assert r.details["rel_err"] <= 0.15
    assert min(r.details["ks_p_values"]) > 0.01
    assert r.passed


def test_criterion_11_conditioned_reweighting():
    r = _execute("conditioned-reweighting", n=10_000)
    assert r.details["dev_sigmas"] <= 3.0
    assert r.passed


def test_criterion_12_pair_chain_stationarity():
    r = _execute("pair-chain-stationarity")
    assert r.p_value > 0.01
    assert r.details["gelman_rubin"] < 1.1
    assert r.passed


def test_criterion_13_bc_monotonicity():
    r = _execute("bc-monotonicity")
    p_free = r.details["p_free"]
    p_plus = r.details["p_plus"]
    assert p_plus >= p_free - 3.0 * r.details["se"]
    assert r.passed
