"""Driving-path integrators: distributional checks and degeneracies."""

import math

import mpmath
import numpy as np
import pytest

from hsle.errors import DomainError
from hsle.kernels import HsleEnsemble
from hsle.sde import (HsleParams, RngSeed, SleParams, StopReason, drift_hsle,
                      simulate_hsle, simulate_sle, simulate_sle_rho)
from hsle.specialfn import FOverFTable, HsleFunction
from hsle.stats import ks_two_sample


def test_kappa_zero_is_zero_driving():
    d = simulate_sle(0.0, 1.0, 1e-2, RngSeed(1))
    assert np.all(d.w == 0.0)


def test_variance_matches_kappa_t():
    kappa, T = 3.0, 1.0
    wt = np.array([simulate_sle(kappa, T, 1e-2, RngSeed(2, s)).w[-1]
                   for s in range(2000)])
    var = wt.var(ddof=1)
    se = var * math.sqrt(2.0 / (len(wt) - 1))
    assert abs(var - kappa * T) <= 3.0 * se


def test_increment_independence():
    d = simulate_sle(2.0, 1.0, 1e-3, RngSeed(3))
    inc = np.diff(d.w)
    n = inc.size
    r1 = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(r1) <= 3.0 / math.sqrt(n)


def test_sle_rho_zero_weights_matches_sle():
    p = SleParams(kappa=3.0, left=[(-0.5, 0.0)], right=[(0.5, 0.0)],
                  T=0.5, dt_base=1e-3)
    a = np.array([simulate_sle_rho(p, RngSeed(5, s))[0].w[-1]
                  for s in range(400)])
    b = np.array([simulate_sle(3.0, 0.5, 1e-3, RngSeed(6, s)).w[-1]
                  for s in range(400)])
    _, pval = ks_two_sample(a, b)
    assert pval > 0.01


def test_continuation_threshold_immediate():
    p = SleParams(kappa=3.0, right=[(0.0, -2.5)], T=1.0, dt_base=1e-3)
    _, reason = simulate_sle_rho(p, RngSeed(7))
    assert reason is StopReason.CONTINUATION_THRESHOLD


def test_continuation_threshold_not_hit_above_minus_two():
    p = SleParams(kappa=3.0, right=[(0.0, -1.9)], T=0.3, dt_base=1e-3)
    d, reason = simulate_sle_rho(p, RngSeed(8))
    assert reason is StopReason.HORIZON
    assert np.all(d.tracks["xR1"] >= d.w)


def test_sle_rho_boundary_avoidance():
    # rho = kappa - 4 >= kappa/2 - 2: the curve stays off (1, infinity);
    # proximity measured by the conformal (Koebe-type) distance of the
    # tracked point u=1
    from hsle.loewner import transport_series
    kappa = 16.0 / 3.0
    p = SleParams(kappa=kappa, right=[(0.0, kappa - 4.0)], T=5.0,
                  dt_base=2e-3)
    hits = 0
    for s in range(30):
        d, _ = simulate_sle_rho(p, RngSeed(9, s))
        images, logd, swallowed = transport_series(d, [1.0])
        dist = (images[1:, 0] - d.w[1:]) / np.exp(logd[1:, 0])
        hits += bool(swallowed[0] is not None or (dist < 1e-2).any())
    assert hits == 0


def test_drift_hsle_rho_minus_two_zero():
    p = HsleParams(kappa=3.0, rho=-2.0, x=1.0, y=2.0)
    assert drift_hsle((0.0, 1.0, 2.0), p) == 0.0


def test_drift_hsle_kappa4_hand_value():
    p = HsleParams(kappa=4.0, rho=0.0, x=1.0, y=2.0)
    assert drift_hsle((0.0, 1.0, 2.0), p) == pytest.approx(-1.0, abs=1e-14)


def test_drift_hsle_series_oracle():
    # kappa=3, rho=0, state (0, 1, 2): independent mpmath evaluation
    p = HsleParams(kappa=3.0, rho=0.0, x=1.0, y=2.0)
    got = drift_hsle((0.0, 1.0, 2.0), p)
    with mpmath.workdps(30):
        F = lambda z: mpmath.hyp2f1(4.0 / 3.0, -1.0 / 3.0, 8.0 / 3.0, z)
        fp = mpmath.diff(F, 0.5)
        want = float(-2.0 / 1.0 + 2.0 / 2.0
                     - 3.0 * (fp / F(0.5)) * 0.5 / 2.0)
    assert got == pytest.approx(want, abs=1e-9)


def test_drift_hsle_ordering_check():
    p = HsleParams(kappa=3.0, rho=0.0, x=1.0, y=2.0)
    with pytest.raises(DomainError):
        drift_hsle((0.5, 0.2, 2.0), p)


def test_hsle_rho_minus_two_matches_sle():
    p = HsleParams(kappa=3.0, rho=-2.0, x=1.0, y=2.0, T=0.5, dt_base=1e-3)
    a = np.array([simulate_hsle(p, RngSeed(11, s)).path.w[-1]
                  for s in range(300)])
    b = np.array([simulate_sle(3.0, 0.5, 1e-3, RngSeed(12, s)).w[-1]
                  for s in range(300)])
    _, pval = ks_two_sample(a, b)
    assert pval > 0.01


def test_hsle_z_in_unit_interval():
    p = HsleParams(kappa=3.0, rho=0.0, x=1.0, y=2.0, T=2.0, dt_base=1e-3)
    run = simulate_hsle(p, RngSeed(13))
    z = run.z_values
    assert np.nanmin(z) >= 0.0
    assert np.nanmax(z) <= 1.0
    assert np.all(run.path.w <= run.path.tracks["x"] + 1e-12)
    assert np.all(run.path.tracks["x"] <= run.path.tracks["y"] + 1e-12)


def test_hsle_kappa_le_4_reaches_horizon():
    p = HsleParams(kappa=3.0, rho=0.0, x=1.0, y=2.0, T=1.0, dt_base=2e-3)
    for s in range(5):
        run = simulate_hsle(p, RngSeed(14, s))
        assert run.stop_reason is StopReason.HORIZON
        assert run.ty_index is None


def test_hsle_kappa_gt_4_swallows_y_and_continues():
    fof = FOverFTable(HsleFunction(16.0 / 3.0, 0.0))
    seen_ty = 0
    for s in range(12):
        run = simulate_hsle(HsleParams(kappa=16.0 / 3.0, rho=0.0, x=1.0,
                                       y=2.0, T=20.0, dt_base=1e-2),
                            RngSeed(15, s), fof=fof, max_steps=150_000)
        if run.ty_index is not None:
            seen_ty += 1
            assert run.stop_reason in (StopReason.HORIZON,
                                       StopReason.STEP_LIMIT)
    assert seen_ty >= 2  # swallowing happens for a decent fraction of seeds


def test_hsle_scaling_invariance():
    # law of lambda^{-1} W_{lambda^2 t} from marks (lambda x, lambda y)
    # matches W_t from (x, y)
    lam = 2.0
    a = np.array([simulate_hsle(
        HsleParams(kappa=3.0, rho=0.0, x=1.0, y=2.0, T=0.4, dt_base=1e-3),
        RngSeed(16, s)).path.w[-1] for s in range(300)])
    b = np.array([simulate_hsle(
        HsleParams(kappa=3.0, rho=0.0, x=lam, y=2.0 * lam,
                   T=0.4 * lam * lam, dt_base=1e-3 * lam * lam),
        RngSeed(17, s)).path.w[-1] / lam for s in range(300)])
    _, pval = ks_two_sample(a, b)
    assert pval > 0.01


def test_hsle_far_y_matches_sle_rho_plus2():
    # coupled-noise comparison against the one-force-point drift
    from hsle.harness import ExperimentSpec
    from hsle.experiments import run_degenerate
    spec = ExperimentSpec(exp_id="hsle-degenerate", seed=3)
    report, _ = run_degenerate(spec)
    assert report.details["coupled_path_dist"] < 1e-3
    assert report.details["kappa4_drift_diff"] < 1e-12
    assert report.details["rho_m2_drift"] == 0.0


def test_batched_ensemble_matches_scalar_integrator():
    # same law, two code paths: KS on W at the horizon
    kappa, rho, x, y, T = 3.0, 0.0, 1.0, 2.0, 0.5
    fof = FOverFTable(HsleFunction(kappa, rho))
    a = np.array([simulate_hsle(
        HsleParams(kappa=kappa, rho=rho, x=x, y=y, T=T, dt_base=2e-3),
        RngSeed(18, s), fof=fof).path.w[-1] for s in range(300)])
    ens = HsleEnsemble(kappa, rho, x, y, T=T, dt_base=2e-3, n_seeds=300,
                       seed=19)
    ens.run()
    _, pval = ks_two_sample(a, ens.w)
    assert pval > 0.01


def test_rng_streams_independent():
    a = RngSeed(42, 0).generator().standard_normal(1000)
    b = RngSeed(42, 1).generator().standard_normal(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 3.0 / math.sqrt(1000)
    c = RngSeed(42, 0).generator().standard_normal(1000)
    assert np.array_equal(a, c)  # reproducible


def test_params_validation():
    with pytest.raises(DomainError):
        SleParams(kappa=9.0)
    with pytest.raises(DomainError):
        SleParams(kappa=3.0, right=[(1.0, 0.0), (0.5, 0.0)])
    with pytest.raises(DomainError):
        HsleParams(kappa=3.0, rho=0.0, x=2.0, y=1.0)
