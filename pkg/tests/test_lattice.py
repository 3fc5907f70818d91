"""Lattice samplers against exact enumeration, plus crossing machinery."""

import math

import numpy as np
import pytest

from hsle.errors import BudgetExhausted, DomainError, TooLarge
from hsle.lattice import (ARCS, BETA_C, Bond, BondConfig, FkBoundaryCondition,
                          LatticeQuad, Spin, SpinBoundaryCondition, SpinConfig,
                          cluster_count, crossing_event, enumerate_fk,
                          enumerate_ising, frozen_arrays, heatbath_prob_up,
                          p_critical, pack_config, sample_conditioned,
                          sample_fk, sample_ising, spin_text_dump,
                          unpack_config)


def spin_key(cfg, free_sites):
    key = 0
    for k, (i, j) in enumerate(free_sites):
        key |= (cfg.spins[i, j] > 0) << k
    return key


def chain_tv(quad, bc, method, n_samples, seed, thin=2):
    free, _, probs = enumerate_ising(quad, bc, BETA_C)
    rng = np.random.Generator(np.random.Philox(key=seed))
    counts = np.zeros(len(probs))
    cfg = sample_ising(quad, bc, BETA_C, 64, rng, method=method)
    for _ in range(n_samples):
        cfg = sample_ising(quad, bc, BETA_C, thin, rng, method=method,
                           init=cfg.spins)
        counts[spin_key(cfg, free)] += 1
    emp = counts / counts.sum()
    return 0.5 * float(np.abs(emp - probs).sum()), probs


def test_single_free_spin_matches_logistic():
    # 3x3 Dobrushin: one free site whose neighbour field is 0
    quad = LatticeQuad(3, 3)
    bc = SpinBoundaryCondition.dobrushin()
    free, configs, probs = enumerate_ising(quad, bc, BETA_C)
    assert len(free) == 1
    frozen, values = frozen_arrays(quad, bc)
    i, j = free[0]
    field = sum(values[i2, j2] for (i2, j2) in
                ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)))
    p_up = heatbath_prob_up(field, BETA_C)
    up_idx = np.nonzero(configs[:, 0] > 0)[0][0]
    assert probs[up_idx] == pytest.approx(p_up, abs=1e-12)


def test_heatbath_ratio_matches_exact_conditional():
    # detailed balance: conditional of the exact measure = heat-bath rule
    quad = LatticeQuad(4, 4)
    bc = SpinBoundaryCondition.dobrushin()
    free, configs, probs = enumerate_ising(quad, bc, BETA_C)
    target = free[1]
    k = free.index(target)
    rng = np.random.default_rng(2)
    for _ in range(10):
        other = rng.integers(0, 2, size=len(free)) * 2 - 1
        sel = np.ones(len(probs), dtype=bool)
        for m, site in enumerate(free):
            if m != k:
                sel &= configs[:, m] == other[m]
        sub_p = probs[sel]
        sub_c = configs[sel]
        p_up_exact = sub_p[sub_c[:, k] > 0].sum() / sub_p.sum()
        frozen, values = frozen_arrays(quad, bc)
        s = values.astype(np.int8).copy()
        for m, site in enumerate(free):
            s[site] = other[m]
        i, j = target
        field = sum(int(s[i2, j2]) for (i2, j2) in
                    ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1))
                    if 0 <= i2 < 4 and 0 <= j2 < 4)
        assert p_up_exact == pytest.approx(heatbath_prob_up(field, BETA_C),
                                           abs=1e-12)


def test_beta_zero_uniform():
    quad = LatticeQuad(4, 4)
    bc = SpinBoundaryCondition()  # all free
    rng = np.random.Generator(np.random.Philox(key=5))
    counts = np.zeros(2)
    n = 4000
    for _ in range(n):
        cfg = sample_ising(quad, bc, 0.0, 1, rng, method="heatbath")
        counts[0] += (cfg.spins > 0).sum()
        counts[1] += (cfg.spins < 0).sum()
    frac = counts[0] / counts.sum()
    assert abs(frac - 0.5) < 3.0 / math.sqrt(counts.sum())


def test_low_temperature_orders():
    quad = LatticeQuad(5, 5)
    bc = SpinBoundaryCondition(bottom=Spin.PLUS, right=Spin.PLUS,
                               top=Spin.PLUS, left=Spin.PLUS)
    cfg = sample_ising(quad, bc, 10.0, 60, 3)
    assert cfg.spins.mean() > 0.99


@pytest.mark.parametrize("method", ["heatbath", "cluster"])
def test_glauber_and_sw_match_enumeration(method):
    quad = LatticeQuad(4, 4)
    bc = SpinBoundaryCondition.dobrushin()
    n = 8000
    tv, probs = chain_tv(quad, bc, method, n, seed=11)
    noise = 0.5 * float(np.sum(np.sqrt(probs * (1 - probs) / n)))
    assert tv < max(4.0 * noise, 0.05)


def test_free_bc_heatbath_matches_enumeration():
    quad = LatticeQuad(3, 3)
    bc = SpinBoundaryCondition(bottom=Spin.MINUS, right=Spin.FREE,
                               top=Spin.PLUS, left=Spin.FREE)
    n = 6000
    tv, probs = chain_tv(quad, bc, "heatbath", n, seed=13, thin=3)
    noise = 0.5 * float(np.sum(np.sqrt(probs * (1 - probs) / n)))
    assert tv < max(4.0 * noise, 0.05)


def test_fk_q1_is_bernoulli():
    quad = LatticeQuad(3, 3)
    bc = FkBoundaryCondition()
    p = 0.37
    rng = np.random.Generator(np.random.Philox(key=7))
    m = len(quad.edges())
    tot = 0
    n = 3000
    for _ in range(n):
        cfg = sample_fk(quad, bc, p, 1.0, 1, rng)
        tot += int(cfg.omega.sum())
    mean = tot / (n * m)
    assert abs(mean - p) < 3.0 * math.sqrt(p * (1 - p) / (n * m))


def test_fk_p_one_all_open():
    quad = LatticeQuad(3, 2)
    cfg = sample_fk(quad, FkBoundaryCondition.dobrushin(), 1.0, 2.0, 4, 9,
                    method="heatbath")
    assert np.all(cfg.omega == 1)


def test_fk_heatbath_matches_enumeration():
    quad = LatticeQuad(3, 2)
    bc = FkBoundaryCondition.dobrushin()
    p = p_critical(2.0)
    configs, probs = enumerate_fk(quad, bc, p, 2.0)
    rng = np.random.Generator(np.random.Philox(key=15))
    pw = 1 << np.arange(len(quad.edges()))
    counts = np.zeros(len(probs))
    n = 4000
    cfg = sample_fk(quad, bc, p, 2.0, 32, rng, method="heatbath")
    for _ in range(n):
        cfg = sample_fk(quad, bc, p, 2.0, 2, rng, method="heatbath",
                        init=cfg.omega)
        counts[int(np.dot(cfg.omega, pw))] += 1
    tv = 0.5 * float(np.abs(counts / n - probs).sum())
    noise = 0.5 * float(np.sum(np.sqrt(probs * (1 - probs) / n)))
    assert tv < max(4.0 * noise, 0.06)


def test_fk_es_matches_enumeration():
    quad = LatticeQuad(3, 2)
    bc = FkBoundaryCondition.dobrushin()
    p = p_critical(2.0)
    configs, probs = enumerate_fk(quad, bc, p, 2.0)
    rng = np.random.Generator(np.random.Philox(key=17))
    pw = 1 << np.arange(len(quad.edges()))
    counts = np.zeros(len(probs))
    n = 6000
    for _ in range(n):
        cfg = sample_fk(quad, bc, p, 2.0, 8, rng, method="es")
        counts[int(np.dot(cfg.omega, pw))] += 1
    tv = 0.5 * float(np.abs(counts / n - probs).sum())
    noise = 0.5 * float(np.sum(np.sqrt(probs * (1 - probs) / n)))
    assert tv < max(4.0 * noise, 0.05)


def test_single_edge_fk_with_wiring():
    # 2x2 quad, all arcs wired in one block: k(omega^xi) is 1 either way on
    # the ring, so each edge is open with probability p
    quad = LatticeQuad(2, 2)
    bc = FkBoundaryCondition(bottom=Bond.WIRED, right=Bond.WIRED,
                             top=Bond.WIRED, left=Bond.WIRED,
                             wiring=(("bottom", "right", "top", "left"),))
    p = 0.43
    configs, probs = enumerate_fk(quad, bc, p, 2.0)
    marg = np.zeros(4)
    for s in range(len(probs)):
        for e in range(4):
            if configs[s, e]:
                marg[e] += probs[s]
    assert np.allclose(marg, p, atol=1e-12)


def test_dual_relation():
    quad = LatticeQuad(4, 3)
    cfg = sample_fk(quad, FkBoundaryCondition.dobrushin(), 0.5, 2.0, 8, 21)
    assert np.all(cfg.dual() == 1 - cfg.omega)


def test_cluster_count_with_wiring():
    quad = LatticeQuad(2, 2)
    bc = FkBoundaryCondition.dobrushin()  # top+left wired as one block
    omega = np.zeros(4, dtype=np.uint8)
    # all closed; wired span = {(1,1),(1,0),(0,0)} counts once, plus (0,1)
    assert cluster_count(quad, bc, omega) == 2
    # one-edge FK graph check: P(open) = p/(p + (1-p) q^dk)
    p, q = 0.3, 2.0
    configs, probs = enumerate_fk(quad, bc, p, q)
    # edge 3 = vertical (0,1)-(1,1): its endpoints are NOT both in the block
    marg_open = sum(probs[s] for s in range(len(probs)) if configs[s, 3])
    assert 0.0 < marg_open < 1.0


def test_enumeration_too_large():
    with pytest.raises(TooLarge):
        enumerate_ising(LatticeQuad(8, 8), SpinBoundaryCondition(), BETA_C,
                        cap=1 << 12)


def test_crossing_trivials():
    quad = LatticeQuad(4, 4)
    bc = SpinBoundaryCondition.dobrushin()
    all_minus = SpinConfig(quad, bc, -np.ones((4, 4), dtype=np.int8))
    assert crossing_event(all_minus, "bottom", "top", -1)
    assert not crossing_event(all_minus, "bottom", "top", 1)
    ii, jj = np.meshgrid(range(4), range(4), indexing="ij")
    checker = np.where((ii + jj) % 2 == 0, 1, -1).astype(np.int8)
    cfg = SpinConfig(quad, bc, checker)
    assert not crossing_event(cfg, "bottom", "top", 1)
    assert not crossing_event(cfg, "bottom", "top", -1)


def test_bond_crossing_frequency_vs_enumeration():
    quad = LatticeQuad(3, 3)
    bc = FkBoundaryCondition()
    p = 0.5
    configs, probs = enumerate_fk(quad, bc, p, 1.0)
    want = 0.0
    for s in range(len(probs)):
        cfg = BondConfig(quad, bc, configs[s])
        if crossing_event(cfg, "bottom", "top", "open"):
            want += probs[s]
    rng = np.random.Generator(np.random.Philox(key=23))
    n = 3000
    hits = sum(crossing_event(sample_fk(quad, bc, p, 1.0, 1, rng),
                              "bottom", "top", "open") for _ in range(n))
    se = math.sqrt(want * (1 - want) / n)
    assert abs(hits / n - want) <= 3.0 * se


def test_dual_crossing_all_closed_and_open():
    quad = LatticeQuad(4, 3)
    bc = FkBoundaryCondition.alternating()
    m = len(quad.edges())
    closed = BondConfig(quad, bc, np.zeros(m, dtype=np.uint8))
    opened = BondConfig(quad, bc, np.ones(m, dtype=np.uint8))
    assert crossing_event(closed, "bottom", "top", "dual")
    assert crossing_event(closed, "bottom", "top", "dual2")
    assert not crossing_event(opened, "bottom", "top", "dual")


def test_dual2_needs_two_disjoint_paths():
    # a dual corridor at face-column jf opens when the horizontal primal
    # edges hor(i, jf) are all closed
    quad = LatticeQuad(4, 4)
    bc = FkBoundaryCondition.alternating()
    m = len(quad.edges())

    def with_corridors(cols):
        omega = np.ones(m, dtype=np.uint8)
        for jf in cols:
            for i in range(4):
                omega[i * 3 + jf] = 0
        return BondConfig(quad, bc, omega)

    one = with_corridors([1])
    assert crossing_event(one, "bottom", "top", "dual")
    assert not crossing_event(one, "bottom", "top", "dual2")
    two = with_corridors([0, 2])
    assert crossing_event(two, "bottom", "top", "dual2")


def test_domain_markov_exact():
    # conditional of the 4x4 exact measure on an outer ring equals the 2x2
    # enumeration with the induced boundary spins
    quad = LatticeQuad(4, 4)
    bc = SpinBoundaryCondition.dobrushin()
    free, configs, probs = enumerate_ising(quad, bc, BETA_C)
    assert len(free) == 4  # inner 2x2
    # all free sites form the inner block: conditioning is trivial here, so
    # instead condition a 5x5 free-interior quad on its interior ring
    quad5 = LatticeQuad(5, 5)
    free5, conf5, probs5 = enumerate_ising(quad5, bc, BETA_C)
    inner = [(2, 2)]
    ring = [s for s in free5 if s != (2, 2)]
    rng = np.random.default_rng(4)
    assign = {s: int(rng.integers(0, 2)) * 2 - 1 for s in ring}
    sel = np.ones(len(probs5), dtype=bool)
    for m, site in enumerate(free5):
        if site in assign:
            sel &= conf5[:, m] == assign[site]
    sub_p = probs5[sel] / probs5[sel].sum()
    k = free5.index((2, 2))
    p_up_cond = sub_p[conf5[sel, k] > 0].sum()
    field = sum(assign[(i, j)] for (i, j) in ((1, 2), (3, 2), (2, 1), (2, 3)))
    assert p_up_cond == pytest.approx(heatbath_prob_up(field, BETA_C),
                                      abs=1e-12)


def test_fkg_monotonicity_crossing():
    # flipping an arc Free -> Plus cannot decrease a plus-crossing probability
    quad = LatticeQuad(8, 8)
    n = 500
    probs = {}
    for label, xi in (("free", Spin.FREE), ("plus", Spin.PLUS)):
        bc = SpinBoundaryCondition.alternating(xi_left=xi)
        rng = np.random.Generator(np.random.Philox(key=29))
        state = sample_ising(quad, bc, BETA_C, 128, rng,
                             method="heatbath").spins
        hit = 0
        for _ in range(n):
            cfg = sample_ising(quad, bc, BETA_C, 4, rng, method="heatbath",
                               init=state)
            state = cfg.spins
            hit += crossing_event(cfg, "left", "right", 1)
        probs[label] = hit / n
    se = math.sqrt(2 * 0.25 / n) * 2  # conservative for the thinned chain
    assert probs["plus"] >= probs["free"] - 3.0 * se


def test_sample_conditioned_trivial_and_impossible():
    quad = LatticeQuad(6, 6)
    bc = SpinBoundaryCondition.alternating()
    cfg, attempts = sample_conditioned(quad, bc, lambda c: True, 10, 31,
                                       beta=BETA_C, sweeps=4)
    assert attempts == 1
    with pytest.raises(BudgetExhausted):
        sample_conditioned(
            quad, bc,
            lambda c: crossing_event(c, "bottom", "top", 1), 5, 31,
            beta=BETA_C, sweeps=2)  # plus crossing blocked by minus rows


def test_pack_unpack_roundtrip():
    quad = LatticeQuad(5, 4)
    bc = SpinBoundaryCondition.dobrushin()
    cfg = sample_ising(quad, bc, BETA_C, 8, 33)
    blob = pack_config(cfg)
    assert blob[:4] == b"HSL1"
    back = unpack_config(blob, bc)
    assert np.array_equal(back.spins, cfg.spins)
    fcfg = sample_fk(quad, FkBoundaryCondition.dobrushin(), 0.5, 2.0, 4, 35)
    back2 = unpack_config(pack_config(fcfg), fcfg.bc)
    assert np.array_equal(back2.omega, fcfg.omega)
    dump = spin_text_dump(cfg)
    assert dump.startswith("P1H 5 4")


def test_wilson_positive_acceptance_rate():
    # conditioned sampling acceptance is positive and stable across seeds
    from hsle.stats import wilson_interval
    quad = LatticeQuad(8, 8)
    bc = SpinBoundaryCondition.alternating()
    rates = []
    for seed in (41, 43):
        ok = 0
        n = 60
        rng = np.random.Generator(np.random.Philox(key=seed))
        for _ in range(n):
            cfg = sample_ising(quad, bc, BETA_C, 24, rng)
            ok += crossing_event(cfg, "bottom", "top", -1)
        lo, hi = wilson_interval(ok, n)
        rates.append((lo, hi))
        assert lo > 0.0
    assert max(rates[0][0], rates[1][0]) <= min(rates[0][1], rates[1][1]) \
        or abs(rates[0][0] - rates[1][0]) < 0.5
