"""Vectorised ensemble kernels for the acceptance experiments.

These evolve whole seed ensembles as numpy arrays with the same per-step
update rules as the scalar integrators in :mod:`hsle.sde` (slit updates for
marked points, predictable step sizes, capped drift); agreement between the
two routes is checked in the unit tests.
"""

from __future__ import annotations

import math

import numpy as np

from .sde import (DRIFT_CAP_FACTOR, DT_MIN_FACTOR, SWALLOW_REL_GAP, RngSeed)
from .specialfn import FOverFTable, FValueTable, HsleFunction, Z_SWITCH


def _gen(seed: int, stream: int = 0) -> np.random.Generator:
    return RngSeed(seed, stream).generator()


def track_update(v: np.ndarray, c: np.ndarray, dt, logd: np.ndarray):
    """Vectorised right-track slit update with reflection; returns contact
    mask.  ``dt`` may be scalar or per-seed."""
    u = v - c
    contact = u <= 0.0
    root = 2.0 * np.sqrt(dt)
    s = np.sqrt(u * u + 4.0 * dt)
    v[:] = np.where(contact, c + root, c + s)
    with np.errstate(divide="ignore", invalid="ignore"):
        logd += np.where(contact, -np.inf, np.log(np.maximum(u, 0.0) / s))
    return contact


class _SlePairDriver:
    """Plain-SLE ensemble with two tracked right boundary points, per-seed
    gap-adaptive steps (dt = dt_base min(1, gap^2), floored), and per-seed
    checkpoint recording.  Adaptivity keeps the Gaussian step well below the
    gap, so discrete jump-over of a track (continuum probability zero for
    kappa <= 4) is suppressed.
    """

    def __init__(self, kappa: float, x: float, y: float, dt_base: float,
                 checkpoints, n_seeds: int, seed: int):
        self.kappa = kappa
        self.dt_base = dt_base
        self.chk = np.asarray(checkpoints, dtype=float)
        self.n = n_seeds
        self.rng = _gen(seed)
        self.w = np.zeros(n_seeds)
        self.vx = np.full(n_seeds, float(x))
        self.vy = np.full(n_seeds, float(y))
        self.ldx = np.zeros(n_seeds)
        self.ldy = np.zeros(n_seeds)
        self.t = np.zeros(n_seeds)
        self.next_chk = np.zeros(n_seeds, dtype=int)
        self.active = np.ones(n_seeds, dtype=bool)
        self.swallowed = np.zeros(n_seeds, dtype=bool)
        # per-checkpoint records
        self.rec_j = np.zeros((self.chk.size, n_seeds))
        self.rec_z = np.zeros((self.chk.size, n_seeds))

    def run(self, max_iters: int = 5_000_000):
        # Driftless driver: no stability floor is needed, and any floor lets
        # deep Bessel excursions (P ~ depth^(1/3)) cross the track by brute
        # Gaussian jumps.  Keep only an underflow guard.
        dt_min = 1e-18 * self.dt_base
        for _ in range(max_iters):
            act = self.active
            if not act.any():
                return
            w = self.w[act]
            gx = self.vx[act] - w
            gy = self.vy[act] - w
            d = np.minimum(gx, gy)
            dt = np.clip(self.dt_base * d * d, dt_min, self.dt_base)
            target = self.chk[np.minimum(self.next_chk[act],
                                         self.chk.size - 1)]
            dt = np.minimum(dt, np.maximum(target - self.t[act], dt_min))
            c = w + np.sqrt(self.kappa * dt) \
                * self.rng.standard_normal(dt.size)
            idx = np.nonzero(act)[0]
            sw_new = np.zeros(dt.size, dtype=bool)
            for v, ld in ((self.vx, self.ldx), (self.vy, self.ldy)):
                u = v[idx] - c
                contact = u <= 0.0
                s = np.sqrt(u * u + 4.0 * dt)
                v[idx] = np.where(contact, c + 2.0 * np.sqrt(dt), c + s)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ld[idx] += np.where(contact, -np.inf,
                                        np.log(np.maximum(u, 0.0) / s))
                sw_new |= contact
            self.w[idx] = c
            self.t[idx] += dt
            self.swallowed[idx] |= sw_new
            # record at reached checkpoints (a swallowed seed records zeros
            # at all remaining checkpoints and retires)
            at_chk = self.t[idx] >= target - 1e-15
            hit = idx[at_chk | sw_new]
            if hit.size:
                chk_rows = self.next_chk[hit]
                good = chk_rows < self.chk.size
                self._record_at(hit[good], chk_rows[good], sw_new, idx)
            retire = idx[self.next_chk[idx] >= self.chk.size]
            self.active[retire] = False
        raise RuntimeError("SLE pair driver exceeded its iteration cap")

    def _record_at(self, cols, rows, sw_new, idx):
        mask = np.zeros(self.n, dtype=bool)
        mask[cols] = True
        diff = self.vy[cols] - self.vx[cols]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            j = np.exp(self.ldx[cols] + self.ldy[cols]) \
                / np.where(diff > 0.0, diff, np.inf) ** 2
            z = (self.vx[cols] - self.w[cols]) / (self.vy[cols] - self.w[cols])
        j = np.where(self.swallowed[cols], 0.0, j)
        z = np.clip(np.where(self.swallowed[cols], 0.0, z), 0.0, 1.0)
        swallowed_here = self.swallowed[cols]
        for k in range(cols.size):
            col = cols[k]
            if swallowed_here[k]:
                self.rec_j[rows[k]:, col] = 0.0
                self.rec_z[rows[k]:, col] = 0.0
                self.next_chk[col] = self.chk.size
            else:
                self.rec_j[rows[k], col] = j[k]
                self.rec_z[rows[k], col] = z[k]
                self.next_chk[col] += 1


def sle_pair_martingale(kappa: float, rho: float, x: float, y: float,
                        t_stop: float, dt: float, n_seeds: int, seed: int,
                        guard_n: int = 100):
    """Stopped values of M = Z^a J^b F(Z) along plain-SLE ensembles.

    Stops each path at min(t_stop, first time J or Z drops below 1/guard_n)
    and returns the frozen M values (one per seed).  The guard is applied on
    a dense checkpoint grid (the spec's T^n with n = guard_n).
    """
    fn = HsleFunction(kappa, rho)
    ftab = FValueTable(fn)
    a = (rho + 2.0) / kappa
    b = (rho + 2.0) * (rho + 6.0 - kappa) / (4.0 * kappa)
    n_chk = 50
    checkpoints = np.linspace(t_stop / n_chk, t_stop, n_chk)
    drv = _SlePairDriver(kappa, x, y, dt, checkpoints, n_seeds, seed)
    drv.run()
    lim = 1.0 / guard_n
    m_out = np.empty(n_seeds)
    for col in range(n_seeds):
        jcol = drv.rec_j[:, col]
        zcol = drv.rec_z[:, col]
        bad = np.nonzero((jcol < lim) | (zcol < lim))[0]
        k = int(bad[0]) if bad.size else n_chk - 1
        if jcol[k] <= 0.0:
            m_out[col] = 0.0
        else:
            m_out[col] = zcol[k] ** a * jcol[k] ** b * float(ftab(zcol[k]))
    return m_out


def sle_poisson_weight(kappa: float, x: float, y: float, b: float,
                       horizons: tuple[float, float], dt: float,
                       n_seeds: int, seed: int):
    """J_t^b and Z_t at two capacity horizons along plain-SLE ensembles (the
    second horizon is the J_infinity surrogate; the first feeds the
    Richardson check)."""
    t1, t2 = horizons
    drv = _SlePairDriver(kappa, x, y, dt, [t1, t2], n_seeds, seed)
    drv.run()
    with np.errstate(invalid="ignore"):
        jb1 = np.where(drv.rec_j[0] > 0.0, drv.rec_j[0] ** b, 0.0)
        jb2 = np.where(drv.rec_j[1] > 0.0, drv.rec_j[1] ** b, 0.0)
    return jb1, jb2, drv.rec_z[0], drv.rec_z[1]


class HsleEnsemble:
    """Per-seed adaptive integrator for the two-marked-point SDE, vectorised
    across seeds, with optional reference boundary points whose conformal
    distance to the tip is tracked (Koebe-style proximity monitor)."""

    def __init__(self, kappa: float, rho: float, x: float, y: float,
                 T: float, dt_base: float, n_seeds: int, seed: int,
                 refs: np.ndarray | None = None):
        self.kappa = kappa
        self.rho = rho
        self.x, self.y = x, y
        self.T = T
        self.dt_base = dt_base
        self.n = n_seeds
        self.rng = _gen(seed)
        self.fn = HsleFunction(kappa, rho)
        self.fof = FOverFTable(self.fn)
        self._fof_nodes_low = np.linspace(0.0, Z_SWITCH, self.fof.n_low)
        self._fof_vlow = np.asarray(self.fof._v_low)
        self._fof_logu = self.fof._u0 + self.fof._step_high * np.arange(
            self.fof.n_high)
        self._fof_vhigh = np.asarray(self.fof._v_high)
        self.w = np.zeros(n_seeds)
        self.vx = np.full(n_seeds, float(x))
        self.vy = np.full(n_seeds, float(y))
        self.t = np.zeros(n_seeds)
        self.active = np.ones(n_seeds, dtype=bool)
        self.tx_hit = np.zeros(n_seeds, dtype=bool)
        self.ty_hit = np.zeros(n_seeds, dtype=bool)
        if refs is not None:
            self.refs = np.tile(np.asarray(refs, dtype=float),
                                (n_seeds, 1))
            self.ref_logd = np.zeros_like(self.refs)
            self.min_dist = np.full(n_seeds, np.inf)
        else:
            self.refs = None

    def _fof_vec(self, z: np.ndarray) -> np.ndarray:
        if self.fn.is_degenerate:
            return np.zeros_like(z)
        out = np.empty_like(z)
        low = z <= Z_SWITCH
        out[low] = np.interp(z[low], self._fof_nodes_low, self._fof_vlow)
        hi = ~low
        if hi.any():
            # table spans gaps down to 1e-9; below that the edge value is
            # used (the (1-z) factor of the drift vanishes faster anyway)
            gap = np.clip(1.0 - z[hi], 1e-9, None)
            out[hi] = np.interp(np.log(gap), self._fof_logu, self._fof_vhigh)
        return out

    def step(self) -> bool:
        """Advance every active seed by one (per-seed) step; False when no
        seed remains active."""
        act = self.active
        if not act.any():
            return False
        w, vx, vy = self.w[act], self.vx[act], self.vy[act]
        gx = vx - w
        gy = vy - w
        d = np.minimum(np.where(self.tx_hit[act], np.inf, gx),
                       np.where(self.ty_hit[act], np.inf, gy))
        dt_min = DT_MIN_FACTOR * self.dt_base
        dt = np.maximum(self.dt_base * np.minimum(1.0, d * d), dt_min)
        dt = np.minimum(dt, self.T - self.t[act])
        z = np.clip(gx / gy, 0.0, 1.0)
        r2 = self.rho + 2.0
        drift = -r2 / gx + r2 / gy \
            - self.kappa * self._fof_vec(z) * (1.0 - z) / gy
        drift = np.where(self.ty_hit[act] & (self.kappa > 4.0), 0.0, drift)
        # capped drift: |drift| dt <= 4 sqrt(kappa dt), closed form
        with np.errstate(divide="ignore"):
            cap = DRIFT_CAP_FACTOR ** 2 * self.kappa / np.where(
                drift == 0.0, 1e-300, drift * drift)
        dt = np.maximum(np.minimum(dt, cap), dt_min)
        c = w + drift * dt + np.sqrt(self.kappa * dt) \
            * self.rng.standard_normal(dt.size)
        ux = vx - c
        uy = vy - c
        root = 2.0 * np.sqrt(dt)
        nvx = np.where(ux <= 0.0, c + root, c + np.sqrt(ux * ux + 4.0 * dt))
        nvy = np.where(uy <= 0.0, c + root, c + np.sqrt(uy * uy + 4.0 * dt))
        nvx = np.minimum(nvx, nvy)
        self.w[act] = c
        self.vx[act] = nvx
        self.vy[act] = nvy
        self.t[act] += dt
        if self.refs is not None:
            r = self.refs[act]
            ur = r - c[:, None]
            contact = ur <= 0.0
            s = np.sqrt(ur * ur + 4.0 * dt[:, None])
            self.refs[act] = np.where(contact, c[:, None] + root[:, None],
                                      c[:, None] + s)
            with np.errstate(divide="ignore", invalid="ignore"):
                self.ref_logd[act] += np.where(
                    contact, -np.inf, np.log(np.maximum(ur, 0.0) / s))
            with np.errstate(over="ignore", invalid="ignore"):
                dist = (self.refs[act] - c[:, None]) \
                    / np.exp(self.ref_logd[act])
            dist = np.where(np.isfinite(dist), dist, 0.0)
            self.min_dist[act] = np.minimum(self.min_dist[act],
                                            dist.min(axis=1))
        ty_new = (uy <= 0.0) | (nvy - c < SWALLOW_REL_GAP * self.y)
        tx_new = (ux <= 0.0) | (nvx - c < SWALLOW_REL_GAP * self.x)
        idx = np.nonzero(act)[0]
        self.ty_hit[idx[ty_new]] = True
        self.tx_hit[idx[tx_new]] = True
        done = self.t[act] >= self.T - 1e-15
        if self.kappa <= 4.0:
            done |= self.tx_hit[act] | self.ty_hit[act]
        self.active[idx[done]] = False
        return bool(self.active.any())

    def run(self, max_iters: int = 2_000_000) -> None:
        for _ in range(max_iters):
            if not self.step():
                return
        raise RuntimeError("ensemble failed to finish within the step cap")


def sle_conditioning_pair(kappa: float, t_eval: float, dt: float,
                          n_seeds: int, seed: int, gap_ref: float = 1.0):
    """Reweighting check data for the conditioned law:

    side A: plain SLE with tracked point at 1; returns (weights M_t/M_0 at
    t_eval, functional f) where f = 1{point 1 unswallowed and V-W > gap_ref}.
    """
    rng = _gen(seed, 0)
    n_steps = int(round(t_eval / dt))
    e = (kappa - 4.0) / kappa
    w = np.zeros(n_seeds)
    v = np.ones(n_seeds)
    swallowed = np.zeros(n_seeds, dtype=bool)
    m_at = np.zeros(n_seeds)
    sig = math.sqrt(kappa * dt)
    logd = np.zeros(n_seeds)
    for _ in range(n_steps):
        c = w + sig * rng.standard_normal(n_seeds)
        contact = track_update(v, c, dt, logd)
        swallowed |= contact
        w = c
    gap = v - w
    m_at = np.where(swallowed, 0.0, gap ** e)
    f = (~swallowed) & (gap > gap_ref)
    return m_at, f.astype(float)


def sle_rho_functional(kappa: float, rho: float, x0: float, t_eval: float,
                       dt_base: float, n_seeds: int, seed: int,
                       gap_ref: float = 1.0):
    """Direct SLE_kappa(rho) ensemble value of f = 1{V - W > gap_ref at
    t_eval}; per-seed adaptive steps as in the scalar integrator."""
    rng = _gen(seed, 1)
    w = np.zeros(n_seeds)
    v = np.full(n_seeds, float(x0))
    t = np.zeros(n_seeds)
    active = np.ones(n_seeds, dtype=bool)
    contact_state = v - w <= 0.0
    dt_min = DT_MIN_FACTOR * dt_base
    while active.any():
        act = active
        gap = v[act] - w[act]
        live_gap = np.where(contact_state[act], np.inf, gap)
        dt = np.maximum(dt_base * np.minimum(1.0, live_gap * live_gap), dt_min)
        dt = np.minimum(dt, t_eval - t[act])
        drift = np.where(contact_state[act],
                         -rho / (2.0 * np.sqrt(dt)),
                         rho / np.where(gap == 0.0, -1e-300, w[act] - v[act]))
        with np.errstate(divide="ignore"):
            cap = DRIFT_CAP_FACTOR ** 2 * kappa / np.where(
                drift == 0.0, 1e-300, drift * drift)
        dt = np.maximum(np.minimum(dt, cap), dt_min)
        c = w[act] + drift * dt + np.sqrt(kappa * dt) \
            * rng.standard_normal(dt.size)
        u = v[act] - c
        contact = u <= 0.0
        v[act] = np.where(contact, c + 2.0 * np.sqrt(dt),
                          c + np.sqrt(u * u + 4.0 * dt))
        w[act] = c
        t[act] += dt
        contact_state[act] = contact
        idx = np.nonzero(act)[0]
        done = t[act] >= t_eval - 1e-15
        active[idx[done]] = False
    return ((v - w) > gap_ref).astype(float)


def brownian_batch(kappa: float, T: float, n_steps: int, n_seeds: int,
                   seed: int, stream: int = 0):
    """(times, W) for an ensemble of sqrt(kappa) Brownian driving paths."""
    rng = _gen(seed, stream)
    dt = T / n_steps
    inc = math.sqrt(kappa * dt) * rng.standard_normal((n_seeds, n_steps))
    w = np.concatenate((np.zeros((n_seeds, 1)), np.cumsum(inc, axis=1)),
                       axis=1)
    return np.linspace(0.0, T, n_steps + 1), w
