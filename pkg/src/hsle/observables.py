"""Martingale observables, restriction exponents, Poisson-kernel functionals
and the conditioning weight used for importance reweighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, SwallowedError
from .loewner import DrivingPath, HalfPlaneCurve, HullMapState, transport_series
from .specialfn import FValueTable, HsleFunction

_F_TABLES: dict[tuple[float, float], FValueTable] = {}


def f_value_table(kappa: float, rho: float) -> FValueTable:
    key = (kappa, rho)
    if key not in _F_TABLES:
        _F_TABLES[key] = FValueTable(HsleFunction(kappa, rho))
    return _F_TABLES[key]

# Guard for martingale checks: stop at the first time J or Z drops below 1/n.
DEFAULT_GUARD_N = 100


@dataclass(frozen=True)
class HsleMartingaleSpec:
    """Exponents of the two-marked-point martingale M = Z^a J^b F(Z)."""

    kappa: float
    rho: float
    x: float
    y: float

    def __post_init__(self):
        if not 0.0 < self.x < self.y:
            raise DomainError("need 0 < x < y")

    @property
    def a(self) -> float:
        return (self.rho + 2.0) / self.kappa

    @property
    def b(self) -> float:
        return (self.rho + 2.0) * (self.rho + 6.0 - self.kappa) / (4.0 * self.kappa)

    def function(self) -> HsleFunction:
        return HsleFunction(self.kappa, self.rho)

    def m0(self) -> float:
        """M at time zero: (x/y)^a (y-x)^(-2b) F(x/y)."""
        fn = self.function()
        z0 = self.x / self.y
        return z0 ** self.a * (self.y - self.x) ** (-2.0 * self.b) * fn.value(z0)


@dataclass(frozen=True)
class RestrictionExponents:
    """Exponent bundle of the domain-restriction martingale."""

    kappa: float
    rho: float

    @property
    def b1(self) -> float:
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def b2(self) -> float:
        return self.rho * (self.rho + 4.0 - self.kappa) / (4.0 * self.kappa)

    @property
    def b3(self) -> float:
        return self.rho / self.kappa

    @property
    def c(self) -> float:
        return (3.0 * self.kappa - 8.0) * (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def b(self) -> float:
        return self.b1 + self.b2 + self.b3


def poisson_kernel_series(d: DrivingPath, x: float, y: float):
    """Per-step (J_t, Z_t) along a driving path for marked points (x, y).

    J_t = g'(x) g'(y) / (g(y) - g(x))^2 and Z_t = (g(x) - W)/(g(y) - W),
    assembled from the analytic slit-map transport.  Entries are 0 after
    either point is swallowed.
    """
    images, logd, swallowed = transport_series(d, [x, y])
    gx, gy = images[:, 0], images[:, 1]
    diff = gy - gx
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        j = np.exp(logd[:, 0] + logd[:, 1]) / np.where(diff == 0.0, np.inf, diff) ** 2
        z = (gx - d.w) / np.where(gy == d.w, np.inf, gy - d.w)
    cut = min([s for s in swallowed if s is not None], default=None)
    if cut is not None:
        j[cut:] = 0.0
        z[cut:] = 0.0
    return j, z, cut


def mart_hsle_path(d: DrivingPath, spec: HsleMartingaleSpec) -> np.ndarray:
    """M_t = Z_t^a J_t^b F(Z_t) along a driving path carrying (x, y) tracks.

    The path must have been produced with tracked marked points named
    'x' and 'y' (or none: the points are transported from scratch).
    Indicator-zero after the swallowing of x.
    """
    if "x" not in d.tracks or "y" not in d.tracks:
        raise DomainError("driving path lacks (x, y) tracks")
    j, z, _ = poisson_kernel_series(d, float(d.tracks["x"][0]),
                                    float(d.tracks["y"][0]))
    ftab = f_value_table(spec.kappa, spec.rho)
    m = np.zeros_like(j)
    live = j > 0.0
    zc = np.clip(z[live], 0.0, 1.0)
    m[live] = zc ** spec.a * j[live] ** spec.b * ftab(zc)
    return m


def mart_sle_rho_path(d: DrivingPath, kappa: float, rho: float, nu: float,
                      x: float, y: float) -> np.ndarray:
    """Five-factor two-force-point local martingale along a driving path:

    g'(x)^(rho(rho+4-kappa)/(4 kappa)) (g(x)-W)^(rho/kappa)
    g'(y)^(nu(nu+4-kappa)/(4 kappa))   (g(y)-W)^(nu/kappa)
    (g(y)-g(x))^(rho nu / (2 kappa)),  zero after x is swallowed.
    """
    if not 0.0 < x < y:
        raise DomainError("need 0 < x < y")
    images, logd, swallowed = transport_series(d, [x, y])
    gx, gy = images[:, 0], images[:, 1]
    e_dx = rho * (rho + 4.0 - kappa) / (4.0 * kappa)
    e_dy = nu * (nu + 4.0 - kappa) / (4.0 * kappa)
    cut = min([s for s in swallowed if s is not None], default=None)
    n = gx.size
    m = np.zeros(n)
    upto = n if cut is None else cut
    with np.errstate(divide="ignore", invalid="ignore"):
        logm = (e_dx * logd[:upto, 0] + e_dy * logd[:upto, 1]
                + (rho / kappa) * np.log(gx[:upto] - d.w[:upto])
                + (nu / kappa) * np.log(gy[:upto] - d.w[:upto])
                + (rho * nu / (2.0 * kappa)) * np.log(gy[:upto] - gx[:upto]))
    m[:upto] = np.exp(logm)
    return m


def poisson_kernel_weight(curve: HalfPlaneCurve, x: float, y: float,
                          b: float) -> float:
    """J_inf^b with J_inf = g'(x) g'(y)/(g(x) - g(y))^2 from the full zipper."""
    if curve.points.size == 1:
        return (1.0 / (x - y) ** 2) ** b
    state = HullMapState.from_curve(curve)
    gx, dx, sx = state.transport_real(x)
    gy, dy, sy = state.transport_real(y)
    if sx is not None or sy is not None:
        raise SwallowedError("marked point absorbed by the curve")
    j = dx * dy / (gx - gy) ** 2
    return j ** b


def schwarzian(jet_fn: Callable[[float], tuple[float, float, float, float]],
               x: float) -> float:
    """S f = f'''/f' - (3/2)(f''/f')^2 from an analytic 3-jet evaluator."""
    _, f1, f2, f3 = jet_fn(x)
    if f1 == 0.0:
        raise DomainError("Schwarzian undefined at a critical point")
    r = f2 / f1
    return f3 / f1 - 1.5 * r * r


def mobius_jet(a: float, b: float, c: float, d: float):
    """3-jet of the Mobius map (a z + b)/(c z + d)."""
    det = a * d - b * c
    if det == 0.0:
        raise DomainError("degenerate Mobius coefficients")

    def jet(x: float):
        den = c * x + d
        if den == 0.0:
            raise DomainError("Mobius pole")
        f0 = (a * x + b) / den
        f1 = det / den ** 2
        f2 = -2.0 * det * c / den ** 3
        f3 = 6.0 * det * c * c / den ** 4
        return f0, f1, f2, f3

    return jet


def conditioning_weight(d: DrivingPath, kappa: float) -> np.ndarray:
    """Per-step weight (g_t(1) - W_t)^((kappa-4)/kappa) from the track at 1.

    Zero after the swallowing of 1 (the uniformly integrable continuation),
    so reweighting by M_T / M_0 assigns zero mass to swallowed paths.
    """
    if not 4.0 < kappa < 8.0:
        raise DomainError("conditioning weight needs kappa in (4, 8)")
    if "one" in d.tracks:
        track = d.tracks["one"]
        cut = d.swallowed.get("one")
    else:
        images, _, swallowed = transport_series(d, [1.0])
        track = images[:, 0]
        cut = swallowed[0]
    gap = track - d.w
    e = (kappa - 4.0) / kappa
    w = np.where(gap > 0.0, np.abs(gap) ** e, 0.0)
    if cut is not None:
        w[cut:] = 0.0
    return w


def stopped_index(j: np.ndarray, z: np.ndarray, guard_n: int = DEFAULT_GUARD_N,
                  at_step: int | None = None) -> int:
    """Index of min(at_step, first step J or Z drops below 1/guard_n)."""
    lim = 1.0 / guard_n
    bad = np.nonzero((j < lim) | (z < lim))[0]
    stop = int(bad[0]) if bad.size else j.size - 1
    if at_step is not None:
        stop = min(stop, at_step)
    return stop
