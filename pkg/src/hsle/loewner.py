"""Discrete Loewner machinery built from vertical-slit elementary maps.

Conventions (fixed across the package):

* A driving path sampled at times 0 = t_0 < ... < t_n is realised as the
  composition of vertical-slit maps, one per step, with the slit of step k
  based at the step's final driving value c_k = W(t_k).
* The forward (hull-removing) elementary map is
      G_k(z) = c_k + sqrt((z - c_k)^2 + 4 dt_k),
  with the square-root branch keeping the upper half-plane; its inverse
      F_k(z) = c_k + sqrt((z - c_k)^2 - 4 dt_k)
  grows the slit.  The curve tip at t_k is F_1 o ... o F_k (W(t_k)).
* Time is half-plane-capacity time, a(K_t) = 2t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError

NEAR_REAL_TOL = 1e-12


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass
class TimeGrid:
    """Strictly increasing capacity times starting at 0."""

    times: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise DomainError("time grid must be a nonempty 1-d array")
        if self.times[0] != 0.0:
            raise DomainError("time grid must start at 0")
        if np.any(np.diff(self.times) <= 0.0):
            raise DomainError("time grid must be strictly increasing")

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass
class DrivingPath:
    """Driving values on a time grid plus tracked marked-point processes.

    ``tracks[name][k]`` is the image of a marked boundary point after step k;
    ``swallowed[name]`` is the first step index at which the point made
    contact with the driving value (None if it never did).
    """

    grid: TimeGrid
    w: np.ndarray
    tracks: dict[str, np.ndarray] = field(default_factory=dict)
    swallowed: dict[str, int | None] = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != self.grid.times.shape:
            raise DomainError("driving values must match the time grid")

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def slit_params(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-step (slit base c_k, capacity increment dt_k)."""
        return self.w[1:], self.grid.dt


@dataclass
class HalfPlaneCurve:
    """Finite polyline in the closed upper half-plane from a real base point."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        if self.points.ndim != 1 or self.points.size < 1:
            raise DomainError("curve must be a nonempty 1-d complex array")
        if abs(self.points[0].imag) > NEAR_REAL_TOL:
            raise DomainError("curve base point must be real")
        if np.any(self.points.imag < -NEAR_REAL_TOL):
            raise DomainError("curve has points below the real axis")

    @property
    def base(self) -> float:
        return float(self.points[0].real)

    def __len__(self) -> int:
        return self.points.size


# ---------------------------------------------------------------------------
# Elementary maps
# ---------------------------------------------------------------------------

def _signed_sqrt(w: np.ndarray, re_sign: np.ndarray) -> np.ndarray:
    """Principal sqrt flipped to match the sign of Re(z - c).

    Keeps the image in the closed upper half-plane on the correct side
    of the slit.
    """
    s = np.sqrt(w)
    return np.where(re_sign < 0.0, -s, s)


def slit_inverse(z, c: float, dt: float):
    """F(z) = c + sqrt((z-c)^2 - 4 dt): grow a vertical slit of capacity dt."""
    z = np.asarray(z, dtype=complex)
    u = z - c
    return c + _signed_sqrt(u * u - 4.0 * dt, u.real)


def slit_forward(z, c: float, dt: float):
    """G(z) = c + sqrt((z-c)^2 + 4 dt): remove the slit (inverse of
    slit_inverse).  Raises for arguments inside the slit."""
    z = np.asarray(z, dtype=complex)
    u = z - c
    on_axis = np.abs(u.real) <= 1e-300
    inside = on_axis & (u.imag < 2.0 * math.sqrt(dt) - NEAR_REAL_TOL) & (u.imag > 0)
    if np.any(inside):
        raise NumericalError("slit map received an argument inside its slit")
    return c + _signed_sqrt(u * u + 4.0 * dt, u.real)


def slit_forward_real(x: float, c: float, dt: float) -> float:
    """Forward slit map restricted to real points off the slit base."""
    u = x - c
    s = math.sqrt(u * u + 4.0 * dt)
    return c + (s if u > 0 else (-s if u < 0 else 0.0))


# ---------------------------------------------------------------------------
# Hull map state: g_t as a composition of elementary maps
# ---------------------------------------------------------------------------

@dataclass
class HullMapState:
    """Ordered slit parameters (c_k, dt_k) representing g_t as a composition.

    The forward map applies step 1 first.  The state is a plain value:
    copy it freely between workers.
    """

    c: np.ndarray
    dt: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.dt = np.asarray(self.dt, dtype=float)
        if self.c.shape != self.dt.shape:
            raise DomainError("slit parameter arrays must have equal shape")
        if np.any(self.dt <= 0.0):
            raise DomainError("capacity increments must be positive")

    @classmethod
    def from_driving(cls, d: DrivingPath) -> "HullMapState":
        c, dt = d.slit_params()
        return cls(c=c.copy(), dt=dt.copy())

    @classmethod
    def from_curve(cls, curve: HalfPlaneCurve) -> "HullMapState":
        d = extract_driving(curve)
        return cls.from_driving(d)

    @property
    def n_steps(self) -> int:
        return self.c.size

    @property
    def total_time(self) -> float:
        return float(self.dt.sum())

    @property
    def capacity(self) -> float:
        """Half-plane capacity a(K) = 2 * total capacity time."""
        return 2.0 * self.total_time

    def apply(self, z) -> np.ndarray:
        """Forward map g(z) for complex arguments."""
        z = np.asarray(z, dtype=complex)
        out = z.copy()
        for k in range(self.n_steps):
            out = slit_forward(out, float(self.c[k]), float(self.dt[k]))
        return out

    def transport_real(self, x: float) -> tuple[float, float, int | None]:
        """Image, derivative and swallowing step of a real point.

        The derivative is the analytic chain-rule product of elementary-map
        derivatives; a swallowed point is parked at the near edge of the
        slit base and reported with derivative 0.
        """
        side = 1.0 if x >= self.c[0] else -1.0
        y = x
        logd = 0.0
        swallowed: int | None = None
        for k in range(self.n_steps):
            c = float(self.c[k])
            dt = float(self.dt[k])
            u = (y - c) * side
            if u <= 0.0:
                if swallowed is None:
                    swallowed = k + 1
                y = c + side * 2.0 * math.sqrt(dt)
            else:
                s = math.sqrt(u * u + 4.0 * dt)
                logd += math.log(u / s)
                y = c + side * s
        deriv = 0.0 if swallowed is not None else math.exp(logd)
        return y, deriv, swallowed

    def jet(self, x: float) -> tuple[float, float, float, float]:
        """(g, g', g'', g''') at a real, unswallowed point."""
        f0, f1, f2, f3 = x, 1.0, 0.0, 0.0
        for k in range(self.n_steps):
            c = float(self.c[k])
            dt = float(self.dt[k])
            u = f0 - c
            s2 = u * u + 4.0 * dt
            s = math.copysign(math.sqrt(s2), u) if u != 0.0 else math.sqrt(s2)
            if u == 0.0:
                raise DomainError("jet requested at a slit base")
            g1 = u / s
            g2 = 4.0 * dt / (s * s2)
            g3 = -12.0 * dt * u / (s2 * s2 * s)
            nf1 = g1 * f1
            nf2 = g2 * f1 * f1 + g1 * f2
            nf3 = g3 * f1 ** 3 + 3.0 * g2 * f1 * f2 + g1 * f3
            f0 = c + s
            f1, f2, f3 = nf1, nf2, nf3
        return f0, f1, f2, f3


# ---------------------------------------------------------------------------
# Driving -> curve
# ---------------------------------------------------------------------------

def forward_trace(d: DrivingPath) -> HalfPlaneCurve:
    """Trace the curve of a driving path: one vertex per grid point plus base.

    tip(t_k) = (F_1 o ... o F_k)(W_{t_k}), earliest step outermost.
    """
    if d.n_steps < 1:
        raise DomainError("need at least 2 grid points to trace")
    c, dt = d.slit_params()
    n = d.n_steps
    # Seed k is the new tip in step-k local coordinates.
    tips = d.w[1:].astype(complex) + 2.0j * np.sqrt(dt)
    for j in range(n - 1, 0, -1):
        # Apply F_j to every tip with index k >= j+1 (0-based slice j:).
        z = tips[j:]
        u = z - c[j - 1]
        tips[j:] = c[j - 1] + _signed_sqrt(u * u - 4.0 * dt[j - 1], u.real)
    points = np.concatenate(([complex(d.w[0])], tips))
    return HalfPlaneCurve(points)


def trace_tips(d: DrivingPath, indices: np.ndarray) -> np.ndarray:
    """Curve points at selected step indices only (cost O(n * len(indices)))."""
    c, dt = d.slit_params()
    indices = np.asarray(indices, dtype=int)
    if np.any(indices < 1) or np.any(indices > d.n_steps):
        raise DomainError("tip indices outside 1..n_steps")
    tips = d.w[indices].astype(complex) + 2.0j * np.sqrt(dt[indices - 1])
    order = np.argsort(indices)
    tips_sorted = tips[order]
    idx_sorted = indices[order]
    for j in range(int(idx_sorted[-1]) - 1, 0, -1):
        first = np.searchsorted(idx_sorted, j + 1)
        z = tips_sorted[first:]
        u = z - c[j - 1]
        tips_sorted[first:] = c[j - 1] + _signed_sqrt(u * u - 4.0 * dt[j - 1], u.real)
    out = np.empty_like(tips)
    out[order] = tips_sorted
    return out


# ---------------------------------------------------------------------------
# Marked-point evolution along a driving path
# ---------------------------------------------------------------------------

def evolve_points(d: DrivingPath, pts: list[float],
                  names: list[str] | None = None) -> DrivingPath:
    """Fill tracks for real marked points, one slit update per step.

    Each step applies the forward elementary map; whenever the driving value
    crosses a point the reflection rule parks it at the near edge of the
    slit base (so right tracks keep V >= W and left tracks V <= W), and the
    first contact step is recorded as the swallowing index.
    """
    if any(abs(p - d.w[0]) == 0.0 for p in pts):
        raise DomainError("marked points must be off the base point")
    names = names or [f"V{i + 1}" for i in range(len(pts))]
    c, dt = d.slit_params()
    n = d.n_steps
    tracks = {nm: np.empty(n + 1) for nm in names}
    swallowed: dict[str, int | None] = {nm: None for nm in names}
    for nm, p in zip(names, pts):
        side = 1.0 if p > d.w[0] else -1.0
        arr = tracks[nm]
        arr[0] = p
        y = p
        for k in range(n):
            u = (y - c[k]) * side
            root = 2.0 * math.sqrt(dt[k])
            if u <= 0.0:
                y = c[k] + side * root
                if swallowed[nm] is None:
                    swallowed[nm] = k + 1
            else:
                y = c[k] + side * math.sqrt(u * u + 4.0 * dt[k])
            arr[k + 1] = y
    return DrivingPath(grid=d.grid, w=d.w, tracks={**d.tracks, **tracks},
                       swallowed={**d.swallowed, **swallowed})


def transport_series(d: DrivingPath, pts: list[float]):
    """Per-step images and log-derivatives of real marked points.

    Returns (images, logderivs, swallowed) where images and logderivs have
    shape (n_steps + 1, len(pts)).  After swallowing, the image is parked at
    the slit-base edge and the log-derivative is -inf.
    """
    c, dt = d.slit_params()
    n = d.n_steps
    m = len(pts)
    images = np.empty((n + 1, m))
    logd = np.zeros((n + 1, m))
    swallowed: list[int | None] = [None] * m
    images[0] = pts
    for i, p in enumerate(pts):
        side = 1.0 if p > d.w[0] else -1.0
        y = p
        ld = 0.0
        for k in range(n):
            u = (y - c[k]) * side
            if swallowed[i] is not None or u <= 0.0:
                if swallowed[i] is None:
                    swallowed[i] = k + 1
                y = c[k] + side * 2.0 * math.sqrt(dt[k])
                ld = -math.inf
            else:
                s = math.sqrt(u * u + 4.0 * dt[k])
                ld += math.log(u / s)
                y = c[k] + side * s
            images[k + 1, i] = y
            logd[k + 1, i] = ld
    return images, logd, swallowed


# ---------------------------------------------------------------------------
# Curve -> driving (zipper)
# ---------------------------------------------------------------------------

def extract_driving(curve: HalfPlaneCurve) -> DrivingPath:
    """Peel one vertex per step with the vertical slit that sends the current
    tip to the real line; emits (dt, W) in capacity parameterisation.
    """
    pts = curve.points.copy()
    n = pts.size - 1
    if n < 1:
        raise DomainError("curve needs at least one vertex beyond the base")
    times = [0.0]
    wvals = [curve.base]
    rest = pts[1:]
    t = 0.0
    for _ in range(n):
        z = rest[0]
        v = z.imag
        if v < -NEAR_REAL_TOL:
            raise NumericalError("curve vertex below the real axis mid-zipper")
        rest = rest[1:]
        if v <= NEAR_REAL_TOL:
            # Boundary-grazing vertex: no capacity, nothing to peel.
            continue
        cval = z.real
        dt = 0.25 * v * v
        if t + dt <= t:
            continue  # increment not representable at this magnitude
        t += dt
        times.append(t)
        wvals.append(cval)
        if rest.size:
            u = rest - cval
            rest = cval + _signed_sqrt(u * u + 4.0 * dt, u.real)
    if len(times) < 2:
        raise NumericalError("no peelable vertices (curve hugs the real axis)")
    return DrivingPath(grid=TimeGrid(np.array(times)), w=np.array(wvals))


def conformal_transport(curve: HalfPlaneCurve, pts: list[float]):
    """Images, derivatives and swallowing flags of boundary points under the
    full zipper composition of a curve.
    """
    for p in pts:
        if p == curve.base:
            raise DomainError("cannot transport the curve base point")
    if curve.points.size == 1:
        return [(p, 1.0, None) for p in pts]  # empty hull: identity map
    state = HullMapState.from_curve(curve)
    return [state.transport_real(p) for p in pts]


# ---------------------------------------------------------------------------
# Reversal helper
# ---------------------------------------------------------------------------

def mobius_reverse(curve: HalfPlaneCurve, x: float, y: float) -> HalfPlaneCurve:
    """Reverse a curve from 0 toward infinity through the half-plane
    involution z -> x*y / conj(z), which swaps (0, infinity) and exchanges
    the marked pair (x, y); the reversed polyline is re-based at 0.

    Statistical use only: the output is compared to forward ensembles
    through scale-invariant functionals.
    """
    if not 0.0 < x < y:
        raise DomainError("need 0 < x < y")
    pts = curve.points
    if abs(pts[0]) > NEAR_REAL_TOL:
        raise DomainError("curve must be based at 0")
    interior = pts[1:]
    tol = 1e-9 * math.sqrt(x * y)
    if np.any(np.abs(interior) < tol):
        raise DomainError("a curve point maps to infinity within tolerance")
    mapped = x * y / np.conj(interior[::-1])
    out = np.concatenate(([0.0 + 0.0j], mapped))
    return HalfPlaneCurve(out)
