"""Driving-path integrators: plain SLE, SLE_kappa(rho) with force points and
continuation threshold, and the two-marked-point hypergeometric variant.

All integrators are Euler-Maruyama on the driving value with the marked
points advanced by the exact per-step slit update, so a simulated path can
be fed straight into the zipper machinery of :mod:`hsle.loewner`.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StepSizeUnderflow
from .loewner import DrivingPath, TimeGrid
from .specialfn import FOverFTable, HsleFunction

DT_MIN_FACTOR = 1e-9          # adaptive floor: dt_min = 1e-9 * dt_base
DRIFT_CAP_FACTOR = 4.0        # |drift| * dt capped at 4 sqrt(kappa dt)
SWALLOW_REL_GAP = 1e-6        # V - W below this (relative) counts as swallowed
THRESHOLD_TOL = 1e-12


@dataclass(frozen=True)
class RngSeed:
    """64-bit master seed plus a stream index.

    Distinct stream indices give independent Brownian increments via the
    counter-based Philox generator.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = (self.seed & 0xFFFFFFFFFFFFFFFF) * (1 << 64) + (self.stream & 0xFFFFFFFFFFFFFFFF)
        return np.random.Generator(np.random.Philox(key=key))


def _as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed))


class StopReason(enum.Enum):
    HORIZON = "Horizon"
    CONTINUATION_THRESHOLD = "ContinuationThreshold"
    X_SWALLOWED = "XSwallowed"
    STEP_LIMIT = "StepLimit"


# Near-swallowing steps stall in capacity; cap the loop as a safety net.
DEFAULT_MAX_STEPS = 2_000_000


# ---------------------------------------------------------------------------
# Plain SLE
# ---------------------------------------------------------------------------

def simulate_sle(kappa: float, T: float, dt: float, seed) -> DrivingPath:
    """W_t = sqrt(kappa) B_t on a uniform capacity grid."""
    if kappa < 0:
        raise DomainError("kappa must be nonnegative")
    if T <= 0 or dt <= 0:
        raise DomainError("horizon and step must be positive")
    n = max(1, int(round(T / dt)))
    times = np.linspace(0.0, T, n + 1)
    rng = _as_seed(seed).generator()
    steps = math.sqrt(kappa * T / n) * rng.standard_normal(n)
    w = np.concatenate(([0.0], np.cumsum(steps)))
    return DrivingPath(grid=TimeGrid(times), w=w)


# ---------------------------------------------------------------------------
# SLE_kappa(rho)
# ---------------------------------------------------------------------------

@dataclass
class SleParams:
    """kappa with left/right boundary force points and weights.

    ``left`` lists (x, rho) with x <= 0 in decreasing x order (nearest
    first); ``right`` lists (x, rho) with x >= 0 increasing.
    """

    kappa: float
    left: list[tuple[float, float]] = field(default_factory=list)
    right: list[tuple[float, float]] = field(default_factory=list)
    T: float = 1.0
    dt_base: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.kappa < 8.0:
            raise DomainError("kappa must lie in (0, 8)")
        xs = [x for x, _ in self.left]
        if any(x > 0 for x in xs) or xs != sorted(xs, reverse=True):
            raise DomainError("left force points must satisfy x <= 0, nearest first")
        xs = [x for x, _ in self.right]
        if any(x < 0 for x in xs) or xs != sorted(xs):
            raise DomainError("right force points must satisfy x >= 0, nearest first")
        if self.T <= 0 or self.dt_base <= 0:
            raise DomainError("horizon and dt_base must be positive")


class _ForcePoint:
    __slots__ = ("x0", "rho", "side", "v", "contact", "first_contact", "values")

    def __init__(self, x0: float, rho: float, side: float):
        self.x0 = x0
        self.rho = rho
        self.side = side
        self.v = x0
        self.contact = x0 == 0.0
        self.first_contact: int | None = 0 if x0 == 0.0 else None
        self.values = [x0]

    def advance(self, c: float, dt: float, step_index: int) -> None:
        u = (self.v - c) * self.side
        if u <= 0.0:
            self.v = c + self.side * 2.0 * math.sqrt(dt)
            self.contact = True
            if self.first_contact is None:
                self.first_contact = step_index
        else:
            self.v = c + self.side * math.sqrt(u * u + 4.0 * dt)
            self.contact = False
        self.values.append(self.v)


def _choose_dt(dt_base: float, remaining: float, live_gaps: list[float],
               drift_fn, kappa: float) -> tuple[float, float]:
    """Adaptive step: dt = dt_base * min(1, d_min^2) floored at dt_min, then
    halve while the capped-drift rule |drift| dt <= 4 sqrt(kappa dt) is
    violated.  Only the halving may underflow the floor (unresolved
    collision)."""
    d = min(live_gaps) if live_gaps else math.inf
    dt_min = DT_MIN_FACTOR * dt_base
    dt = max(dt_base * min(1.0, d * d), dt_min)
    dt = min(dt, remaining)
    while True:
        drift = drift_fn(dt)
        if abs(drift) * dt <= DRIFT_CAP_FACTOR * math.sqrt(kappa * dt):
            break
        if dt <= dt_min:
            raise StepSizeUnderflow(f"adaptive step underflow (dt={dt:.3e})")
        dt *= 0.5
    return dt, drift


def simulate_sle_rho(p: SleParams, seed,
                     max_steps: int = DEFAULT_MAX_STEPS) -> tuple[DrivingPath, StopReason]:
    """Euler-Maruyama for the multi-force-point driving SDE.

    Stops with ContinuationThreshold when the weights of the points in
    contact with W on either side sum to <= -2, else at the horizon.
    """
    rng = _as_seed(seed).generator()
    pts = ([_ForcePoint(x, r, -1.0) for x, r in p.left]
           + [_ForcePoint(x, r, +1.0) for x, r in p.right])
    w = 0.0
    t = 0.0
    times = [0.0]
    wvals = [0.0]
    sqrt_kappa = math.sqrt(p.kappa)
    reason = StopReason.HORIZON
    step = 0

    def drift_at(dt: float) -> float:
        total = 0.0
        for fp in pts:
            if fp.contact:
                total += -fp.rho * fp.side / (2.0 * math.sqrt(dt))
            else:
                total += fp.rho / (w - fp.v)
        return total

    # Threshold may already hold at t=0 for coincident points.
    if _threshold_hit(pts):
        return _finish_rho(p, times, wvals, pts), StopReason.CONTINUATION_THRESHOLD

    while t < p.T - 1e-15:
        live = [abs(w - fp.v) for fp in pts if not fp.contact]
        dt, drift = _choose_dt(p.dt_base, p.T - t, live, drift_at, p.kappa)
        w = w + drift * dt + sqrt_kappa * math.sqrt(dt) * rng.standard_normal()
        t += dt
        step += 1
        for fp in pts:
            fp.advance(w, dt, step)
        times.append(t)
        wvals.append(w)
        if _threshold_hit(pts):
            reason = StopReason.CONTINUATION_THRESHOLD
            break
        if step >= max_steps:
            reason = StopReason.STEP_LIMIT
            break
    return _finish_rho(p, times, wvals, pts), reason


def _threshold_hit(pts: list[_ForcePoint]) -> bool:
    for side in (-1.0, 1.0):
        s = sum(fp.rho for fp in pts if fp.side == side and fp.contact)
        if any(fp.side == side and fp.contact for fp in pts) and s <= -2.0 + THRESHOLD_TOL:
            return True
    return False


def _finish_rho(p: SleParams, times, wvals, pts) -> DrivingPath:
    names = ([f"xL{i + 1}" for i in range(len(p.left))]
             + [f"xR{i + 1}" for i in range(len(p.right))])
    tracks = {nm: np.array(fp.values) for nm, fp in zip(names, pts)}
    swallowed = {nm: fp.first_contact for nm, fp in zip(names, pts)}
    return DrivingPath(grid=TimeGrid(np.array(times)), w=np.array(wvals),
                       tracks=tracks, swallowed=swallowed)


# ---------------------------------------------------------------------------
# Hypergeometric SLE
# ---------------------------------------------------------------------------

@dataclass
class HsleParams:
    """Two marked points 0 < x < y with weight rho > max(-4, kappa/2 - 6)."""

    kappa: float
    rho: float
    x: float
    y: float
    T: float = 1.0
    dt_base: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.kappa < 8.0:
            raise DomainError("kappa must lie in (0, 8)")
        if not self.rho > max(-4.0, self.kappa / 2.0 - 6.0):
            raise DomainError("rho outside the admissible range")
        if not 0.0 < self.x < self.y:
            raise DomainError("marked points must satisfy 0 < x < y")
        if self.T <= 0 or self.dt_base <= 0:
            raise DomainError("horizon and dt_base must be positive")

    def function(self) -> HsleFunction:
        return HsleFunction(self.kappa, self.rho)


def drift_hsle(state: tuple[float, float, float], p: HsleParams,
               fn: HsleFunction | None = None) -> float:
    """Exact drift of the two-marked-point SDE at (W, V^x, V^y):

    (rho+2)/(W - Vx) - (rho+2)/(W - Vy) - kappa (F'/F)(Z) (1 - Z)/(Vy - W),
    with Z = (Vx - W)/(Vy - W).
    """
    w, vx, vy = state
    if not w <= vx <= vy:
        raise DomainError("state must be ordered W <= Vx <= Vy")
    if vx == w or vy == w:
        raise DomainError("drift undefined at coincident points")
    fn = fn or p.function()
    z = (vx - w) / (vy - w)
    f, fp = fn.evaluate(min(max(z, 0.0), 1.0))
    r2 = p.rho + 2.0
    return (r2 / (w - vx) - r2 / (w - vy)
            - p.kappa * (fp / f) * (1.0 - z) / (vy - w))


@dataclass
class HsleRun:
    """Result of one integrator run: the path plus swallowing bookkeeping."""

    path: DrivingPath
    ty_index: int | None
    tx_index: int | None
    stop_reason: StopReason
    manifest: dict

    @property
    def z_values(self) -> np.ndarray:
        w = self.path.w
        vx = self.path.tracks["x"]
        vy = self.path.tracks["y"]
        return (vx - w) / (vy - w)


def simulate_hsle(p: HsleParams, seed, fof: FOverFTable | None = None,
                  max_steps: int = DEFAULT_MAX_STEPS) -> HsleRun:
    """Integrate the two-marked-point driving SDE.

    For kappa in (4, 8) the swallowing of y switches the drift off and the
    run continues as plain SLE; for kappa <= 4 a swallowing of x (possible
    when rho < kappa/2 - 4) terminates the run and is flagged.
    """
    t_start = time.perf_counter()
    rng = _as_seed(seed).generator()
    fof = fof or FOverFTable(p.function())
    kappa = p.kappa
    sqrt_kappa = math.sqrt(kappa)
    r2 = p.rho + 2.0

    w = 0.0
    vx, vy = p.x, p.y
    t = 0.0
    times = [0.0]
    wvals = [0.0]
    xvals = [p.x]
    yvals = [p.y]
    tx_index: int | None = None
    ty_index: int | None = None
    reason = StopReason.HORIZON
    step = 0
    drift_off = False

    def drift_at(dt: float) -> float:
        if drift_off:
            return 0.0
        gx = vx - w if vx > w else 2.0 * math.sqrt(dt)
        gy = vy - w if vy > w else 2.0 * math.sqrt(dt)
        z = gx / gy
        return (-r2 / gx + r2 / gy
                - kappa * fof(min(max(z, 0.0), 1.0)) * (1.0 - z) / gy)

    while t < p.T - 1e-15:
        live = []
        if vx - w > 0 and tx_index is None:
            live.append(vx - w)
        if vy - w > 0 and ty_index is None:
            live.append(vy - w)
        dt, drift = _choose_dt(p.dt_base, p.T - t, live, drift_at, kappa)
        w = w + drift * dt + sqrt_kappa * math.sqrt(dt) * rng.standard_normal()
        t += dt
        step += 1
        root = 2.0 * math.sqrt(dt)
        ux = vx - w
        vx = w + root if ux <= 0.0 else w + math.sqrt(ux * ux + 4.0 * dt)
        uy = vy - w
        vy = w + root if uy <= 0.0 else w + math.sqrt(uy * uy + 4.0 * dt)
        if vx > vy:  # guard: ordering is exact in reals, repair round-off
            vx = vy
        times.append(t)
        wvals.append(w)
        xvals.append(vx)
        yvals.append(vy)

        if ty_index is None and (uy <= 0.0 or vy - w < SWALLOW_REL_GAP * p.y):
            ty_index = step
            if kappa > 4.0:
                drift_off = True  # continues as standard SLE
            else:
                reason = StopReason.X_SWALLOWED
                break
        if tx_index is None and (ux <= 0.0 or vx - w < SWALLOW_REL_GAP * p.x):
            tx_index = step
            if kappa <= 4.0:
                reason = StopReason.X_SWALLOWED
                break
        if step >= max_steps:
            reason = StopReason.STEP_LIMIT
            break
    path = DrivingPath(
        grid=TimeGrid(np.array(times)), w=np.array(wvals),
        tracks={"x": np.array(xvals), "y": np.array(yvals)},
        swallowed={"x": tx_index, "y": ty_index})
    manifest = {
        "kappa": p.kappa, "rho": p.rho, "x": p.x, "y": p.y, "T": p.T,
        "dt_base": p.dt_base, "seed": str(seed),
        "stop_reason": reason.value,
        "x_swallowed_before_y": tx_index is not None and (
            ty_index is None or tx_index < ty_index),
        "wall_time_s": time.perf_counter() - t_start,
    }
    return HsleRun(path=path, ty_index=ty_index, tx_index=tx_index,
                   stop_reason=reason, manifest=manifest)
