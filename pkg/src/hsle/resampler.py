"""Gibbs resampling of one interface of a pair given the other: the
epsilon-restricted Markov chain realised on the lattice.

State space: critical Ising configurations on a quad with alternating
boundary conditions, conditioned on a vertical minus-crossing, carrying the
traced pair (eta^L, eta^R) and their extremal distances (D^L, D^R).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhausted, DomainError
from .interfaces import (PAIR_LEFT_RULE, PAIR_RIGHT_RULE, InterfacePath,
                         effective_conductance, trace_spin_interface)
from .lattice import (BETA_C, LatticeQuad, Spin, SpinBoundaryCondition,
                      SpinConfig, crossing_event, sample_ising)

DEFAULT_EPSILON = 0.05
REJECTION_BUDGET = 10_000


@dataclass
class PairState:
    quad: LatticeQuad
    bc: SpinBoundaryCondition
    config: SpinConfig
    eta_left: InterfacePath
    eta_right: InterfacePath
    d_left: float
    d_right: float

    def satisfies(self, epsilon: float) -> bool:
        return self.d_left >= epsilon and self.d_right >= epsilon

    def summary(self) -> dict:
        return {"d_left": self.d_left, "d_right": self.d_right,
                "width_mid": mid_gap(self)}


def _center_steps(path: InterfacePath):
    """Center-index steps (ci, cj, direction) recovered from the points."""
    idx = [(int(round(y - 0.5)), int(round(x - 0.5)))
           for (x, y) in path.points]
    steps = []
    for (a, b), (c, d) in zip(idx[:-1], idx[1:]):
        steps.append(((a, b), (d - b, c - a)))  # direction (dx, dy)
    return steps


def _side_cells(path: InterfacePath, quad: LatticeQuad, side: str):
    """Cells flanking the path on one side, and the crossed cell pairs."""
    from .interfaces import _side_spins
    h, w = quad.height, quad.width
    collar = []
    crossed = set()
    for (ci, cj), d in _center_steps(path):
        left, right = _side_spins(ci, cj, d)
        cell = left if side == "left" else right
        if 0 <= left[0] < h and 0 <= left[1] < w \
                and 0 <= right[0] < h and 0 <= right[1] < w:
            crossed.add(frozenset((left, right)))
        if 0 <= cell[0] < h and 0 <= cell[1] < w:
            collar.append(cell)
    return collar, crossed


def _flood_region(quad: LatticeQuad, seeds, crossed) -> np.ndarray:
    h, w = quad.height, quad.width
    mask = np.zeros((h, w), dtype=bool)
    stack = [s for s in seeds]
    for s in stack:
        mask[s] = True
    while stack:
        i, j = stack.pop()
        for (i2, j2) in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if not (0 <= i2 < h and 0 <= j2 < w) or mask[i2, j2]:
                continue
            if frozenset(((i, j), (i2, j2))) in crossed:
                continue
            mask[i2, j2] = True
            stack.append((i2, j2))
    return mask


def interface_distance(quad: LatticeQuad, path: InterfacePath,
                       target_arc: str, side: str) -> float:
    """Extremal distance between the interface and a boundary arc inside
    the complementary component on the given side of the path."""
    collar, crossed = _side_cells(path, quad, side)
    if not collar:
        raise DomainError("interface has no flanking cells on that side")
    region = _flood_region(quad, collar, crossed)
    sites = [(i, j) for i in range(quad.height) for j in range(quad.width)
             if region[i, j]]
    pos = {s: k for k, s in enumerate(sites)}
    edges = []
    for (i, j) in sites:
        for (i2, j2) in ((i + 1, j), (i, j + 1)):
            if (i2, j2) in pos and frozenset(((i, j), (i2, j2))) not in crossed:
                edges.append((pos[(i, j)], pos[(i2, j2)]))
    set0 = {pos[c] for c in collar if c in pos}
    set1 = {pos[s] for s in (tuple(t) for t in quad.arc_sites(target_arc))
            if s in pos} - set0
    if not set1:
        return 0.0  # the interface touches the target arc
    cond, _ = effective_conductance(len(sites), edges, set0, set1)
    if cond <= 0:
        return math.inf
    return 1.0 / cond


def mid_gap(state: PairState) -> float:
    """Horizontal gap between the two interfaces at mid height (a scalar
    crossing-width summary)."""
    mid = (state.quad.height - 1) / 2.0
    def xs(path):
        pts = path.points
        sel = np.abs(pts[:, 1] - mid) <= 0.51
        return pts[sel, 0] if sel.any() else pts[:, 0]
    return float(np.min(xs(state.eta_right)) - np.max(xs(state.eta_left)))


def build_pair_state(quad: LatticeQuad, bc: SpinBoundaryCondition,
                     cfg: SpinConfig) -> PairState:
    """Trace both interfaces and their extremal distances on a configuration
    that carries a vertical minus-crossing."""
    eta_l = trace_spin_interface(cfg, "xL", PAIR_LEFT_RULE)
    eta_r = trace_spin_interface(cfg, "xR", PAIR_RIGHT_RULE)
    if eta_l.end_corner != "yL" or eta_r.end_corner != "yR":
        raise DomainError("pair interfaces did not end at the marked corners")
    d_l = interface_distance(quad, eta_l, "right", side="right")
    d_r = interface_distance(quad, eta_r, "left", side="left")
    return PairState(quad=quad, bc=bc, config=cfg, eta_left=eta_l,
                     eta_right=eta_r, d_left=d_l, d_right=d_r)


def initial_pair(quad: LatticeQuad, bc: SpinBoundaryCondition, seed,
                 sweeps: int = 256, budget: int = REJECTION_BUDGET,
                 epsilon: float = DEFAULT_EPSILON) -> PairState:
    """Direct conditioned start: sample until the vertical minus-crossing
    and the epsilon-restriction hold."""
    from .lattice import _rng_of
    rng = _rng_of(seed)
    for _ in range(budget):
        cfg = sample_ising(quad, bc, BETA_C, sweeps, rng)
        if not crossing_event(cfg, "bottom", "top", -1):
            continue
        state = build_pair_state(quad, bc, cfg)
        if state.satisfies(epsilon):
            return state
    raise BudgetExhausted("no valid initial pair within the budget")


def strip_pair(quad: LatticeQuad, bc: SpinBoundaryCondition,
               offset: int, from_left: bool = True) -> PairState:
    """Deterministic extreme initial state: a thin vertical minus strip at
    the given column offset, everything else plus (arcs stay as labelled)."""
    h, w = quad.height, quad.width
    s = np.full((h, w), 1, dtype=np.int8)
    col = offset if from_left else w - 1 - offset
    s[:, col] = -1
    s[:, col + (1 if from_left else -1)] = -1
    from .lattice import frozen_arrays
    frozen, values = frozen_arrays(quad, bc)
    s[frozen & (values != 0)] = values[frozen & (values != 0)]
    cfg = SpinConfig(quad, bc, s)
    if not crossing_event(cfg, "bottom", "top", -1):
        raise DomainError("strip state lost its crossing; widen the strip")
    return build_pair_state(quad, bc, cfg)


def gibbs_step(state: PairState, epsilon: float, seed,
               sweeps: int = 128, budget: int = REJECTION_BUDGET,
               force_side: str | None = None) -> tuple[PairState, dict]:
    """One step of the epsilon-Markov chain: pick a side uniformly, freeze
    the other interface, resample the complementary component with the
    induced Dobrushin condition (minus collar on the frozen interface's
    near side), retrace, and retry until the epsilon-restriction holds.
    """
    from .lattice import _rng_of
    rng = _rng_of(seed)
    if not state.satisfies(epsilon):
        raise DomainError("input state violates the epsilon restriction")
    side = force_side or ("L" if rng.random() < 0.5 else "R")
    quad, bc = state.quad, state.bc
    if side == "R":
        frozen_path = state.eta_left
        collar, crossed = _side_cells(frozen_path, quad, "right")
    else:
        frozen_path = state.eta_right
        collar, crossed = _side_cells(frozen_path, quad, "left")
    region = _flood_region(quad, collar, crossed)
    collar_mask = np.zeros_like(region)
    for c in collar:
        collar_mask[c] = True
    update = region & ~collar_mask
    attempts = 0
    for _ in range(budget):
        attempts += 1
        base = state.config.spins.copy()
        base[collar_mask] = -1  # induced Dobrushin condition along the cut
        cfg = sample_ising(quad, bc, BETA_C, sweeps, rng, init=base,
                           update_mask=update)
        new_state = build_pair_state(quad, bc, cfg)
        if new_state.satisfies(epsilon) \
                and crossing_event(cfg, "bottom", "top", -1):
            info = {"side": side, "attempts": attempts}
            return new_state, info
    raise BudgetExhausted(
        f"gibbs step rejected {budget} times (epsilon={epsilon} too large?)")


@dataclass
class ChainResult:
    snapshots: list[PairState]
    records: list[dict]
    acceptance: float

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r) for r in self.records) + "\n"


def run_chain(init: PairState, steps: int, epsilon: float, seed,
              sweeps: int = 128, thin: int = 1,
              budget: int = REJECTION_BUDGET) -> ChainResult:
    """Run the chain, returning thinned snapshots plus per-step scalar
    records (step, side, attempts, D^L, D^R, mid-width)."""
    from .lattice import _rng_of
    rng = _rng_of(seed)
    state = init
    snapshots = [init]
    records = []
    total_attempts = 0
    for k in range(steps):
        state, info = gibbs_step(state, epsilon, rng, sweeps=sweeps,
                                 budget=budget)
        total_attempts += info["attempts"]
        rec = {"step": k + 1, "side": info["side"],
               "attempts": info["attempts"], **state.summary()}
        records.append(rec)
        if (k + 1) % thin == 0:
            snapshots.append(state)
    acceptance = steps / total_attempts if total_attempts else 1.0
    return ChainResult(snapshots=snapshots, records=records,
                       acceptance=acceptance)
