"""Interface tracing on spin and FK configurations, embedding into the
half-plane, and discrete extremal distance.

Coordinates: spin (i, j) sits at position (x, y) = (j, i).  Spin interfaces
walk on the plaquette-center lattice (x, y) = (j + 1/2, i + 1/2) with
center-index (i, j) covering i in -1..H-1, j in -1..W-1 (one ring outside
the spin grid).  FK exploration paths walk on edge midpoints of the vertex
grid.  Both start at the medial/center point diagonally adjacent to the
marked corner; the half-step offset against the continuum marked point is
our convention for the lattice-scale ambiguity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import cg as sparse_cg

from .errors import DomainError, InconsistentConfig, NoInterface, SolverFailure
from .lattice import (ARCS, Bond, BondConfig, FkBoundaryCondition, LatticeQuad,
                      Spin, SpinBoundaryCondition, SpinConfig)
from .loewner import HalfPlaneCurve
from .specialfn import rect_to_halfplane, rectangle_modulus, complete_elliptic_k

# Directions on the center lattice (dx, dy).
_N, _E, _S, _W = (0, 1), (1, 0), (0, -1), (-1, 0)
_LEFT_TURN = {_N: _W, _W: _S, _S: _E, _E: _N}
_RIGHT_TURN = {_N: _E, _E: _S, _S: _W, _W: _N}


@dataclass
class InterfacePath:
    """Lattice interface: ordered (x, y) points plus turn bookkeeping."""

    points: np.ndarray            # (n, 2) float
    start_corner: str
    end_corner: str | None
    turns: list[str] = field(default_factory=list)
    kind: str = "spin"

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class QuadMetrics:
    value: float
    conductance: float
    residual: float


# ---------------------------------------------------------------------------
# Spin interface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TurnRule:
    """Species to keep on each side of the walk and the tie-break turn."""

    left: int
    right: int
    tie: str = "left"  # 'left' or 'right'

    def mirrored(self) -> "TurnRule":
        return TurnRule(left=self.right, right=self.left,
                        tie="right" if self.tie == "left" else "left")


DOBRUSHIN_RULE = TurnRule(left=-1, right=+1, tie="left")
PAIR_LEFT_RULE = TurnRule(left=+1, right=-1, tie="left")
PAIR_RIGHT_RULE = TurnRule(left=-1, right=+1, tie="right")


def _virtual_spin(cfg: SpinConfig, i: int, j: int, free_as: int) -> int:
    h, w = cfg.quad.height, cfg.quad.width
    if 0 <= i < h and 0 <= j < w:
        return int(cfg.spins[i, j])
    if i < 0:
        lab = cfg.bc.bottom
    elif i >= h:
        lab = cfg.bc.top
    elif j < 0:
        lab = cfg.bc.left
    else:
        lab = cfg.bc.right
    return free_as if lab is Spin.FREE else lab.value


def _side_spins(ci: int, cj: int, d: tuple[int, int]):
    """Spin indices (left, right) of a move from center-index (ci, cj).

    Center (ci, cj) sits at (x, y) = (cj + 1/2, ci + 1/2); a move crosses
    between the two spins flanking the crossed lattice edge.
    """
    if d == _N:
        return (ci + 1, cj), (ci + 1, cj + 1)
    if d == _S:
        return (ci, cj + 1), (ci, cj)
    if d == _E:
        return (ci + 1, cj + 1), (ci, cj + 1)
    if d == _W:
        return (ci, cj), (ci + 1, cj)
    raise DomainError("bad direction")


def _corner_center(quad: LatticeQuad, name: str) -> tuple[int, int]:
    h, w = quad.height, quad.width
    return {"xL": (-1, -1), "xR": (-1, w - 1),
            "yR": (h - 1, w - 1), "yL": (h - 1, -1)}[name]


def trace_spin_interface(cfg: SpinConfig, start: str = "xL",
                         rule: TurnRule = DOBRUSHIN_RULE,
                         free_as: int | None = None) -> InterfacePath:
    """Walk the interface keeping rule.left spins on the left of the motion
    and rule.right spins on the right, resolving ambiguities with the
    tie-break turn; starts at the marked corner and ends at the first other
    marked corner reached.

    ``free_as`` assigns a virtual spin outside free arcs (default: the
    rule's left species, i.e. the non-explored side).
    """
    if free_as is None:
        free_as = rule.left
    quad = cfg.quad
    h, w = quad.height, quad.width
    pos = _corner_center(quad, start)
    corners = {_corner_center(quad, nm): nm for nm in ("xL", "xR", "yR", "yL")}

    def admissible(ci, cj, d):
        (li, lj), (ri, rj) = _side_spins(ci, cj, d)
        return (_virtual_spin(cfg, li, lj, free_as) == rule.left
                and _virtual_spin(cfg, ri, rj, free_as) == rule.right)

    # first move: no incoming direction
    first = [d for d in (_N, _E, _S, _W)
             if _in_center_range(quad, pos, d) and admissible(*pos, d)]
    if not first:
        raise NoInterface(f"no sign change at corner {start}")
    d = first[0]
    points = [pos]
    turns = ["start"]
    pos = (pos[0] + d[1], pos[1] + d[0])
    points.append(pos)
    limit = 16 * (h + 2) * (w + 2)
    while pos not in corners or corners[pos] == start:
        cand = []
        for turn, nd in (("L", _LEFT_TURN[d]), ("S", d), ("R", _RIGHT_TURN[d])):
            if _in_center_range(quad, pos, nd) and admissible(*pos, nd):
                cand.append((turn, nd))
        if not cand:
            raise InconsistentConfig(f"interface dead end at {pos}")
        if len(cand) > 1:
            want = "L" if rule.tie == "left" else "R"
            pick = [c for c in cand if c[0] == want]
            turn, nd = pick[0] if pick else cand[0]
        else:
            turn, nd = cand[0]
        d = nd
        turns.append(turn)
        pos = (pos[0] + d[1], pos[1] + d[0])
        points.append(pos)
        if len(points) > limit:
            raise InconsistentConfig("interface walk exceeded step limit")
    xy = np.array([(cj + 0.5, ci + 0.5) for (ci, cj) in points], dtype=float)
    return InterfacePath(points=xy, start_corner=start,
                         end_corner=corners[pos], turns=turns, kind="spin")


def _in_center_range(quad: LatticeQuad, pos, d) -> bool:
    ci, cj = pos[0] + d[1], pos[1] + d[0]
    return -1 <= ci <= quad.height - 1 and -1 <= cj <= quad.width - 1


# ---------------------------------------------------------------------------
# FK exploration path
# ---------------------------------------------------------------------------

def _arc_span(quad: LatticeQuad, arc: str) -> list[tuple[int, int]]:
    return quad.arc_span(arc)


class _EdgeStatus:
    """Open/closed lookup on the extended edge set: ghost edges are closed,
    ring edges inside a wired block are forced open."""

    def __init__(self, cfg: BondConfig):
        self.cfg = cfg
        quad = cfg.quad
        self.h, self.w = quad.height, quad.width
        self.n_hor = self.h * (self.w - 1)
        wired: set[tuple] = set()
        for block in cfg.bc.blocks():
            span: set[tuple[int, int]] = set()
            for arc in block:
                span.update(_arc_span(quad, arc))
            for (i, j) in span:
                if (i, j + 1) in span:
                    wired.add(("h", i, j))
                if (i + 1, j) in span:
                    wired.add(("v", i, j))
        self.wired = wired

    def open_(self, kind: str, i: int, j: int) -> bool:
        h, w = self.h, self.w
        if kind == "h":
            inside = 0 <= i < h and 0 <= j < w - 1
        else:
            inside = 0 <= i < h - 1 and 0 <= j < w
        if not inside:
            return False  # ghost edges carry the dual-open boundary
        if (kind, i, j) in self.wired:
            return True
        if kind == "h":
            return bool(self.cfg.omega[i * (w - 1) + j])
        return bool(self.cfg.omega[self.n_hor + i * w + j])


def _medial_pos(kind: str, i: int, j: int) -> tuple[float, float]:
    return (j + 0.5, float(i)) if kind == "h" else (float(j), i + 0.5)


def _edge_at(pos: tuple[float, float]):
    x, y = pos
    if abs(y - round(y)) < 1e-9:  # horizontal edge midpoint
        return ("h", int(round(y)), int(math.floor(x)))
    return ("v", int(round(y - 0.5)), int(round(x)))


def _bounce(kind: str, is_open: bool, d: tuple[int, int]) -> tuple[int, int]:
    dx, dy = d
    if kind == "h":
        return (dx, -dy) if is_open else (-dx, dy)
    return (-dx, dy) if is_open else (dx, -dy)


def _walk_medial(status: _EdgeStatus, edge, d, stop_edges=None, limit=None):
    """March the medial walk from (edge, incoming direction); returns the
    visited (position, state) sequence up to a stop edge or state repeat."""
    limit = limit or 16 * (status.h + 2) * (status.w + 2)
    pts = [_medial_pos(*edge)]
    states = [(edge, d)]
    seen = {(edge, d)}
    for _ in range(limit):
        kind, i, j = edge
        d = _bounce(kind, status.open_(kind, i, j), d)
        x, y = _medial_pos(kind, i, j)
        pos = (x + 0.5 * d[0], y + 0.5 * d[1])
        edge = _edge_at(pos)
        pts.append(_medial_pos(*edge))
        if stop_edges is not None and edge in stop_edges:
            states.append((edge, d))
            return pts, states, True
        if (edge, d) in seen:
            states.append((edge, d))
            return pts, states, False
        seen.add((edge, d))
        states.append((edge, d))
    raise InconsistentConfig("medial walk exceeded its step limit")


def fk_start_state(quad: LatticeQuad, corner: str = "xL"):
    """Start edge and incoming direction of the exploration path at a
    marked corner: the ghost edge sticking out of the corner, with the
    incoming direction whose bounce heads into the domain."""
    h, w = quad.height, quad.width
    if corner == "xL":
        return ("v", -1, 0), (1, -1)
    if corner == "yR":
        return ("v", h - 1, w - 1), (-1, 1)
    if corner == "xR":
        return ("v", -1, w - 1), (-1, -1)
    if corner == "yL":
        return ("v", h - 1, 0), (1, 1)
    raise DomainError(f"unknown corner {corner!r}")


def trace_fk_exploration(cfg: BondConfig, start: str = "xL",
                         end: str = "yR") -> InterfacePath:
    """Medial exploration path from start^ to end^: a +-pi/2 turn at every
    medial vertex, never crossing an open primal or open dual edge."""
    status = _EdgeStatus(cfg)
    e0, d0 = fk_start_state(cfg.quad, start)
    e1, _ = fk_start_state(cfg.quad, end)
    pts, states, reached = _walk_medial(status, e0, d0, stop_edges={e1})
    if not reached:
        raise InconsistentConfig("exploration path failed to reach its end")
    xy = np.array(pts, dtype=float)
    return InterfacePath(points=xy, start_corner=start, end_corner=end,
                         turns=[], kind="fk")


def fk_loop_decomposition(cfg: BondConfig, start: str = "xL", end: str = "yR"):
    """Exploration path plus the closed loops; checks that together they use
    every directed medial half-edge of the domain exactly once."""
    status = _EdgeStatus(cfg)
    path = trace_fk_exploration(cfg, start, end)
    e0, d0 = fk_start_state(cfg.quad, start)
    e1, _ = fk_start_state(cfg.quad, end)
    _, states, _ = _walk_medial(status, e0, d0, stop_edges={e1})
    used = set(states[:-1])
    loops = []
    h, w = cfg.quad.height, cfg.quad.width
    for i in range(h):
        for j in range(w - 1):
            for d in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                st = (("h", i, j), d)
                if st in used:
                    continue
                pts, sts, reached = _walk_medial(status, ("h", i, j), d)
                if reached:
                    raise InconsistentConfig("loop ran into the path endpoint")
                loops.append(np.array(pts, dtype=float))
                used.update(sts[:-1])
    return path, loops


# ---------------------------------------------------------------------------
# Discrete extremal distance
# ---------------------------------------------------------------------------

CG_TOL = 1e-10
CG_MAXITER = 100_000


def effective_conductance(n_nodes: int, edges, set0, set1,
                          weights=None, tol: float = CG_TOL):
    """Dirichlet energy of the harmonic potential with u=0 on set0, u=1 on
    set1 (Neumann elsewhere); CG with Jacobi preconditioning.

    Returns (conductance, residual).
    """
    set0, set1 = set(set0), set(set1)
    if set0 & set1:
        raise DomainError("terminal sets must be disjoint")
    if weights is None:
        weights = [1.0] * len(edges)
    u = np.zeros(n_nodes)
    for k in set1:
        u[k] = 1.0
    interior = np.array([k for k in range(n_nodes)
                         if k not in set0 and k not in set1], dtype=np.int64)
    if interior.size:
        pos = -np.ones(n_nodes, dtype=np.int64)
        pos[interior] = np.arange(interior.size)
        rows, cols, vals = [], [], []
        rhs = np.zeros(interior.size)
        deg = np.zeros(n_nodes)
        for (a, b), c in zip(edges, weights):
            deg[a] += c
            deg[b] += c
        for (a, b), c in zip(edges, weights):
            for s, t in ((a, b), (b, a)):
                if pos[s] >= 0:
                    if pos[t] >= 0:
                        rows.append(pos[s])
                        cols.append(pos[t])
                        vals.append(-c)
                    else:
                        rhs[pos[s]] += c * u[t]
        rows.extend(range(interior.size))
        cols.extend(range(interior.size))
        vals.extend(deg[interior])
        lap = csr_matrix((vals, (rows, cols)),
                         shape=(interior.size, interior.size))
        d = lap.diagonal()
        minv = 1.0 / np.where(d > 0, d, 1.0)
        from scipy.sparse.linalg import LinearOperator
        m_op = LinearOperator(lap.shape, matvec=lambda x: minv * x)
        x, info = sparse_cg(lap, rhs, rtol=tol, maxiter=CG_MAXITER, M=m_op)
        if info != 0:
            raise SolverFailure(f"CG failed to converge (info={info})")
        u[interior] = x
        res = np.linalg.norm(lap @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
    else:
        res = 0.0
    energy = 0.0
    for (a, b), c in zip(edges, weights):
        energy += c * (u[a] - u[b]) ** 2
    return energy, res


def quad_edge_weights(quad: LatticeQuad) -> list[float]:
    """Trapezoid (Neumann) conductances: boundary-parallel edges lying on
    the boundary carry 1/2, everything else 1.  Makes rectangles exactly
    self-dual: d((ab),(cd)) * d((bc),(da)) = 1."""
    w, h = quad.width, quad.height
    out = []
    for i in range(h):
        for _ in range(w - 1):
            out.append(0.5 if i in (0, h - 1) else 1.0)
    for _ in range(h - 1):
        for j in range(w):
            out.append(0.5 if j in (0, w - 1) else 1.0)
    return out


def discrete_extremal_distance(quad: LatticeQuad, arc1, arc2) -> QuadMetrics:
    """Extremal distance between two boundary arcs: reciprocal effective
    conductance of the trapezoid-weighted Dirichlet problem.

    Arcs may be arc names or explicit (i, j) vertex lists.
    """
    def to_set(arc):
        sites = quad.arc_sites(arc) if isinstance(arc, str) else arc
        return {quad.site_index(i, j) for (i, j) in sites}

    s0, s1 = to_set(arc1), to_set(arc2)
    cond, res = effective_conductance(quad.n_sites, quad.edges(), s0, s1,
                                      weights=quad_edge_weights(quad))
    if res > 1e-8:
        raise SolverFailure(f"residual {res:.2e} above tolerance")
    if cond <= 0:
        raise DomainError("degenerate terminal sets: zero conductance")
    return QuadMetrics(value=1.0 / cond, conductance=cond, residual=res)


# ---------------------------------------------------------------------------
# Embedding into (H, 0, infinity)
# ---------------------------------------------------------------------------

RADIUS_CAP = 1e9


def rect_points_to_halfplane(aspect: float, zs: np.ndarray) -> np.ndarray:
    """Vectorised rectangle-to-half-plane map (same convention as
    specialfn.rect_to_halfplane)."""
    from scipy.special import ellipj
    x = np.clip(zs.real, 0.0, 1.0)
    y = np.clip(zs.imag, 0.0, aspect)
    k = rectangle_modulus(aspect)
    m = k * k
    bigk = complete_elliptic_k(k)
    s, c, d, _ = ellipj((2.0 * x - 1.0) * bigk, m)
    s1, c1, d1, _ = ellipj(2.0 * y * bigk, 1.0 - m)
    den = c1 * c1 + m * s * s * s1 * s1
    small = den < 1e-300
    den = np.where(small, 1.0, den)
    w = (s * d1 + 1j * c * d * s1 * c1) / den
    w = np.where(small, complex(np.inf, 0.0), w)
    return np.where(w.imag < 0, w.real + 0.0j, w)


def embed_interface(path: InterfacePath, quad: LatticeQuad) -> HalfPlaneCurve:
    """Embed a traced interface into (H, 0, infinity).

    The quad's frame [-1/2, W-1/2] x [-1/2, H-1/2] is scaled onto the unit
    rectangle, mapped by the elliptic map, and normalised by the Mobius map
    sending (image of start) -> 0 and (image of end) -> infinity; the third
    degree of freedom fixes |phi(center image)| = 1.  Vertices mapping
    beyond RADIUS_CAP (including the endpoint) are dropped.
    """
    w_box = float(quad.width)
    h_box = float(quad.height)
    aspect = h_box / w_box
    pts = path.points
    zs = ((pts[:, 0] + 0.5) / w_box) + 1j * ((pts[:, 1] + 0.5) / w_box)
    # clamp lattice-scale overhang (FK medial ghosts sit half a step outside)
    zs = np.clip(zs.real, 0.0, 1.0) + 1j * np.clip(zs.imag, 0.0, aspect)
    w = rect_points_to_halfplane(aspect, zs)
    a_img = float(w[0].real)
    b_img = float(w[-1].real) if np.isfinite(w[-1]) else math.inf
    if not np.isfinite(a_img):
        raise DomainError("interface start maps to infinity")
    if b_img < a_img:
        zs = (1.0 - zs.real) + 1j * zs.imag
        w = rect_points_to_halfplane(aspect, zs)
        a_img = float(w[0].real)
        b_img = float(w[-1].real) if np.isfinite(w[-1]) else math.inf
    center = rect_to_halfplane(aspect, 0.5 + 0.5j * aspect)

    def phi(z):
        return (z - a_img) / (b_img - z) if np.isfinite(b_img) else (z - a_img)

    scale_ref = abs(phi(center))
    if not np.isfinite(scale_ref) or scale_ref == 0.0:
        scale_ref = 1.0
    s = 1.0 / scale_ref
    out = []
    for z in w:
        if not np.isfinite(z.real) or not np.isfinite(z.imag):
            continue
        img = s * phi(z)
        if abs(img) > RADIUS_CAP:
            continue
        out.append(img)
    if len(out) < 2:
        raise DomainError("embedded interface degenerate")
    out[0] = complex(0.0, 0.0)  # phi(a_img) = 0 exactly; clamp round-off
    arr = np.asarray(out, dtype=complex)
    arr = np.where(arr.imag < 0, arr.real + 0.0j, arr)
    return HalfPlaneCurve(arr)
