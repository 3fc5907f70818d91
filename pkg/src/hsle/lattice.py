"""Finite-volume Ising and random-cluster samplers on square-lattice quads,
plus an exact enumeration oracle for tiny instances.

Geometry convention: a quad is an H x W vertex grid (row 0 at the bottom);
the four marked vertices are the corners, counterclockwise
x^L=(0,0), x^R=(0,W-1), y^R=(H-1,W-1), y^L=(H-1,0).  The boundary ring is
partitioned into the arcs

    bottom: row 0 (owns both bottom corners)
    right : col W-1, rows 1..H-1 (owns the top-right corner)
    top   : row H-1, cols W-2..0 (owns the top-left corner)
    left  : col 0, rows H-2..1 (no corners)
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import label as ndlabel
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import BudgetExhausted, DomainError, TooLarge

BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))

ARCS = ("bottom", "right", "top", "left")


class Spin(enum.Enum):
    PLUS = 1
    MINUS = -1
    FREE = 0


class Bond(enum.Enum):
    WIRED = 1
    FREE = 0


def p_critical(q: float) -> float:
    return math.sqrt(q) / (1.0 + math.sqrt(q))


@dataclass(frozen=True)
class LatticeQuad:
    """Rectangular quad of the square lattice: H x W vertices."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise DomainError("quad needs at least 2x2 vertices")

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    def site_index(self, i: int, j: int) -> int:
        return i * self.width + j

    def arc_sites(self, arc: str) -> list[tuple[int, int]]:
        w, h = self.width, self.height
        if arc == "bottom":
            return [(0, j) for j in range(w)]
        if arc == "right":
            return [(i, w - 1) for i in range(1, h)]
        if arc == "top":
            return [(h - 1, j) for j in range(w - 2, -1, -1)]
        if arc == "left":
            return [(i, 0) for i in range(h - 2, 0, -1)]
        raise DomainError(f"unknown arc {arc!r}")

    def edges(self) -> list[tuple[int, int]]:
        """All nearest-neighbour edges as site-index pairs: horizontal edges
        row-major first, then vertical edges row-major (documented order)."""
        w, h = self.width, self.height
        out = []
        for i in range(h):
            for j in range(w - 1):
                out.append((self.site_index(i, j), self.site_index(i, j + 1)))
        for i in range(h - 1):
            for j in range(w):
                out.append((self.site_index(i, j), self.site_index(i + 1, j)))
        return out

    def corner(self, name: str) -> tuple[int, int]:
        return {"xL": (0, 0), "xR": (0, self.width - 1),
                "yR": (self.height - 1, self.width - 1),
                "yL": (self.height - 1, 0)}[name]

    def arc_span(self, arc: str) -> list[tuple[int, int]]:
        """Closed vertex span of an arc (shares corners with neighbours);
        used by the wired identifications and the loop representation."""
        w, h = self.width, self.height
        if arc == "bottom":
            return [(0, j) for j in range(w)]
        if arc == "right":
            return [(i, w - 1) for i in range(h)]
        if arc == "top":
            return [(h - 1, j) for j in range(w)]
        if arc == "left":
            return [(i, 0) for i in range(h)]
        raise DomainError(f"unknown arc {arc!r}")


@dataclass(frozen=True)
class SpinBoundaryCondition:
    bottom: Spin = Spin.FREE
    right: Spin = Spin.FREE
    top: Spin = Spin.FREE
    left: Spin = Spin.FREE

    def arc(self, name: str) -> Spin:
        return getattr(self, name)

    def has_free_arc(self) -> bool:
        return any(self.arc(a) is Spin.FREE for a in ARCS)

    @classmethod
    def dobrushin(cls) -> "SpinBoundaryCondition":
        """Plus on bottom+right (the ccw arc x^L -> y^R), minus on top+left."""
        return cls(bottom=Spin.PLUS, right=Spin.PLUS,
                   top=Spin.MINUS, left=Spin.MINUS)

    @classmethod
    def alternating(cls, xi_left: Spin = Spin.PLUS,
                    xi_right: Spin = Spin.PLUS) -> "SpinBoundaryCondition":
        """Minus on bottom and top, xi labels on the side arcs."""
        return cls(bottom=Spin.MINUS, top=Spin.MINUS,
                   left=xi_left, right=xi_right)


@dataclass(frozen=True)
class FkBoundaryCondition:
    """Per-arc wired/free labels plus the wiring partition.

    ``wiring`` lists blocks of arc names identified with each other; wired
    arcs not mentioned form singleton blocks.
    """

    bottom: Bond = Bond.FREE
    right: Bond = Bond.FREE
    top: Bond = Bond.FREE
    left: Bond = Bond.FREE
    wiring: tuple[tuple[str, ...], ...] = ()

    def arc(self, name: str) -> Bond:
        return getattr(self, name)

    def blocks(self) -> list[list[str]]:
        listed: set[str] = set()
        out = []
        for blk in self.wiring:
            for arc in blk:
                if self.arc(arc) is not Bond.WIRED:
                    raise DomainError(f"wiring block contains free arc {arc}")
                listed.add(arc)
            out.append(list(blk))
        for arc in ARCS:
            if self.arc(arc) is Bond.WIRED and arc not in listed:
                out.append([arc])
        return out

    @classmethod
    def dobrushin(cls) -> "FkBoundaryCondition":
        """Wired on top+left (the ccw arc y^R -> x^L), free on bottom+right."""
        return cls(top=Bond.WIRED, left=Bond.WIRED, wiring=(("top", "left"),))

    @classmethod
    def alternating(cls) -> "FkBoundaryCondition":
        """Free on bottom/top, wired on left/right as separate blocks."""
        return cls(left=Bond.WIRED, right=Bond.WIRED)


@dataclass
class SpinConfig:
    quad: LatticeQuad
    bc: SpinBoundaryCondition
    spins: np.ndarray  # (H, W) int8 in {-1, +1}

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.shape != (self.quad.height, self.quad.width):
            raise DomainError("spin array shape mismatch")


@dataclass
class BondConfig:
    quad: LatticeQuad
    bc: FkBoundaryCondition
    omega: np.ndarray  # (n_edges,) uint8, edge order quad.edges()

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.uint8)
        if self.omega.size != len(self.quad.edges()):
            raise DomainError("bond array length mismatch")

    def dual(self) -> np.ndarray:
        """Dual states edgewise: omega*(e*) = 1 - omega(e)."""
        return (1 - self.omega).astype(np.uint8)


# ---------------------------------------------------------------------------
# Ising sampling
# ---------------------------------------------------------------------------

def frozen_arrays(quad: LatticeQuad, bc: SpinBoundaryCondition):
    """(frozen mask, frozen values) from the arc labels."""
    frozen = np.zeros((quad.height, quad.width), dtype=bool)
    values = np.zeros((quad.height, quad.width), dtype=np.int8)
    for arc in ARCS:
        lab = bc.arc(arc)
        if lab is Spin.FREE:
            continue
        for (i, j) in quad.arc_sites(arc):
            frozen[i, j] = True
            values[i, j] = lab.value
    return frozen, values


def neighbour_sum(s: np.ndarray) -> np.ndarray:
    """Sum of nearest-neighbour spins; absent neighbours contribute 0."""
    h = np.zeros(s.shape, dtype=np.int32)
    h[1:, :] += s[:-1, :]
    h[:-1, :] += s[1:, :]
    h[:, 1:] += s[:, :-1]
    h[:, :-1] += s[:, 1:]
    return h


def heatbath_prob_up(field: float, beta: float) -> float:
    """P(spin = +1 | neighbour field), the single-site heat-bath rule."""
    return 1.0 / (1.0 + math.exp(-2.0 * beta * field))


def _rng_of(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    from .sde import RngSeed
    if isinstance(seed, RngSeed):
        return seed.generator()
    return np.random.Generator(np.random.Philox(key=int(seed)))


def sample_ising(quad: LatticeQuad, bc: SpinBoundaryCondition, beta: float,
                 sweeps: int, seed, method: str = "auto",
                 init: np.ndarray | None = None,
                 update_mask: np.ndarray | None = None) -> SpinConfig:
    """Sample the Ising measure on the quad with the given arc conditions.

    method 'heatbath' runs checkerboard single-site heat-bath sweeps from an
    all-minus-compatible start and is valid for every boundary condition;
    'cluster' runs Swendsen-Wang with the frozen-site constraint and is
    auto-selected only when no arc is free (cross-checked against heat bath
    in the test suite).  ``update_mask`` restricts updates to a sub-region,
    freezing everything else at ``init`` (Domain Markov resampling).
    """
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    rng = _rng_of(seed)
    frozen, values = frozen_arrays(quad, bc)
    if init is not None:
        s = np.asarray(init, dtype=np.int8).copy()
        keep = frozen & (values != 0)
        s[keep] = values[keep]
    else:
        s = np.full((quad.height, quad.width), -1, dtype=np.int8)
        keep = frozen & (values != 0)
        s[keep] = values[keep]
    if update_mask is not None:
        if init is None:
            raise DomainError("update_mask requires an init configuration")
        frozen = frozen | ~np.asarray(update_mask, dtype=bool)
    if method == "auto":
        # Cluster moves only under fully frozen (non-free) arc conditions;
        # a masked resampling keeps that property (masked sites are frozen).
        method = "heatbath" if bc.has_free_arc() else "cluster"
    if method == "heatbath":
        _heatbath_sweeps(s, frozen, beta, sweeps, rng)
    elif method == "cluster":
        _sw_sweeps(s, frozen, beta, sweeps, rng)
    else:
        raise DomainError(f"unknown method {method!r}")
    return SpinConfig(quad=quad, bc=bc, spins=s)


def _heatbath_sweeps(s, frozen, beta, sweeps, rng):
    h, w = s.shape
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    masks = [(((ii + jj) % 2 == par) & ~frozen) for par in (0, 1)]
    for _ in range(sweeps):
        for mask in masks:
            field = neighbour_sum(s)
            p_up = 1.0 / (1.0 + np.exp(-2.0 * beta * field))
            u = rng.random(s.shape)
            s[mask] = np.where(u[mask] < p_up[mask], 1, -1).astype(np.int8)


def _sw_sweeps(s, frozen, beta, sweeps, rng):
    """Swendsen-Wang sweeps with fixed spins: bond clusters containing a
    frozen site keep that site's value, all other clusters get a fresh
    uniform sign."""
    h, w = s.shape
    n = h * w
    p_bond = 1.0 - math.exp(-2.0 * beta)
    idx = np.arange(n).reshape(h, w)
    ea = np.concatenate((idx[:, :-1].ravel(), idx[:-1, :].ravel()))
    eb = np.concatenate((idx[:, 1:].ravel(), idx[1:, :].ravel()))
    frozen_flat = frozen.ravel()
    for _ in range(sweeps):
        flat = s.ravel()
        open_bond = (flat[ea] == flat[eb]) & (rng.random(ea.size) < p_bond)
        g = csr_matrix((np.ones(int(open_bond.sum()), dtype=np.int8),
                        (ea[open_bond], eb[open_bond])), shape=(n, n))
        ncomp, comp = connected_components(g, directed=False)
        sign = np.where(rng.random(ncomp) < 0.5, 1, -1).astype(np.int8)
        pinned = np.zeros(ncomp, dtype=np.int8)
        pinned[comp[frozen_flat]] = flat[frozen_flat]
        sign = np.where(pinned != 0, pinned, sign)
        s[:, :] = sign[comp].reshape(h, w)


# ---------------------------------------------------------------------------
# FK / random-cluster sampling
# ---------------------------------------------------------------------------

def _wiring_map(quad: LatticeQuad, bc: FkBoundaryCondition):
    """Site-index -> contracted node index implementing the wiring blocks."""
    n = quad.n_sites
    node = np.arange(n)
    next_id = n
    for blk in bc.blocks():
        members = [quad.site_index(i, j) for arc in blk
                   for (i, j) in quad.arc_span(arc)]
        for m in members:
            node[m] = next_id
        next_id += 1
    # compress to consecutive ids
    uniq, compact = np.unique(node, return_inverse=True)
    return compact, uniq.size


def cluster_count(quad: LatticeQuad, bc: FkBoundaryCondition,
                  omega: np.ndarray) -> int:
    """k(omega^xi): connected components of the open subgraph after wiring."""
    node, n_nodes = _wiring_map(quad, bc)
    edges = quad.edges()
    open_idx = np.nonzero(np.asarray(omega, dtype=bool))[0]
    if open_idx.size:
        ea = np.array([node[edges[k][0]] for k in open_idx])
        eb = np.array([node[edges[k][1]] for k in open_idx])
        g = csr_matrix((np.ones(ea.size, dtype=np.int8), (ea, eb)),
                       shape=(n_nodes, n_nodes))
        ncomp, _ = connected_components(g, directed=False)
        return int(ncomp)
    return n_nodes


def sample_fk(quad: LatticeQuad, bc: FkBoundaryCondition, p: float,
              qcluster: float, sweeps: int, seed,
              method: str = "auto",
              init: np.ndarray | None = None) -> BondConfig:
    """Sample the random-cluster measure phi^xi_{p,q} on the quad.

    method 'heatbath' is a single-edge heat bath with connectivity queries
    through the wired identifications (any q >= 1); 'es' exploits the
    Edwards-Sokal coupling and runs Swendsen-Wang on the contracted graph
    (q = 2 only); 'auto' picks 'es' for q = 2, else 'heatbath'.
    q = 1 short-circuits to i.i.d. Bernoulli(p) edges.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    if qcluster < 1.0:
        raise DomainError("cluster weight q >= 1 only")
    rng = _rng_of(seed)
    edges = quad.edges()
    if qcluster == 1.0:
        return BondConfig(quad, bc, (rng.random(len(edges)) < p).astype(np.uint8))
    if method == "auto":
        method = "es" if qcluster == 2.0 else "heatbath"
    if method == "es":
        if qcluster != 2.0:
            raise DomainError("Edwards-Sokal route requires q = 2")
        return _sample_fk_es(quad, bc, p, sweeps, rng)
    if method != "heatbath":
        raise DomainError(f"unknown method {method!r}")
    return _sample_fk_heatbath(quad, bc, p, qcluster, sweeps, rng, init=init)


def _sample_fk_heatbath(quad, bc, p, q, sweeps, rng, init=None):
    edges = quad.edges()
    node, n_nodes = _wiring_map(quad, bc)
    m = len(edges)
    omega = np.zeros(m, dtype=np.uint8) if init is None \
        else np.asarray(init, dtype=np.uint8).copy()
    # one sweep = m single-edge updates at uniformly random edges
    total = sweeps * m
    choices = rng.integers(0, m, size=total)
    coins = rng.random(total)
    parent = np.empty(n_nodes, dtype=np.int64)

    def connected_without(k: int) -> bool:
        parent[:] = np.arange(n_nodes)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in range(m):
            if e != k and omega[e]:
                ra, rb = find(node[edges[e][0]]), find(node[edges[e][1]])
                if ra != rb:
                    parent[ra] = rb
        return find(node[edges[k][0]]) == find(node[edges[k][1]])

    for t in range(total):
        k = int(choices[t])
        a, b = edges[k]
        if node[a] == node[b] or connected_without(k):
            prob_open = p
        else:
            prob_open = p / (p + (1.0 - p) * q)
        omega[k] = 1 if coins[t] < prob_open else 0
    return BondConfig(quad, bc, omega)


def _sample_fk_es(quad, bc, p, sweeps, rng):
    """Edwards-Sokal: Swendsen-Wang on the wired-contracted multigraph with
    spin clusters, then bonds opened on equal-spin edges with probability p."""
    edges = quad.edges()
    node, n_nodes = _wiring_map(quad, bc)
    ea = np.array([node[a] for a, _ in edges])
    eb = np.array([node[b] for _, b in edges])
    real = ea != eb  # self-loops within a block never affect clusters
    sigma = np.where(rng.random(n_nodes) < 0.5, 1, -1).astype(np.int8)
    for _ in range(sweeps):
        open_bond = real & (sigma[ea] == sigma[eb]) & (rng.random(ea.size) < p)
        g = csr_matrix((np.ones(int(open_bond.sum()), dtype=np.int8),
                        (ea[open_bond], eb[open_bond])),
                       shape=(n_nodes, n_nodes))
        ncomp, comp = connected_components(g, directed=False)
        sign = np.where(rng.random(ncomp) < 0.5, 1, -1).astype(np.int8)
        sigma = sign[comp]
    omega = ((sigma[ea] == sigma[eb]) & (rng.random(ea.size) < p)).astype(np.uint8)
    return BondConfig(quad, bc, omega)


# ---------------------------------------------------------------------------
# Exact enumeration oracle
# ---------------------------------------------------------------------------

ENUM_CAP_DEFAULT = 1 << 12
ENUM_CAP_MAX = 1 << 20


def enumerate_ising(quad: LatticeQuad, bc: SpinBoundaryCondition, beta: float,
                    cap: int = ENUM_CAP_DEFAULT):
    """Exact Boltzmann distribution over the free sites.

    Returns (free site list, configs array (n, n_free) of +-1, probs).
    """
    if cap > ENUM_CAP_MAX:
        raise DomainError("cap beyond the supported maximum")
    frozen, values = frozen_arrays(quad, bc)
    free_sites = [(i, j) for i in range(quad.height) for j in range(quad.width)
                  if not frozen[i, j]]
    nf = len(free_sites)
    if 2 ** nf > cap:
        raise TooLarge(f"2^{nf} states exceed the cap {cap}")
    n_states = 2 ** nf
    bits = ((np.arange(n_states)[:, None] >> np.arange(nf)[None, :]) & 1)
    configs = (2 * bits - 1).astype(np.int8)
    base = values.astype(np.int32)
    energies = np.zeros(n_states)
    # pair couplings: free-free and free-frozen
    index_of = {s: k for k, s in enumerate(free_sites)}
    h, w = quad.height, quad.width
    for i in range(h):
        for j in range(w):
            for (i2, j2) in ((i, j + 1), (i + 1, j)):
                if i2 >= h or j2 >= w:
                    continue
                a_free = (i, j) in index_of
                b_free = (i2, j2) in index_of
                if a_free and b_free:
                    energies -= configs[:, index_of[(i, j)]] \
                        * configs[:, index_of[(i2, j2)]]
                elif a_free:
                    energies -= configs[:, index_of[(i, j)]] * base[i2, j2]
                elif b_free:
                    energies -= configs[:, index_of[(i2, j2)]] * base[i, j]
                else:
                    energies -= base[i, j] * base[i2, j2]
    weights = np.exp(-beta * (energies - energies.min()))
    return free_sites, configs, weights / weights.sum()


def enumerate_fk(quad: LatticeQuad, bc: FkBoundaryCondition, p: float,
                 q: float, cap: int = ENUM_CAP_DEFAULT):
    """Exact random-cluster distribution: returns (configs (n, m), probs)."""
    if cap > ENUM_CAP_MAX:
        raise DomainError("cap beyond the supported maximum")
    m = len(quad.edges())
    if 2 ** m > cap:
        raise TooLarge(f"2^{m} states exceed the cap {cap}")
    n_states = 2 ** m
    configs = ((np.arange(n_states)[:, None] >> np.arange(m)[None, :]) & 1
               ).astype(np.uint8)
    logw = np.empty(n_states)
    lp, lq = math.log(p) if p > 0 else -math.inf, math.log(q)
    lcp = math.log(1.0 - p) if p < 1 else -math.inf
    for s in range(n_states):
        o = int(configs[s].sum())
        k = cluster_count(quad, bc, configs[s])
        logw[s] = o * lp + (m - o) * lcp + k * lq
    logw -= logw.max()
    wts = np.exp(logw)
    return configs, wts / wts.sum()


def enumerate_measure(quad: LatticeQuad, bc, model: str = "ising",
                      cap: int = ENUM_CAP_DEFAULT, **params):
    """Normalized exact distribution by direct summation of the weights."""
    if model == "ising":
        return enumerate_ising(quad, bc, params["beta"], cap=cap)
    if model == "fk":
        return enumerate_fk(quad, bc, params["p"], params["q"], cap=cap)
    raise DomainError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# Crossing events
# ---------------------------------------------------------------------------

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def crossing_event(cfg, from_arc: str, to_arc: str, species) -> bool:
    """Connectivity event between two boundary arcs.

    SpinConfig: species is +1/-1, connection through equal-spin neighbour
    paths.  BondConfig: species 'open' uses open primal paths (wiring not
    counted), 'dual' uses dual-open paths between the dual half-faces lining
    the two arcs, 'dual2' asks for two vertex-disjoint dual crossings.
    """
    if isinstance(cfg, SpinConfig):
        mask = cfg.spins == int(species)
        labels, _ = ndlabel(mask, structure=_FOUR)
        la = {labels[i, j] for (i, j) in cfg.quad.arc_sites(from_arc)
              if labels[i, j] > 0}
        lb = {labels[i, j] for (i, j) in cfg.quad.arc_sites(to_arc)
              if labels[i, j] > 0}
        return bool(la & lb)
    if isinstance(cfg, BondConfig):
        if species == "open":
            return _bond_crossing(cfg, from_arc, to_arc)
        if species == "dual":
            return _dual_crossing_count(cfg, from_arc, to_arc, need=1)
        if species == "dual2":
            return _dual_crossing_count(cfg, from_arc, to_arc, need=2)
        raise DomainError(f"unknown species {species!r}")
    raise DomainError("unsupported configuration type")


def _bond_crossing(cfg: BondConfig, from_arc: str, to_arc: str) -> bool:
    quad = cfg.quad
    n = quad.n_sites
    edges = quad.edges()
    open_idx = np.nonzero(cfg.omega)[0]
    # virtual terminals: n -> from_arc sites, n+1 -> to_arc sites
    ta = [quad.site_index(i, j) for (i, j) in quad.arc_sites(from_arc)]
    tb = [quad.site_index(i, j) for (i, j) in quad.arc_sites(to_arc)]
    ea = np.concatenate((
        np.array([edges[k][0] for k in open_idx], dtype=np.int64),
        np.full(len(ta), n, dtype=np.int64),
        np.full(len(tb), n + 1, dtype=np.int64)))
    eb = np.concatenate((
        np.array([edges[k][1] for k in open_idx], dtype=np.int64),
        np.array(ta, dtype=np.int64),
        np.array(tb, dtype=np.int64)))
    g = csr_matrix((np.ones(ea.size, dtype=np.int8), (ea, eb)),
                   shape=(n + 2, n + 2))
    _, comp = connected_components(g, directed=False)
    return comp[n] == comp[n + 1]


def _dual_faces(quad: LatticeQuad):
    """Inner dual vertices are the (H-1) x (W-1) faces of the grid."""
    return quad.height - 1, quad.width - 1


def _dual_adjacency(cfg: BondConfig, from_arc: str, to_arc: str):
    """Edges of the dual-open graph on inner faces plus two virtual
    terminals (indices nf, nf+1) attached through the boundary edges of the
    respective arcs.  Dual edge between faces crosses the primal edge they
    share; it is usable iff that primal edge is closed."""
    quad = cfg.quad
    h, w = quad.height, quad.width
    fh, fw = _dual_faces(quad)
    nf = fh * fw

    def fidx(i, j):
        return i * fw + j

    omega = cfg.omega
    n_hor = h * (w - 1)

    def hor_open(i, j):  # horizontal edge (i,j)-(i,j+1)
        return omega[i * (w - 1) + j]

    def ver_open(i, j):  # vertical edge (i,j)-(i+1,j)
        return omega[n_hor + i * w + j]

    ea, eb = [], []
    # face (i,j) has corners (i,j),(i,j+1),(i+1,j),(i+1,j+1)
    for i in range(fh):
        for j in range(fw):
            if j + 1 < fw and not ver_open(i, j + 1):
                # right neighbour face, crossing vertical primal edge
                ea.append(fidx(i, j))
                eb.append(fidx(i, j + 1))
            if i + 1 < fh and not hor_open(i + 1, j):
                ea.append(fidx(i, j))
                eb.append(fidx(i + 1, j))
    terminals = {from_arc: nf, to_arc: nf + 1}
    for arc, t in terminals.items():
        for (fi, fj, closed) in _arc_face_links(cfg, arc):
            if closed:
                ea.append(t)
                eb.append(fidx(fi, fj))
    return ea, eb, nf


def _arc_face_links(cfg: BondConfig, arc: str):
    """(face_i, face_j, primal-edge-closed) for the boundary edges of an arc:
    the dual path exits the domain across a closed primal boundary edge."""
    quad = cfg.quad
    h, w = quad.height, quad.width
    omega = cfg.omega
    n_hor = h * (w - 1)
    out = []
    if arc == "bottom":
        for j in range(w - 1):
            out.append((0, j, not omega[0 * (w - 1) + j]))
    elif arc == "top":
        for j in range(w - 1):
            out.append((h - 2, j, not omega[(h - 1) * (w - 1) + j]))
    elif arc == "left":
        for i in range(h - 1):
            out.append((i, 0, not omega[n_hor + i * w + 0]))
    elif arc == "right":
        for i in range(h - 1):
            out.append((i, w - 2, not omega[n_hor + i * w + (w - 1)]))
    else:
        raise DomainError(f"unknown arc {arc!r}")
    return out


def _dual_crossing_count(cfg: BondConfig, from_arc: str, to_arc: str,
                         need: int) -> bool:
    ea, eb, nf = _dual_adjacency(cfg, from_arc, to_arc)
    if need == 1:
        g = csr_matrix((np.ones(len(ea), dtype=np.int8), (ea, eb)),
                       shape=(nf + 2, nf + 2))
        _, comp = connected_components(g, directed=False)
        return comp[nf] == comp[nf + 1]
    return _max_vertex_disjoint(ea, eb, nf) >= need


def _max_vertex_disjoint(ea, eb, nf) -> int:
    """Menger count of vertex-disjoint terminal-to-terminal paths by
    max-flow with unit node capacities (node splitting)."""
    from scipy.sparse.csgraph import maximum_flow
    # node v -> v_in = 2v, v_out = 2v+1; terminals get large capacity
    n = nf + 2
    rows, cols, caps = [], [], []
    for v in range(n):
        rows.append(2 * v)
        cols.append(2 * v + 1)
        caps.append(1 if v < nf else 1 << 20)
    for a, b in zip(ea, eb):
        rows.append(2 * a + 1)
        cols.append(2 * b)
        caps.append(1 << 20)
        rows.append(2 * b + 1)
        cols.append(2 * a)
        caps.append(1 << 20)
    g = csr_matrix((np.asarray(caps, dtype=np.int32),
                    (np.asarray(rows), np.asarray(cols))),
                   shape=(2 * n, 2 * n))
    res = maximum_flow(g, 2 * nf, 2 * (nf + 1) + 1)
    return int(res.flow_value)


# ---------------------------------------------------------------------------
# Conditioned sampling
# ---------------------------------------------------------------------------

def sample_conditioned(quad: LatticeQuad, bc, event, budget: int, seed,
                       model: str = "ising", **kwargs):
    """Rejection sampling: regenerate until ``event(cfg)`` holds.

    Returns (config, attempts).  Raises BudgetExhausted with the empirical
    rate bound when no acceptance occurs within the budget.
    """
    rng = _rng_of(seed)
    for attempt in range(1, budget + 1):
        if model == "ising":
            cfg = sample_ising(quad, bc, seed=rng, **kwargs)
        elif model == "fk":
            cfg = sample_fk(quad, bc, seed=rng, **kwargs)
        else:
            raise DomainError(f"unknown model {model!r}")
        if event(cfg):
            return cfg, attempt
    raise BudgetExhausted(
        f"no acceptance in {budget} attempts (rate < {1.0 / budget:.2e})")


# ---------------------------------------------------------------------------
# Config snapshots
# ---------------------------------------------------------------------------

_MAGIC = b"HSL1"
_MODEL_CODE = {"spin": 0, "bond": 1}


def pack_config(cfg) -> bytes:
    """Portable bit-packed snapshot: 16-byte header (magic, width, height,
    model, version, pad) + row-major payload bits."""
    if isinstance(cfg, SpinConfig):
        model = 0
        bits = (cfg.spins.ravel() > 0).astype(np.uint8)
    elif isinstance(cfg, BondConfig):
        model = 1
        bits = cfg.omega.astype(np.uint8)
    else:
        raise DomainError("unsupported configuration type")
    head = struct.pack("<4sIIBB2x", _MAGIC, cfg.quad.width, cfg.quad.height,
                       model, 1)
    return head + np.packbits(bits).tobytes()


def unpack_config(blob: bytes, bc=None):
    magic, width, height, model, version = struct.unpack_from("<4sIIBB", blob)
    if magic != _MAGIC:
        raise DomainError("bad magic in config snapshot")
    quad = LatticeQuad(width=width, height=height)
    payload = np.frombuffer(blob[16:], dtype=np.uint8)
    if model == 0:
        n = width * height
        bits = np.unpackbits(payload)[:n]
        spins = np.where(bits > 0, 1, -1).astype(np.int8).reshape(height, width)
        return SpinConfig(quad, bc or SpinBoundaryCondition(), spins)
    if model == 1:
        m = len(quad.edges())
        bits = np.unpackbits(payload)[:m]
        return BondConfig(quad, bc or FkBoundaryCondition(), bits)
    raise DomainError(f"unknown model code {model}")


def spin_text_dump(cfg: SpinConfig) -> str:
    """PBM-like plain-text dump, rows printed top to bottom."""
    lines = [f"P1H {cfg.quad.width} {cfg.quad.height}"]
    for i in range(cfg.quad.height - 1, -1, -1):
        lines.append(" ".join("1" if v > 0 else "0" for v in cfg.spins[i]))
    return "\n".join(lines) + "\n"
