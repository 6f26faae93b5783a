"""k-cube renormalization: defect classification and closed-cutset discovery.

Lattice vertices are grouped into closed cubes of side 2k centered on the
sublattice (2k)Z^d (cubes share faces, so a vertex can belong to several).
A finite connected subgraph induces ocean/pond structure on the complement
cubes; closing its outer boundary edges exposes a closed cutset inside the
augmented cubes of a *-connected cube set built from pond and ocean rims.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import kernels
from .lattice import BoxSpec, Configuration, Subgraph, outer_boundaries

NONE = "none"
TYPE_I = "type-I"
TYPE_II = "type-II"
BOTH = "both"


class OutOfRange(Exception):
    """The 3k-cube does not fit inside the padded box."""


class HypothesisViolated(Exception):
    """The subgraph fits inside a single 3k-cube."""


class OceanAmbiguous(Exception):
    """More than one hull-touching complement component; enlarge the pad."""


@dataclass(frozen=True)
class CubeGrid:
    """Renormalization geometry at parameter k on a given box."""

    k: int
    box: BoxSpec

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("renormalization parameter must be >= 1")

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def extent(self) -> int:
        """Cube centers x range over [-extent, extent]^d."""
        return (self.box.half + self.k) // (2 * self.k)

    def cube_centers_of_vertex(self, coord) -> list:
        """All cube centers whose closed cube contains the vertex."""
        out = []
        ranges = []
        for c in coord:
            lo = -(-(int(c) - self.k) // (2 * self.k))  # ceil
            hi = (int(c) + self.k) // (2 * self.k)
            ranges.append(range(max(lo, -self.extent),
                                min(hi, self.extent) + 1))
        for x in product(*ranges):
            out.append(x)
        return out

    def cube_vertices(self, x) -> np.ndarray:
        """Lattice coordinates of the closed cube at center x, box-clipped."""
        axes = []
        for xi in x:
            lo = max(2 * self.k * xi - self.k, -self.box.half)
            hi = min(2 * self.k * xi + self.k, self.box.half)
            axes.append(np.arange(lo, hi + 1))
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def augmented_vertices(self, x) -> np.ndarray:
        axes = []
        for xi in x:
            lo = max(2 * self.k * xi - 2 * self.k - 1, -self.box.half)
            hi = min(2 * self.k * xi + 2 * self.k + 1, self.box.half)
            axes.append(np.arange(lo, hi + 1))
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def all_centers(self) -> list:
        r = range(-self.extent, self.extent + 1)
        return list(product(*([r] * self.d)))


def _star_components(cubes: set) -> list:
    """*-connected components of a set of cube centers."""
    remaining = set(cubes)
    comps = []
    offs = list(product((-1, 0, 1), repeat=len(next(iter(cubes)))))\
        if cubes else []
    while remaining:
        start = min(remaining)
        comp = {start}
        remaining.discard(start)
        stack = [start]
        while stack:
            c = stack.pop()
            for off in offs:
                nb = tuple(a + b for a, b in zip(c, off))
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(comp)
    return comps


def _star_rim(comp: set, universe: set) -> set:
    """Cubes *-adjacent to the component but not inside it."""
    d = len(next(iter(comp)))
    offs = [o for o in product((-1, 0, 1), repeat=d) if any(o)]
    rim = set()
    for c in comp:
        for off in offs:
            nb = tuple(a + b for a, b in zip(c, off))
            if nb not in comp and nb in universe:
                rim.add(nb)
    return rim


# ---------------------------------------------------------------------------
# Type-I / Type-II classification


def _b3_data(cfg: Configuration, grid: CubeGrid, x):
    """Vertices, boundary shell and internal open edges of the 3k-cube."""
    k, box = grid.k, cfg.box
    center = 2 * k * np.asarray(x, dtype=np.int64)
    lo, hi = center - 3 * k, center + 3 * k
    if np.any(lo < -box.half) or np.any(hi > box.half):
        raise OutOfRange("3k-cube leaves the padded box")
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    idx = box.index_of(coords)
    on_shell = (np.abs(coords - center[None, :]).max(axis=1) == 3 * k)
    member = np.zeros(box.n_vertices, dtype=bool)
    member[idx] = True
    shell = np.zeros(box.n_vertices, dtype=bool)
    shell[idx[on_shell]] = True
    eu, ev = cfg.open_edge_arrays()
    internal = (member[eu] & member[ev]) & ~(shell[eu] & shell[ev])
    return coords, idx, on_shell, eu[internal], ev[internal]


def _surfaces(grid: CubeGrid, x):
    """Distinct face squares of the 3^d k-cubes inside the 3k-cube."""
    k, d = grid.k, grid.d
    base = np.asarray(x, dtype=np.int64)
    seen = {}
    for off in product((-1, 0, 1), repeat=d):
        c = 2 * k * (base + np.asarray(off))
        for a in range(d):
            for s in (-k, k):
                key = (a, int(c[a] + s),
                       tuple((int(c[i] - k), int(c[i] + k))
                             for i in range(d) if i != a))
                if key in seen:
                    continue
                axes = []
                for i in range(d):
                    if i == a:
                        axes.append(np.array([c[a] + s]))
                    else:
                        axes.append(np.arange(c[i] - k, c[i] + k + 1))
                grids = np.meshgrid(*axes, indexing="ij")
                seen[key] = np.stack([g.ravel() for g in grids], axis=1)
    return list(seen.values())


def classify_cube(cfg: Configuration, grid: CubeGrid, x) -> str:
    """Defect class of the k-cube at center x.

    Uses only edges internal to the 3k-cube (no edge with both endpoints on
    its shell), so the answer is independent of the shell edge states.
    Type-I: an open cluster joins the augmented cube to the 3k-shell while
    avoiding some face square of a constituent k-cube.  Type-II: two distinct
    such crossing clusters.
    """
    k, box = grid.k, cfg.box
    center = 2 * k * np.asarray(x, dtype=np.int64)
    coords, idx, on_shell, eu, ev = _b3_data(cfg, grid, x)
    labels = kernels.min_labels(box.n_vertices, eu, ev)
    has_edge = np.zeros(box.n_vertices, dtype=bool)
    has_edge[eu] = True
    has_edge[ev] = True

    aug = np.abs(coords - center[None, :]).max(axis=1) <= 2 * k + 1
    aug_labels = set(labels[idx[aug & has_edge[idx]]].tolist())
    shell_labels = set(labels[idx[on_shell & has_edge[idx]]].tolist())
    crossing = sorted(aug_labels & shell_labels)
    if not crossing:
        return NONE

    type_ii = len(crossing) >= 2
    type_i = False
    surf_label_sets = []
    for surf in _surfaces(grid, x):
        sidx = box.index_of(surf)
        ok = has_edge[sidx]
        surf_label_sets.append(set(labels[sidx[ok]].tolist()))
    for lbl in crossing:
        if any(lbl not in s for s in surf_label_sets):
            type_i = True
            break
    if type_i and type_ii:
        return BOTH
    if type_i:
        return TYPE_I
    if type_ii:
        return TYPE_II
    return NONE


@dataclass(frozen=True)
class RateRecord:
    k: int
    rate: float
    stderr: float
    samples: int


def type_rate(p: float, d: int, k_list, samples: int, seed: int
              ) -> list[RateRecord]:
    """Monte Carlo frequency of Type-I-or-Type-II at each renormalization k.

    Meaningful in the supercritical regime, where the defects become rare as
    k grows.
    """
    from ._rng import derive_seed
    from .lattice import sample_configuration

    out = []
    for k in k_list:
        box = BoxSpec(d=d, n=3 * k, pad=0)
        grid = CubeGrid(k=k, box=box)
        hits = 0
        for i in range(samples):
            cfg = sample_configuration(p, box, derive_seed(seed, k, i))
            if classify_cube(cfg, grid, (0,) * d) != NONE:
                hits += 1
        rate = hits / samples
        stderr = float(np.sqrt(rate * (1 - rate) / samples))
        out.append(RateRecord(k=k, rate=rate, stderr=stderr, samples=samples))
    return out


# ---------------------------------------------------------------------------
# ocean/pond decomposition and the closed cutset


def coarse_boundary(G: Subgraph, grid: CubeGrid) -> tuple[set, set]:
    """Cube sets meeting G with its outer boundary, and the boundary alone."""
    if len(G) == 0:
        return set(), set()
    edge_ids, _ = outer_boundaries(G)
    box = G.box
    ends = np.unique(np.concatenate([box.edges_u[edge_ids],
                                     box.edges_v[edge_ids]]))
    end_coords = box.coords_of(ends)
    a_cubes = set()
    for c in end_coords.tolist():
        a_cubes.update(grid.cube_centers_of_vertex(c))
    g_cubes = set(a_cubes)
    for c in G.coords.tolist():
        g_cubes.update(grid.cube_centers_of_vertex(c))
    return g_cubes, a_cubes


@dataclass(frozen=True)
class ZhangDecomposition:
    """Ocean/pond structure and the discovered closed cutset."""

    grid: CubeGrid
    g_cubes: frozenset
    a_cubes: frozenset
    ocean: frozenset
    ponds: tuple            # (frozenset of centers, status) pairs
    bridge_cubes: frozenset
    gamma_cubes: frozenset
    gamma_edges: np.ndarray = field(repr=False)
    omega_prime: Configuration = field(repr=False)

    def to_json(self) -> dict:
        """Cube-index lists per role plus the cutset's canonical edge ids."""
        box = self.omega_prime.box

        def centers(cubes):
            return sorted(list(x) for x in cubes)

        return {
            "k": self.grid.k,
            "g_cubes": centers(self.g_cubes),
            "a_cubes": centers(self.a_cubes),
            "ocean": centers(self.ocean),
            "ponds": [{"status": status, "cubes": centers(cubes)}
                      for cubes, status in self.ponds],
            "bridge_cubes": centers(self.bridge_cubes),
            "gamma_cubes": centers(self.gamma_cubes),
            "gamma_edges": box.edge_key[self.gamma_edges].tolist(),
        }


def _fits_in_3k_cube(G: Subgraph, grid: CubeGrid) -> bool:
    coords = G.coords
    k = grid.k
    for a in range(grid.d):
        lo = int(coords[:, a].min())
        hi = int(coords[:, a].max())
        if -(-(hi - 3 * k) // (2 * k)) > (lo + 3 * k) // (2 * k):
            return False
    return True


def zhang_decompose(cfg: Configuration, G: Subgraph,
                    grid: CubeGrid) -> ZhangDecomposition:
    """Discover a closed cutset separating G from the hull after closing the
    open edges of its outer boundary.

    Requires G connected in the open subgraph and not contained in any
    3k-cube.  The returned cutset consists of closed edges (in the modified
    configuration) inside the augmented cubes of the rim-plus-bridge cube
    set; it is the minimum-cardinality such cutset with the canonical
    minimal-source-side witness.
    """
    box = cfg.box
    if len(G) == 0:
        raise ValueError("G must be nonempty")
    if _fits_in_3k_cube(G, grid):
        raise HypothesisViolated("G is contained in a single 3k-cube")
    member = G.member_mask()
    eu_all, ev_all = cfg.open_edge_arrays()
    inside = member[eu_all] & member[ev_all]
    lab_G = kernels.min_labels(box.n_vertices, eu_all[inside],
                               ev_all[inside])
    roots = np.unique(lab_G[G.vertices])
    if len(roots) != 1:
        raise ValueError("G must be connected in the open subgraph")

    g_cubes, a_cubes = coarse_boundary(G, grid)
    universe = set(grid.all_centers())
    complement = universe - g_cubes
    comps = _star_components(complement)
    ext = grid.extent
    hull_touch = [comp for comp in comps
                  if any(max(abs(c) for c in x) == ext for x in comp)]
    if len(hull_touch) != 1:
        raise OceanAmbiguous(f"{len(hull_touch)} hull-touching complement "
                             "components")
    ocean = hull_touch[0]
    ponds = [comp for comp in comps if comp is not ocean]

    # close the open outer-boundary edges of G
    out_edges, _ = outer_boundaries(G)
    bits = cfg.bits.copy()
    bits[out_edges] = 0
    omega_prime = Configuration(box=box, p=cfg.p, seed=cfg.seed, bits=bits)

    eu, ev = omega_prime.open_edge_arrays()
    labels = kernels.min_labels(box.n_vertices, eu, ev)
    has_edge = np.zeros(box.n_vertices, dtype=bool)
    has_edge[eu] = True
    has_edge[ev] = True

    def region_labels(cubes):
        out = set()
        for x in cubes:
            vidx = box.index_of(grid.cube_vertices(x))
            ok = has_edge[vidx]
            out.update(labels[vidx[ok]].tolist())
        return out

    ocean_labels = region_labels(ocean)
    pond_labels = [region_labels(p) for p in ponds]

    status = [None] * len(ponds)
    for i, pl in enumerate(pond_labels):
        if pl & ocean_labels:
            status[i] = "live"
    changed = True
    while changed:
        changed = False
        for i, pl in enumerate(pond_labels):
            if status[i] is not None:
                continue
            for j, ql in enumerate(pond_labels):
                if i != j and status[j] in ("live", "almost-live") \
                        and pl & ql:
                    status[i] = "almost-live"
                    changed = True
                    break
    status = [s if s is not None else "dead" for s in status]

    active = [i for i, s in enumerate(status) if s != "dead"]
    carried = set(ocean_labels)
    for i in active:
        carried |= pond_labels[i]

    # bridge: vertices of the G-cube region on carried clusters, minus the
    # cluster vertices inside the ocean/pond cubes themselves
    g_region = set()
    for x in g_cubes:
        g_region.update(box.index_of(grid.cube_vertices(x)).tolist())
    water = set()
    for x in ocean:
        water.update(box.index_of(grid.cube_vertices(x)).tolist())
    for i in active:
        for x in ponds[i]:
            water.update(box.index_of(grid.cube_vertices(x)).tolist())
    bridge = [v for v in g_region - water
              if has_edge[v] and labels[v] in carried]
    assert not any(member[v] for v in bridge), \
        "bridge vertices must avoid G"
    bridge_cubes = set()
    for v in bridge:
        bridge_cubes.update(grid.cube_centers_of_vertex(
            box.coords_of(v).tolist()))

    gamma_cubes = _star_rim(ocean, universe) | bridge_cubes
    for i in active:
        gamma_cubes |= _star_rim(ponds[i], universe)
    if not gamma_cubes <= a_cubes:
        raise AssertionError("rim cubes leak outside the boundary cube set")

    gamma_edges = _extract_gamma(omega_prime, grid, gamma_cubes, G)

    return ZhangDecomposition(
        grid=grid, g_cubes=frozenset(g_cubes), a_cubes=frozenset(a_cubes),
        ocean=frozenset(ocean),
        ponds=tuple((frozenset(p), s) for p, s in zip(ponds, status)),
        bridge_cubes=frozenset(bridge_cubes),
        gamma_cubes=frozenset(gamma_cubes), gamma_edges=gamma_edges,
        omega_prime=omega_prime)


def _extract_gamma(omega_prime: Configuration, grid: CubeGrid, gamma_cubes,
                   G: Subgraph) -> np.ndarray:
    """Minimum-cardinality closed cutset inside the augmented cube region.

    Closed region edges get unit capacity; every other edge is effectively
    uncuttable, so the minimum cut uses closed region edges only.  Existence
    is guaranteed by the rim construction.
    """
    box = omega_prime.box
    region = np.zeros(box.n_vertices, dtype=bool)
    for x in gamma_cubes:
        region[box.index_of(grid.augmented_vertices(x))] = True
    candidate = (region[box.edges_u] & region[box.edges_v]
                 & (omega_prime.bits == 0))
    big = 1 << 20
    caps = np.where(candidate, 1, big).astype(np.int64)
    value, reach = kernels.max_flow_unit(
        box.n_vertices, box.edges_u, box.edges_v, caps,
        G.vertices, box.hull_vertices)
    if value >= big:
        raise AssertionError("no closed cutset inside the augmented cubes")
    crossing = reach[box.edges_u] != reach[box.edges_v]
    gamma = np.flatnonzero(crossing)
    assert np.all(candidate[gamma]), "cutset must use closed region edges"
    return gamma
