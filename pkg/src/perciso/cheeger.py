"""Modified Cheeger solvers, polytope carving, empirical measures, metrics.

The quantity of interest is the minimal boundary-to-size ratio over subsets
of the giant cluster restricted to the core box, with size capped at
|C_n|/d! and the open edge boundary counted in the whole padded cluster.
Values are kept as exact integer pairs to avoid float ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .cylinder import (
    DESK_FACE_SEP,
    CylinderSpec,
    Frame,
    discrete_cylinder,
    xi_hemi,
)
from .lattice import Configuration, Subgraph, giant_cluster_in_box, \
    open_edge_boundary
from .wulff import GEOM_TOL, Polytope, _clip_pts, _clip_polygon, \
    _shoelace_pts, reference_volume


class BudgetExceeded(Exception):
    """Instance too large for exhaustive search."""


class InfeasibleCap(Exception):
    """Volume cap below one vertex; no valid subgraph exists."""


class CarveFailed(Exception):
    """Polytope carving produced no feasible subgraph."""


class ScaleMismatch(Exception):
    """Empirical measures with different resolution or dimension."""


@dataclass(frozen=True)
class CheegerProblem:
    """Giant-cluster subgraph optimization instance."""

    cfg: Configuration
    Cn: Subgraph

    @classmethod
    def from_configuration(cls, cfg: Configuration) -> "CheegerProblem":
        return cls(cfg=cfg, Cn=giant_cluster_in_box(cfg))

    @property
    def cap(self) -> int:
        return len(self.Cn) // math.factorial(self.cfg.box.d)

    @cached_property
    def _graph(self):
        """Local open-subgraph structure on the core vertices.

        deg_total counts all open edges at a vertex within the padded box
        (boundary edges into the pad region included); the CSR adjacency
        holds open edges with both endpoints in Cn.
        """
        box = self.cfg.box
        verts = self.Cn.vertices
        m = len(verts)
        local = np.full(box.n_vertices, -1, dtype=np.int64)
        local[verts] = np.arange(m)
        eu, ev = self.cfg.open_edge_arrays()
        deg_total = np.zeros(box.n_vertices, dtype=np.int64)
        np.add.at(deg_total, eu, 1)
        np.add.at(deg_total, ev, 1)
        deg_total = deg_total[verts]
        both = (local[eu] >= 0) & (local[ev] >= 0)
        lu, lv = local[eu[both]], local[ev[both]]
        order = np.argsort(np.concatenate([lu, lv]), kind="stable")
        heads = np.concatenate([lu, lv])[order]
        tails = np.concatenate([lv, lu])[order]
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(indptr, heads + 1, 1)
        indptr = np.cumsum(indptr)
        return local, indptr, tails.astype(np.int64), deg_total

    @cached_property
    def shift_maps(self) -> np.ndarray:
        """(2d, m) local index of v +/- e_axis within Cn, -1 if absent."""
        box = self.cfg.box
        local, _, _, _ = self._graph
        coords = self.Cn.coords
        m = len(coords)
        out = np.full((2 * box.d, m), -1, dtype=np.int64)
        for a in range(box.d):
            for s, row in ((1, 2 * a), (-1, 2 * a + 1)):
                shifted = coords.copy()
                shifted[:, a] += s
                ok = np.abs(shifted[:, a]) <= box.half
                idx = np.full(m, -1, dtype=np.int64)
                idx[ok] = local[box.index_of(shifted[ok])]
                out[row] = idx
        return out


@dataclass(frozen=True)
class CheegerSolution:
    """Boundary/size ratio as an exact integer pair plus its witness."""

    phi_num: int
    phi_den: int
    witness: Subgraph
    method: str
    optimizer_certificate: bool = False

    @property
    def value(self) -> float:
        return self.phi_num / self.phi_den

    def better_than(self, other: "CheegerSolution") -> bool:
        return self.phi_num * other.phi_den < other.phi_num * self.phi_den

    def to_json(self, include_witness: bool = True) -> dict:
        out = {
            "phi_num": self.phi_num,
            "phi_den": self.phi_den,
            "size": len(self.witness),
            "method": self.method,
            "optimizer_certificate": self.optimizer_certificate,
        }
        if include_witness:
            out["witness"] = self.witness.vertices.tolist()
        return out


def _solution(prob: CheegerProblem, local_vertices, method, certificate):
    verts = prob.Cn.vertices[np.asarray(local_vertices, dtype=np.int64)]
    H = Subgraph(box=prob.cfg.box, vertices=verts)
    bnd = len(open_edge_boundary(H, prob.cfg))
    return CheegerSolution(phi_num=bnd, phi_den=len(H), witness=H,
                           method=method, optimizer_certificate=certificate)


EXACT_BUDGET = 22


def cheeger_exact(prob: CheegerProblem,
                  cap: int | None = None) -> CheegerSolution:
    """Exact minimum of boundary/size over connected subsets up to the cap.

    Optimizers decompose into connected optimal pieces, so the minimum over
    connected sets equals the global one; enumeration is fixed-root canonical
    growth over the open adjacency.  Ties prefer the lexicographically
    smallest witness.  cap overrides the problem's |Cn|/d! default.
    """
    m = len(prob.Cn)
    if m > EXACT_BUDGET:
        raise BudgetExceeded(f"|Cn| = {m} exceeds the exact budget "
                             f"{EXACT_BUDGET}")
    cap = prob.cap if cap is None else cap
    if cap < 1:
        raise InfeasibleCap("volume cap is below one vertex")
    _, indptr, indices, deg_total = prob._graph

    adj = [sorted(set(indices[indptr[v]:indptr[v + 1]].tolist()))
           for v in range(m)]
    best = [None]  # (num, den, sorted tuple)

    def consider(bnd, cur):
        size = len(cur)
        if best[0] is None or bnd * best[0][1] < best[0][0] * size:
            best[0] = (bnd, size, tuple(sorted(cur)))
        elif bnd * best[0][1] == best[0][0] * size:
            t = tuple(sorted(cur))
            if t < best[0][2]:
                best[0] = (bnd, size, t)

    def grow(cur, frontier, forbidden, bnd):
        consider(bnd, cur)
        if len(cur) == cap:
            return
        blocked = set(forbidden)
        for w in sorted(frontier):
            if w in blocked:
                continue
            add_nbrs = {x for x in adj[w] if x not in cur and x != w
                        and x not in blocked}
            nbrs_in = sum(1 for x in adj[w] if x in cur)
            grow(cur | {w}, (frontier | add_nbrs) - cur - {w},
                 set(blocked), bnd + int(deg_total[w]) - 2 * nbrs_in)
            blocked.add(w)

    for root in range(m):
        grow({root}, {x for x in adj[root] if x > root},
             set(range(root)), int(deg_total[root]))

    num, den, verts = best[0]
    sol = _solution(prob, list(verts), method="exact", certificate=True)
    assert (sol.phi_num, sol.phi_den) == (num, den)
    return sol


@dataclass(frozen=True)
class AnnealParams:
    restarts: int = 8
    steps: int = 200_000
    t0: float = 1.0
    cooling: float = 0.995
    p_translate: float = 0.002
    # initial temperature factor for restarts seeded with a carve: the hot
    # phase of a fresh anneal would destroy the seed before refining it
    t0_seeded: float = 0.05


def cheeger_anneal(prob: CheegerProblem, params: AnnealParams, seed: int,
                   seed_sets=(), cap: int | None = None) -> CheegerSolution:
    """Simulated annealing over connected subsets; deterministic given seed.

    seed_sets (global vertex indices) pre-populate cold-started restarts,
    e.g. with a polytope carve; each is reduced to its largest open component
    and truncated to the cap before use.  An unseeded hot run always executes
    as well, and the better outcome wins (exact value compare, then
    lexicographic witness).
    """
    from ._rng import derive_seed

    cap = prob.cap if cap is None else cap
    if cap < 1:
        raise InfeasibleCap("volume cap is below one vertex")
    local, indptr, indices, deg_total = prob._graph
    prepared = []
    for s in seed_sets:
        loc = local[np.asarray(s, dtype=np.int64)]
        loc = loc[loc >= 0]
        if len(loc) == 0:
            continue
        comp = _largest_component(indptr, indices, loc)
        if len(comp) > cap:
            comp = comp[:cap]
            comp = _largest_component(indptr, indices, comp)
        if len(comp):
            prepared.append(_greedy_refine(indptr, indices, deg_total,
                                           np.sort(comp), cap))

    runs = []
    if prepared:
        runs.append((len(prepared), params.t0 * params.t0_seeded, prepared,
                     derive_seed(seed, 1)))
    runs.append((params.restarts, params.t0, [], derive_seed(seed, 2)))

    best = None
    for restarts, t0, seeds, run_seed in runs:
        b, s, verts = kernels.anneal_connected(
            indptr, indices, deg_total, prob.shift_maps, cap, run_seed,
            restarts, params.steps, t0, params.cooling,
            params.p_translate, seeds)
        verts = _greedy_refine(indptr, indices, deg_total, verts, cap)
        member = np.zeros(len(prob.Cn), dtype=bool)
        member[verts] = True
        bnd = int(sum(int(deg_total[v])
                      - sum(1 for j in range(indptr[v], indptr[v + 1])
                            if member[indices[j]]) for v in verts.tolist()))
        cand = (bnd, len(verts), tuple(verts.tolist()))
        if best is None or cand[0] * best[1] < best[0] * cand[1] \
                or (cand[0] * best[1] == best[0] * cand[1]
                    and cand[2] < best[2]):
            best = cand
    return _solution(prob, list(best[2]), method="anneal", certificate=False)


def _greedy_refine(indptr, indices, deg_total, start, cap):
    """Deterministic plateau-tolerant hill climbing around a connected set.

    Alternates growth (add the boundary candidate with the smallest boundary
    increment) and shrinking (drop the costliest articulation-safe vertex),
    keeping the exact best visited state.  Plateau moves are allowed for a
    budget proportional to the perimeter scale, which lets whole facets slide
    even though each single step is neutral or slightly uphill.
    """
    H = set(int(v) for v in start)
    if not H:
        return start

    def count_in(w):
        return sum(1 for j in range(indptr[w], indptr[w + 1])
                   if int(indices[j]) in H)

    def boundary():
        return sum(int(deg_total[v]) - count_in(v) for v in H)

    b, s = boundary(), len(H)
    best = (b, s, tuple(sorted(H)))
    plateau = max(32, 2 * int(cap ** 0.5))

    def note():
        nonlocal best
        t = (b, s, tuple(sorted(H)))
        if t[0] * best[1] < best[0] * t[1] or \
                (t[0] * best[1] == best[0] * t[1] and t[2] < best[2]):
            best = t
            return True
        return False

    improved = True
    while improved:
        improved = False
        # grow
        cands = {}
        for v in H:
            for j in range(indptr[v], indptr[v + 1]):
                w = int(indices[j])
                if w not in H:
                    cands[w] = cands.get(w, 0) + 1
        bad = 0
        while s < cap and cands and bad <= plateau:
            w = min(cands, key=lambda u: (int(deg_total[u]) - 2 * cands[u],
                                          u))
            db = int(deg_total[w]) - 2 * cands[w]
            H.add(w)
            b += db
            s += 1
            del cands[w]
            for j in range(indptr[w], indptr[w + 1]):
                u = int(indices[j])
                if u not in H:
                    cands[u] = cands.get(u, 0) + 1
            if note():
                bad = 0
                improved = True
            else:
                bad += 1
        H = set(best[2])
        b, s = best[0], best[1]
        # shrink
        bad = 0
        while s > 1 and bad <= plateau:
            order = sorted(H, key=lambda v: (-(int(deg_total[v])
                                              - 2 * count_in(v)), v))
            removed = False
            for v in order[:8]:
                if not _removal_safe(indptr, indices, H, v):
                    continue
                db = int(deg_total[v]) - 2 * count_in(v)
                H.discard(v)
                b -= db
                s -= 1
                removed = True
                break
            if not removed:
                break
            if note():
                bad = 0
                improved = True
            else:
                bad += 1
        H = set(best[2])
        b, s = best[0], best[1]
    return np.array(best[2], dtype=np.int64)


def _removal_safe(indptr, indices, H, v):
    nbrs = [int(indices[j]) for j in range(indptr[v], indptr[v + 1])
            if int(indices[j]) in H]
    if len(nbrs) <= 1:
        return True
    want = set(nbrs)
    seen = {nbrs[0]}
    stack = [nbrs[0]]
    while stack and not want <= seen:
        u = stack.pop()
        for j in range(indptr[u], indptr[u + 1]):
            w = int(indices[j])
            if w != v and w in H and w not in seen:
                seen.add(w)
                stack.append(w)
    return want <= seen


def _largest_component(indptr, indices, members) -> np.ndarray:
    member = set(int(x) for x in members)
    best = []
    seen = set()
    for start in sorted(member):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            u = stack.pop()
            for j in range(indptr[u], indptr[u + 1]):
                w = int(indices[j])
                if w in member and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    stack.append(w)
        if len(comp) > len(best):
            best = comp
    return np.array(sorted(best), dtype=np.int64)


# ---------------------------------------------------------------------------
# polytope carving


def _shrink_polygon_2d(poly: np.ndarray, margin: float) -> np.ndarray:
    """Inward offset of a convex polygon (CCW cycle) by margin."""
    k = len(poly)
    out = poly
    for t in range(k):
        a, b = poly[t], poly[(t + 1) % k]
        edge = b - a
        nrm = np.array([edge[1], -edge[0]])
        nrm /= np.linalg.norm(nrm)
        center = poly.mean(axis=0)
        if (center - a) @ nrm > 0:
            nrm = -nrm
        out = _clip_polygon(out, nrm, float(a @ nrm) - margin)
        if len(out) == 0:
            return out
    return out


def _face_cylinders(P: Polytope, h: float, n: int, eta: float):
    """Cylinder specs covering the shrunken faces of the scaled polytope."""
    specs = []
    d = P.d
    if d == 2:
        for f in P.faces:
            a, b = P.vertices[list(f.vertex_ids)]
            length = float(np.linalg.norm(b - a))
            half = length / 2.0 - eta
            if half <= 1.0 / n:
                continue
            u = (b - a) / length
            center = (a + b) / 2.0
            frame = Frame(v=f.normal, basis=u[None, :])
            specs.append(CylinderSpec(
                kind="square", center=center, frame=frame, half_width=half,
                height=h, scale=float(n), min_face_sep=DESK_FACE_SEP))
        return specs
    for f in P.faces:
        ids = list(f.vertex_ids)
        nrm = f.normal
        ref = np.zeros(3)
        ref[int(np.argmin(np.abs(nrm)))] = 1.0
        u1 = np.cross(nrm, ref)
        u1 /= np.linalg.norm(u1)
        u2 = np.cross(nrm, u1)
        origin = P.vertices[ids[0]]
        flat = np.stack([(P.vertices[i] - origin) @ np.stack([u1, u2]).T
                         for i in ids])
        shrunk = _shrink_polygon_2d(flat, eta)
        if len(shrunk) < 3:
            continue
        side = max(h, 3.0 / n)
        lo = shrunk.min(axis=0)
        hi = shrunk.max(axis=0)
        n1 = max(1, int(np.floor((hi[0] - lo[0]) / side)))
        n2 = max(1, int(np.floor((hi[1] - lo[1]) / side)))
        for i in range(n1):
            for j in range(n2):
                c2 = lo + side * np.array([i + 0.5, j + 0.5])
                corners = c2[None, :] + 0.5 * side * np.array(
                    [[1, 1], [1, -1], [-1, 1], [-1, -1]])
                if not all(_point_in_polygon_2d(shrunk, c) for c in corners):
                    continue
                center = origin + c2[0] * u1 + c2[1] * u2
                frame = Frame(v=nrm, basis=np.stack([u1, u2]))
                specs.append(CylinderSpec(
                    kind="square", center=center, frame=frame,
                    half_width=side / 2.0, height=h, scale=float(n),
                    min_face_sep=DESK_FACE_SEP))
    return specs


def _point_in_polygon_2d(poly: np.ndarray, p) -> bool:
    k = len(poly)
    for t in range(k):
        a, b = poly[t], poly[(t + 1) % k]
        if np.cross(b - a, p - a) < -GEOM_TOL:
            return False
    return True


def carve_polytope(prob: CheegerProblem, P: Polytope, h: float = 0.1
                   ) -> CheegerSolution:
    """Subgraph carved from the giant cluster along a polytope blueprint.

    Shrinks P until the expected enclosed volume respects the cap, cuts a
    minimal open cutset in a thin cylinder over each (shrunken) face, seals
    the uncovered boundary region with an explicit edge set, and returns the
    core-box giant-cluster vertices that the combined edge set separates from
    the padded hull.  The open edge boundary of the result is contained in
    the combined edge set by construction.
    """
    box = prob.cfg.box
    d, n = box.d, box.n
    if np.abs(P.vertices).max() > 1.0 + GEOM_TOL:
        raise ValueError("polytope must sit inside the unit box")
    if P.volume > reference_volume(d) + GEOM_TOL:
        raise ValueError("polytope volume exceeds the cap normalization")
    cap = prob.cap
    if cap < 1:
        raise InfeasibleCap("volume cap is below one vertex")
    h = max(h, 2.2 / n)
    theta_hat = len(prob.Cn) / (2 * n + 1) ** d

    expected = theta_hat * (n ** d) * P.volume
    if expected <= 0:
        raise CarveFailed("degenerate polytope")
    delta = 1.0 - (0.9 * cap / max(expected, 1e-12)) ** (1.0 / d)
    delta = float(np.clip(delta, 0.02, 0.5))

    last_size = None
    eta_extra = 0.0
    for attempt in range(8):
        try:
            sol = _carve_once(prob, P, h, delta, eta_extra)
        except _CylinderOverlap:
            eta_extra += 2.0 / n
            continue
        if sol is not None and 1 <= len(sol.witness) <= cap:
            return sol
        last_size = None if sol is None else len(sol.witness)
        delta = 1.0 - 0.93 * (1.0 - delta)
    raise CarveFailed(f"no feasible carve after retries "
                      f"(last size {last_size}, cap {cap})")


class _CylinderOverlap(Exception):
    pass


def _carve_once(prob: CheegerProblem, P: Polytope, h: float, delta: float,
                eta_extra: float = 0.0):
    box = prob.cfg.box
    d, n = box.d, box.n
    Pd = P.scale(1.0 - delta)
    # margin just wide enough to keep neighboring face cylinders apart at
    # their corners; the overlap check retries with a wider margin if the
    # corner angles need it
    eta = 0.5 * h + 1.0 / n + eta_extra
    specs = _face_cylinders(Pd, h, n, eta)
    if not specs:
        return None
    geos = [discrete_cylinder(s, strict=False) for s in specs]
    # face cylinders must not overlap; oblique corners may need wider margins
    seen = set()
    for geo in geos:
        if not geo.suitable:
            continue
        pts = {tuple(c) for c in geo.vertices.tolist()}
        if pts & seen:
            raise _CylinderOverlap
        seen |= pts

    removed = []
    for spec, geo in zip(specs, geos):
        if not geo.suitable:
            continue
        res = xi_hemi(prob.cfg, spec)
        removed.extend(res.witness.tolist())

    removed.extend(_seal_edges(prob.cfg, Pd, specs, h, n).tolist())
    # also seal the unshrunk blueprint so the result stays inside n*P even
    # where a face cutset sits beyond the shrunken boundary
    removed.extend(_crossing_edges(prob.cfg, P, n).tolist())
    removed_set = np.unique(np.array(removed, dtype=np.int64)) \
        if removed else np.empty(0, dtype=np.int64)

    eu, ev = prob.cfg.open_edge_arrays()
    open_ids = np.flatnonzero(prob.cfg.bits == 1)
    keep = ~np.isin(open_ids, removed_set)
    labels = kernels.min_labels(box.n_vertices, eu[keep], ev[keep])
    hull_labels = np.unique(labels[box.hull_vertices])
    reached = np.isin(labels[prob.Cn.vertices], hull_labels)
    local_H = np.flatnonzero(~reached)
    if len(local_H) == 0:
        return None
    # the enclosed set splits into open components (separated pockets can be
    # sealed off near window rims); each is itself enclosed, and the ratio
    # minimum is attained on a single component, so return the best one
    comp_labels = labels[prob.Cn.vertices[local_H]]
    sol = None
    for lbl in np.unique(comp_labels):
        cand = _solution(prob, local_H[comp_labels == lbl], method="carve",
                         certificate=False)
        if sol is None or cand.better_than(sol):
            sol = cand
    boundary = open_edge_boundary(sol.witness, prob.cfg)
    if not np.all(np.isin(boundary, removed_set)):
        raise CarveFailed("carved boundary leaks outside the cut edge set")
    return sol


def _crossing_edges(cfg: Configuration, P: Polytope, n: int) -> np.ndarray:
    """Edge positions crossing the boundary of the scaled polytope n*P."""
    box = cfg.box
    cu = box.coords_of(box.edges_u).astype(float)
    cv = box.coords_of(box.edges_v).astype(float)
    bn = n * P.b
    inside_u = (cu @ P.A.T - bn[None, :] <= GEOM_TOL).all(axis=1)
    inside_v = (cv @ P.A.T - bn[None, :] <= GEOM_TOL).all(axis=1)
    return np.flatnonzero(inside_u != inside_v)


def _seal_edges(cfg: Configuration, Pd: Polytope, specs, h: float,
                n: int) -> np.ndarray:
    """Edges sealing the scaled polytope boundary outside the face windows.

    Every edge crossing the boundary of n*Pd is cut unless its midpoint lies
    well inside a face window: window crossings are guarded by the cylinder's
    hemisphere cutset, since any path through a cylinder enters and leaves at
    shell vertices and a plane-crossing visit joins the two hemispheres.
    """
    box = cfg.box
    cu = box.coords_of(box.edges_u).astype(float)
    cv = box.coords_of(box.edges_v).astype(float)
    bn = n * Pd.b
    su = cu @ Pd.A.T - bn[None, :]
    sv = cv @ Pd.A.T - bn[None, :]
    inside_u = (su <= GEOM_TOL).all(axis=1)
    inside_v = (sv <= GEOM_TOL).all(axis=1)
    crossing = inside_u != inside_v
    mid = 0.5 * (cu + cv)

    in_window = np.zeros(len(cu), dtype=bool)
    hn = h * n
    for spec in specs:
        center = n * spec.center
        t = (mid - center) @ spec.frame.v
        s = (mid - center) @ spec.frame.basis.T
        wn = spec.half_width * n
        lateral = np.abs(s).max(axis=1)
        in_window |= (np.abs(t) <= hn - 1.0) & (lateral <= wn - 1.3)
    return np.flatnonzero(crossing & ~in_window)


# ---------------------------------------------------------------------------
# empirical measures and the dyadic metric


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Dyadic cube masses at scales 0..K on the box [-1, 1]^d.

    masses[k] is the flat array over the 2^(dk) scale-k cubes; counts holds
    the exact integer vertex counts (with denominator n^d) when the measure
    comes from a vertex set, None for density measures.
    """

    d: int
    K: int
    masses: tuple
    counts: tuple | None = None
    n: int | None = None

    @property
    def total(self) -> float:
        return float(self.masses[0].sum())

    def consistency_error(self) -> float:
        worst = 0.0
        for k in range(self.K):
            parent = _aggregate_children(self.masses[k + 1], self.d)
            worst = max(worst, float(np.abs(parent - self.masses[k]).max()))
        return worst


def _aggregate_children(child: np.ndarray, d: int) -> np.ndarray:
    k1 = round(math.log2(len(child)) / d)
    side = 2 ** k1
    arr = child.reshape((side,) * d)
    for ax in range(d):
        arr = arr.reshape(arr.shape[:ax] + (side // 2, 2)
                          + arr.shape[ax + 1:])
        arr = arr.sum(axis=ax + 1)
    return arr.reshape(-1)


def _cube_index(coords: np.ndarray, n: int, k: int) -> np.ndarray:
    """Scale-k dyadic cube of each lattice point, exact integer arithmetic.

    Points on a dyadic boundary go to the lexicographically smallest
    containing cube (the lower one along each axis).
    """
    num = (coords.astype(np.int64) + n) * (2 ** max(k - 1, 0))
    if k == 0:
        return np.zeros(len(coords), dtype=np.int64)
    c = -(-num // n) - 1  # ceil division
    c = np.maximum(c, 0)
    idx = np.zeros(len(coords), dtype=np.int64)
    for i in range(coords.shape[1]):
        idx = idx * (2 ** k) + c[:, i]
    return idx


def empirical_measure(H: Subgraph, n: int, K: int) -> EmpiricalMeasure:
    """Mass n^-d per vertex of H, accumulated over dyadic cubes."""
    coords = H.coords
    if len(coords) and np.abs(coords).max() > n:
        raise ValueError("vertices outside the core box")
    d = H.box.d
    denom = float(n) ** d
    masses, counts = [], []
    for k in range(K + 1):
        cnt = np.zeros(2 ** (d * k), dtype=np.int64)
        if len(coords):
            np.add.at(cnt, _cube_index(coords, n, k), 1)
        counts.append(cnt)
        masses.append(cnt / denom)
    return EmpiricalMeasure(d=d, K=K, masses=tuple(masses),
                            counts=tuple(counts), n=n)


def d_metric_detail(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    """(value, truncation bound) of the dyadic comparison metric."""
    if mu.K != nu.K or mu.d != nu.d:
        raise ScaleMismatch("measures use different resolution")
    total = 0.0
    for k in range(mu.K + 1):
        diff = float(np.abs(mu.masses[k] - nu.masses[k]).sum())
        total += diff / (2 ** k * 2 ** (mu.d * k))
    bound = 2.0 ** (-mu.K) * (mu.total + nu.total)
    return total, bound


def d_metric(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    return d_metric_detail(mu, nu)[0]


def measure_to_csv(mu: EmpiricalMeasure, path) -> None:
    """Fixed-schema CSV: scale k, flat cube index, mass."""
    import csv as _csv

    with open(str(path), "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "cube", "mass"])
        for k in range(mu.K + 1):
            for idx in np.flatnonzero(mu.masses[k]):
                writer.writerow([k, int(idx), repr(float(mu.masses[k][idx]))])


def _zero_measure(d: int, K: int) -> EmpiricalMeasure:
    return EmpiricalMeasure(d=d, K=K, masses=tuple(
        np.zeros(2 ** (d * k)) for k in range(K + 1)))


def measure_of_set(E: Polytope, theta: float, n: int, K: int
                   ) -> EmpiricalMeasure:
    """Density-theta measure of E: mass theta * vol(Q cap E) per cube Q.

    Finest-scale cubes are clipped exactly against E; coarser scales
    aggregate children, so parent/child consistency is exact up to float
    summation.
    """
    d = E.d
    side = 2 ** K
    width = 2.0 / side
    corners1d = -1.0 + width * np.arange(side + 1)
    grids = np.meshgrid(*([corners1d] * d), indexing="ij")
    corners = np.stack([g.ravel() for g in grids], axis=1)
    slack = corners @ E.A.T - E.b[None, :]
    inside = (slack <= GEOM_TOL).all(axis=1).reshape((side + 1,) * d)
    outside_per_h = (slack > GEOM_TOL).reshape((side + 1,) * d + (-1,))

    def cube_slice(arr):
        views = []
        for offs in np.ndindex(*((2,) * d)):
            sl = tuple(slice(o, o + side) for o in offs)
            views.append(arr[sl])
        return views

    all_in = np.ones((side,) * d, dtype=bool)
    for v in cube_slice(inside):
        all_in &= v
    # cube misses E if all its corners violate one common half-space
    per_h = np.ones((side,) * d + (E.A.shape[0],), dtype=bool)
    for v in cube_slice(outside_per_h):
        per_h &= v
    sep = per_h.any(axis=-1)

    fine = np.zeros((side,) * d)
    fine[all_in] = width ** d
    boundary = ~all_in & ~sep
    if d == 2:
        halfplanes = [(float(a[0]), float(a[1]), float(o))
                      for a, o in zip(E.A, E.b)]
        for i, j in zip(*np.nonzero(boundary)):
            x0, y0 = -1.0 + width * i, -1.0 + width * j
            pts = [(x0, y0), (x0 + width, y0), (x0 + width, y0 + width),
                   (x0, y0 + width)]
            for ax, ay, off in halfplanes:
                pts = _clip_pts(pts, ax, ay, off)
                if not pts:
                    break
            fine[i, j] = _shoelace_pts(pts)
    else:
        from .wulff import box_polytope, intersection_volume

        for idx in zip(*np.nonzero(boundary)):
            lo = -1.0 + width * np.array(idx, dtype=float)
            cube = box_polytope(lo, lo + width)
            fine.flat[np.ravel_multi_index(idx, fine.shape)] = \
                intersection_volume(E, cube)
    fine = theta * fine.reshape(-1)
    masses = [fine]
    for k in range(K, 0, -1):
        masses.append(_aggregate_children(masses[-1], d))
    masses.reverse()
    return EmpiricalMeasure(d=d, K=K, masses=tuple(masses), n=n)


def _translate_bounds(W: Polytope) -> tuple[np.ndarray, np.ndarray]:
    lo = -1.0 - W.vertices.min(axis=0)
    hi = 1.0 - W.vertices.max(axis=0)
    return lo, hi


def _refine_grid(fn, lo, hi, levels=3, factor=4.0, pts=5):
    center = (lo + hi) / 2.0
    radius = (hi - lo) / 2.0
    best_x, best_v = None, math.inf
    for _ in range(levels):
        axes = [np.linspace(c - r, c + r, pts)
                for c, r in zip(center, radius)]
        grid = np.meshgrid(*axes, indexing="ij")
        cand = np.stack([g.ravel() for g in grid], axis=1)
        cand = np.clip(cand, lo, hi)
        for x in cand:
            v = fn(x)
            if v < best_v - 1e-15:
                best_v, best_x = v, x.copy()
        center = best_x
        radius = radius / factor
    return best_x, best_v


def distance_to_wulff_set(mu: EmpiricalMeasure, W: Polytope, theta: float,
                          levels: int = 3) -> tuple[float, np.ndarray]:
    """min over translates x (with W + x inside the box) of the dyadic
    distance between mu and the density measure of W + x.

    Coarse-to-fine translation grid.
    """
    lo, hi = _translate_bounds(W)
    if np.any(lo > hi):
        raise ValueError("W does not fit inside the unit box")

    def objective(x):
        nu = measure_of_set(W.translate(x), theta, mu.n or 1, mu.K)
        return d_metric(mu, nu)

    x, v = _refine_grid(objective, lo, hi, levels=levels)
    return v, x


def l1_shape_distance(H: Subgraph, cfg: Configuration, W: Polytope,
                      levels: int = 3, Cn: Subgraph | None = None) -> float:
    """min over translates of the normalized symmetric difference between H
    and the giant-cluster restriction of the scaled, translated crystal."""
    box = cfg.box
    n = box.n
    Cn = giant_cluster_in_box(cfg) if Cn is None else Cn
    coords = Cn.coords.astype(float)
    in_H = np.isin(Cn.vertices, H.vertices)
    lo, hi = _translate_bounds(W)
    if np.any(lo > hi):
        raise ValueError("W does not fit inside the unit box")

    def objective(x):
        slack = coords @ W.A.T - n * (W.b + W.A @ x)[None, :]
        inside = (slack <= GEOM_TOL * n).all(axis=1)
        sym = int((inside != in_H).sum()) + (len(H) - int(in_H.sum()))
        return sym / float(n) ** box.d

    _, v = _refine_grid(objective, lo, hi, levels=levels)
    return v
