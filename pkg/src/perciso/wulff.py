"""Wulff crystal geometry: half-space intersections, volumes, energies.

The crystal for a norm table is the intersection of half-spaces
{x : x.v <= beta(v)} over tabulated directions, i.e. the unit ball of the
dual norm, then dilated to the reference volume 2^d/d!.  Polytopes are built
by the dual transform (half-space -> point v/offset) plus a convex hull; no
external geometry library is used.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from ._rng import Stream
from .surface import NormTable

GEOM_TOL = 1e-9      # geometric predicates (point-on-plane, redundancy)
MERGE_TOL = 1e-7     # vertex merging after plane solves
REPORT_TOL = 1e-6    # tolerances quoted in reports and inequality tests


class DegenerateNorm(Exception):
    """Norm table with a nonpositive value; no crystal exists."""


class UnboundedCrystal(Exception):
    """Table directions do not positively span; intersection is unbounded."""


class DegeneratePolytope(Exception):
    """Half-space set with empty or lower-dimensional intersection."""


@dataclass(frozen=True)
class Face:
    vertex_ids: tuple
    normal: np.ndarray
    offset: float
    measure: float


@dataclass(frozen=True)
class Polytope:
    """Bounded convex polytope: half-spaces plus derived vertex/face data."""

    A: np.ndarray                 # (m, d) unit outward normals
    b: np.ndarray                 # (m,) offsets
    vertices: np.ndarray          # (k, d)
    faces: tuple = field(repr=False)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def volume(self) -> float:
        # divergence theorem; exact for polytopes with outward faces
        return sum(f.offset * f.measure for f in self.faces) / self.d

    def contains(self, pts, tol=GEOM_TOL) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts @ self.A.T - self.b[None, :] <= tol).all(axis=1)

    def translate(self, x) -> "Polytope":
        x = np.asarray(x, dtype=float)
        return Polytope(A=self.A, b=self.b + self.A @ x,
                        vertices=self.vertices + x,
                        faces=tuple(replace(f, offset=f.offset
                                            + float(f.normal @ x))
                                    for f in self.faces))

    def scale(self, s: float) -> "Polytope":
        if s <= 0:
            raise ValueError("scale factor must be positive")
        return Polytope(A=self.A, b=self.b * s, vertices=self.vertices * s,
                        faces=tuple(replace(f, offset=f.offset * s,
                                            measure=f.measure
                                            * s ** (self.d - 1))
                                    for f in self.faces))


def _hull_2d(pts: np.ndarray, tol: float):
    """Monotone chain; collinear points are dropped.  Returns CCW indices."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def build(ids):
        out = []
        for i in ids:
            while len(out) >= 2:
                o, a = pts[out[-2]], pts[out[-1]]
                cross = ((a[0] - o[0]) * (pts[i][1] - o[1])
                         - (a[1] - o[1]) * (pts[i][0] - o[0]))
                if cross <= tol:
                    out.pop()
                else:
                    break
            out.append(i)
        return out

    lower = build(order)
    upper = build(order[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegeneratePolytope("points are collinear")
    return hull


def _hull_3d(pts: np.ndarray, tol: float):
    """Incremental convex hull; returns triangles (i, j, k), outward order.

    Points within tol of every supporting plane they could see are treated
    as interior, so inputs on facets or edges never become hull vertices.
    """
    n = len(pts)
    if n < 4:
        raise DegeneratePolytope("need at least 4 points")

    # initial simplex: spread points
    i0 = 0
    i1 = max(range(n), key=lambda i: np.linalg.norm(pts[i] - pts[i0]))
    if np.linalg.norm(pts[i1] - pts[i0]) < tol:
        raise DegeneratePolytope("all points coincide")
    d01 = pts[i1] - pts[i0]
    i2 = max(range(n), key=lambda i: np.linalg.norm(
        np.cross(d01, pts[i] - pts[i0])))
    if np.linalg.norm(np.cross(d01, pts[i2] - pts[i0])) < tol:
        raise DegeneratePolytope("all points collinear")
    nrm = np.cross(d01, pts[i2] - pts[i0])
    i3 = max(range(n), key=lambda i: abs(nrm @ (pts[i] - pts[i0])))
    if abs(nrm @ (pts[i3] - pts[i0])) < tol:
        raise DegeneratePolytope("all points coplanar")

    def make_face(a, b, c, inside):
        normal = np.cross(pts[b] - pts[a], pts[c] - pts[a])
        if normal @ (pts[inside] - pts[a]) > 0:
            b, c = c, b
            normal = -normal
        return [a, b, c, normal, float(normal @ pts[a])]

    centroid_ids = [i0, i1, i2, i3]
    faces = []
    for tri in ((i0, i1, i2, i3), (i0, i1, i3, i2), (i0, i2, i3, i1),
                (i1, i2, i3, i0)):
        faces.append(make_face(*tri))

    interior = pts[centroid_ids].mean(axis=0)
    rest = [i for i in range(n) if i not in set(centroid_ids)]
    for p in rest:
        x = pts[p]
        visible = [f for f in faces
                   if f[3] @ x - f[4] > tol * max(1.0, np.linalg.norm(f[3]))]
        if not visible:
            continue
        visible_set = {id(f) for f in visible}
        # horizon: directed edges of visible faces not shared with another
        # visible face
        edge_count = {}
        for f in visible:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                edge_count[(a, b)] = edge_count.get((a, b), 0) + 1
        horizon = []
        for f in visible:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                if edge_count.get((b, a), 0) == 0:
                    horizon.append((a, b))
        faces = [f for f in faces if id(f) not in visible_set]
        for a, b in horizon:
            nrm = np.cross(pts[b] - pts[a], x - pts[a])
            if np.linalg.norm(nrm) < tol:
                continue
            f = [a, b, p, nrm, float(nrm @ pts[a])]
            if nrm @ (interior - pts[a]) > 0:
                f = [b, a, p, -nrm, float(-nrm @ pts[a])]
            faces.append(f)
    return [(f[0], f[1], f[2]) for f in faces]


def _order_face_cycle(points: np.ndarray, ids, normal):
    """Order coplanar vertex ids CCW around the outward normal."""
    normal = normal / np.linalg.norm(normal)
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(normal)))] = 1.0
    u1 = np.cross(normal, ref)
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(normal, u1)
    center = points[ids].mean(axis=0)
    ang = [math.atan2((points[i] - center) @ u2, (points[i] - center) @ u1)
           for i in ids]
    order = sorted(range(len(ids)), key=lambda k: ang[k])
    cycle = [ids[k] for k in order]
    # u1 x u2 = -normal for this frame; reverse to make shoelace orientation
    # agree with the outward normal
    area2 = 0.0
    for k in range(len(cycle)):
        pa = points[cycle[k]] - center
        pb = points[cycle[(k + 1) % len(cycle)]] - center
        area2 += (pa @ u1) * (pb @ u2) - (pa @ u2) * (pb @ u1)
    if area2 < 0:
        cycle.reverse()
    return cycle


def _polygon_area_3d(points: np.ndarray, cycle) -> float:
    total = np.zeros(3)
    p0 = points[cycle[0]]
    for k in range(1, len(cycle) - 1):
        total += np.cross(points[cycle[k]] - p0, points[cycle[k + 1]] - p0)
    return 0.5 * float(np.linalg.norm(total))


def _merge_points(raw: np.ndarray, tol: float):
    """Deduplicate near-identical points; returns (points, map raw->merged)."""
    merged = []
    mapping = np.empty(len(raw), dtype=np.int64)
    for i, p in enumerate(raw):
        for j, q in enumerate(merged):
            if np.abs(p - q).max() <= tol:
                mapping[i] = j
                break
        else:
            mapping[i] = len(merged)
            merged.append(p)
    return np.array(merged), mapping


def chebyshev_center(A: np.ndarray, b: np.ndarray):
    """(center, radius) of the largest ball inside the half-space set."""
    m, d = A.shape
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.concatenate([A, np.ones((m, 1))], axis=1)
    res = linprog(c, A_ub=A_ub, b_ub=b,
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if not res.success:
        return None, 0.0
    return res.x[:d], float(res.x[d])


def halfspace_polytope(A, b, interior=None) -> Polytope:
    """Bounded intersection of half-spaces {x : A x <= b} as a Polytope.

    Normals need not be unit; they are normalized here.  When no interior
    point is supplied a Chebyshev center is computed; degenerate (empty or
    flat) intersections raise DegeneratePolytope, unbounded ones
    UnboundedCrystal.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms < GEOM_TOL):
        raise ValueError("zero normal in half-space set")
    A = A / norms[:, None]
    b = b / norms
    d = A.shape[1]
    if interior is None:
        interior, radius = chebyshev_center(A, b)
        if interior is None or radius <= GEOM_TOL:
            raise DegeneratePolytope("no interior point")
    interior = np.asarray(interior, dtype=float)
    b_shift = b - A @ interior
    if np.any(b_shift <= GEOM_TOL):
        raise DegeneratePolytope("interior point too close to the boundary")
    dual = A / b_shift[:, None]
    scale = max(1.0, float(np.abs(dual).max()))
    tol = GEOM_TOL * scale

    if d == 2:
        hull = _hull_2d(dual, tol)
        k = len(hull)
        raw = []
        for t in range(k):
            i, j = hull[t], hull[(t + 1) % k]
            mat = np.stack([A[i], A[j]])
            try:
                raw.append(np.linalg.solve(mat, np.array([b_shift[i],
                                                          b_shift[j]])))
            except np.linalg.LinAlgError as exc:
                raise DegeneratePolytope("parallel adjacent half-spaces") \
                    from exc
        verts = np.array(raw) + interior
        faces = []
        for t in range(k):
            i = hull[t]
            va = (t - 1) % k
            vb = t
            length = float(np.linalg.norm(verts[vb] - verts[va]))
            faces.append(Face(vertex_ids=(va, vb), normal=A[i],
                              offset=float(b[i]), measure=length))
        return Polytope(A=A[hull], b=b[hull], vertices=verts,
                        faces=tuple(faces))

    if d == 3:
        tris = _hull_3d(dual, tol)
        raw = []
        for (i, j, k3) in tris:
            mat = np.stack([A[i], A[j], A[k3]])
            rhs = np.array([b_shift[i], b_shift[j], b_shift[k3]])
            try:
                raw.append(np.linalg.solve(mat, rhs))
            except np.linalg.LinAlgError as exc:
                raise DegeneratePolytope("degenerate facet plane") from exc
        verts_raw = np.array(raw)
        vscale = max(1.0, float(np.abs(verts_raw).max()))
        verts, vmap = _merge_points(verts_raw, MERGE_TOL * vscale)
        incident = {}
        for t, tri in enumerate(tris):
            for i in tri:
                incident.setdefault(i, set()).add(int(vmap[t]))
        active, faces = [], []
        for i in sorted(incident):
            ids = sorted(incident[i])
            if len(ids) < 3:
                continue
            cycle = _order_face_cycle(verts, ids, A[i])
            area = _polygon_area_3d(verts, cycle)
            if area <= GEOM_TOL:
                continue
            active.append(i)
            faces.append(Face(vertex_ids=tuple(cycle), normal=A[i],
                              offset=float(b[i]), measure=area))
        if not faces:
            raise DegeneratePolytope("no two-dimensional faces")
        return Polytope(A=A[active], b=b[active], vertices=verts + interior,
                        faces=tuple(
                            replace(f, offset=f.offset)
                            for f in faces))

    raise NotImplementedError("half-space intersection supports d in {2, 3}")


def wulff_crystal(table: NormTable) -> Polytope:
    """Unit crystal of the table: intersection of {x : x.v <= beta(v)}.

    Redundant (tangent or slack) half-spaces are dropped by the dual hull.
    """
    beta = table.beta
    if np.any(beta <= 0):
        if np.all(beta <= 0):
            raise DegenerateNorm("all table values are nonpositive")
        raise DegenerateNorm("table has a nonpositive value among finite "
                             "ones")
    try:
        return halfspace_polytope(table.directions, beta,
                                  interior=np.zeros(table.d))
    except DegeneratePolytope as exc:
        raise UnboundedCrystal("directions do not positively span") from exc


def volume(P: Polytope) -> float:
    return P.volume


def dilate_to_volume(P: Polytope, target: float) -> Polytope:
    """Scale about the origin so the volume matches target (relative 1e-9)."""
    v = P.volume
    if v <= 0:
        raise DegenerateNorm("cannot dilate a volume-zero polytope")
    if target <= 0:
        raise ValueError("target volume must be positive")
    return P.scale((target / v) ** (1.0 / P.d))


def _unit_crystal(table: NormTable) -> Polytope:
    """Unit crystal of the table, cached on the table object."""
    W = getattr(table, "_unit_crystal_cache", None)
    if W is None:
        W = wulff_crystal(table)
        object.__setattr__(table, "_unit_crystal_cache", W)
    return W


def support_value(table: NormTable, x) -> float:
    """Convex extension of the table: support function of its unit crystal.

    Agrees with the tabulated values at every direction whose half-space
    supports the crystal; in between it is the largest convex extension, so
    the crystal is the exact energy minimizer under it.
    """
    x = np.asarray(x, dtype=float)
    return float(np.max(_unit_crystal(table).vertices @ x))


def surface_energy(P: Polytope, table: NormTable) -> float:
    """Anisotropic surface energy: sum over faces of the face-normal cost
    times the face area.

    Face normals are charged with the convex (support-function) extension of
    the table rather than the nearest-direction estimator: the two agree at
    tabulated directions, and convexity is what makes the crystal's
    optimality an identity rather than an approximation.
    """
    return float(sum(support_value(table, f.normal) * f.measure
                     for f in P.faces))


def continuum_conductance(P: Polytope, table: NormTable,
                          theta: float) -> float:
    """Surface energy over (cluster density times volume)."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return surface_energy(P, table) / (theta * P.volume)


def reference_volume(d: int) -> float:
    """Volume normalization of the crystal: 2^d / d!."""
    return 2.0 ** d / math.factorial(d)


# ---------------------------------------------------------------------------
# distances and intersections


def _point_segment_dist(p, a, b):
    ab = b - a
    t = float(np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_polytope_distance(p, P: Polytope) -> float:
    p = np.asarray(p, dtype=float)
    if P.contains(p)[0]:
        return 0.0
    best = math.inf
    if P.d == 2:
        for f in P.faces:
            a, b = P.vertices[list(f.vertex_ids)]
            best = min(best, _point_segment_dist(p, a, b))
        return best
    for f in P.faces:
        ids = list(f.vertex_ids)
        poly = P.vertices[ids]
        nrm = f.normal
        proj = p - (p @ nrm - f.offset) * nrm
        inside = True
        k = len(ids)
        for t in range(k):
            edge = poly[(t + 1) % k] - poly[t]
            if np.cross(edge, proj - poly[t]) @ nrm < -GEOM_TOL:
                inside = False
                break
        if inside:
            best = min(best, abs(float(p @ nrm - f.offset)))
        else:
            for t in range(k):
                best = min(best, _point_segment_dist(p, poly[t],
                                                     poly[(t + 1) % k]))
    return best


def hausdorff_distance(P: Polytope, Q: Polytope) -> float:
    """Hausdorff distance between convex polytopes (attained at vertices)."""
    a = max(point_polytope_distance(v, Q) for v in P.vertices)
    b = max(point_polytope_distance(v, P) for v in Q.vertices)
    return max(a, b)


def _clip_pts(pts, ax, ay, offset):
    """Sutherland-Hodgman clip of a vertex-tuple polygon by a half-plane.

    Scalar arithmetic on tuples: these polygons are tiny and the routine
    sits in the inner loop of the cube clipping.
    """
    k = len(pts)
    off = offset + GEOM_TOL
    dots = [ax * x + ay * y for x, y in pts]
    out = []
    for i in range(k):
        j = i + 1 if i + 1 < k else 0
        ci, cj = dots[i] <= off, dots[j] <= off
        if ci:
            out.append(pts[i])
        if ci != cj:
            t = (offset - dots[i]) / (dots[j] - dots[i])
            xi, yi = pts[i]
            xj, yj = pts[j]
            out.append((xi + t * (xj - xi), yi + t * (yj - yi)))
    return out


def _shoelace_pts(pts) -> float:
    k = len(pts)
    if k < 3:
        return 0.0
    total = 0.0
    for i in range(k):
        j = i + 1 if i + 1 < k else 0
        total += pts[i][0] * pts[j][1] - pts[j][0] * pts[i][1]
    return 0.5 * abs(total)


def _clip_polygon(poly, normal, offset):
    """Array wrapper around _clip_pts."""
    pts = _clip_pts([(float(p[0]), float(p[1])) for p in poly],
                    float(normal[0]), float(normal[1]), float(offset))
    return np.array(pts) if pts else np.empty((0, 2))


def _polygon_cycle(P: Polytope) -> np.ndarray:
    """CCW vertex cycle of a 2-d polytope."""
    center = P.vertices.mean(axis=0)
    ang = np.arctan2(P.vertices[:, 1] - center[1],
                     P.vertices[:, 0] - center[0])
    return P.vertices[np.argsort(ang)]


def _shoelace(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1))
                           - np.dot(y, np.roll(x, -1))))


def intersection_volume(P: Polytope, Q: Polytope) -> float:
    """Volume of the intersection of two polytopes (0 when empty)."""
    if P.d == 2:
        cyc = _polygon_cycle(P)
        pts = [(float(x), float(y)) for x, y in cyc]
        for normal, offset in zip(Q.A, Q.b):
            pts = _clip_pts(pts, float(normal[0]), float(normal[1]),
                            float(offset))
            if not pts:
                return 0.0
        return _shoelace_pts(pts)
    A = np.concatenate([P.A, Q.A])
    b = np.concatenate([P.b, Q.b])
    try:
        return halfspace_polytope(A, b).volume
    except DegeneratePolytope:
        return 0.0


def box_polytope(lo, hi) -> Polytope:
    """Axis box [lo, hi]^d as a Polytope."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    A = np.concatenate([np.eye(d), -np.eye(d)])
    b = np.concatenate([hi, -lo])
    return halfspace_polytope(A, b, interior=(lo + hi) / 2.0)


def coarse_to_fine_minimize(fn, d: int, radius: float, levels: int = 3,
                            factor: float = 4.0, pts_per_axis: int = 5):
    """Grid minimization of fn over translates in [-radius, radius]^d.

    Each level re-centers on the incumbent and shrinks the range by factor;
    the refinement bounds the gap through the Lipschitz constant of the
    objective in the translation.
    """
    center = np.zeros(d)
    best_x, best_v = center.copy(), fn(center)
    r = radius
    for _ in range(levels):
        axes = [np.linspace(-r, r, pts_per_axis)] * d
        grid = np.meshgrid(*axes, indexing="ij")
        offsets = np.stack([g.ravel() for g in grid], axis=1)
        for off in offsets:
            x = center + off
            v = fn(x)
            if v < best_v - 1e-15:
                best_v, best_x = v, x.copy()
        center = best_x.copy()
        r /= factor
    return best_x, best_v


def asymmetry_index(F: Polytope, W: Polytope, radius: float | None = None,
                    levels: int = 3, factor: float = 4.0) -> float:
    """min over translates x of vol(F symdiff (x + rW)) / vol(F).

    rW is the dilate of W matching F's volume; the minimization runs on a
    coarse-to-fine translation grid.
    """
    volF = F.volume
    W = dilate_to_volume(W, volF)
    if radius is None:
        span = (np.abs(F.vertices).max() + np.abs(W.vertices).max())
        radius = float(span)
    centerF = F.vertices.mean(axis=0)
    centerW = W.vertices.mean(axis=0)

    def sym_diff(x):
        inter = intersection_volume(F, W.translate(x))
        return (2.0 * (volF - inter)) / volF

    shift = centerF - centerW
    best_x, best_v = coarse_to_fine_minimize(
        lambda x: sym_diff(shift + x), F.d, radius, levels, factor)
    return best_v


@dataclass(frozen=True)
class DeficitReport:
    deficits: np.ndarray
    asymmetries: np.ndarray
    violations: int
    crystal_energy: float


def random_polytope(d: int, seed: int, n_halfspaces: int | None = None
                    ) -> Polytope:
    """Random bounded convex polytope inside [-1.8, 1.8]^d."""
    rng = Stream(seed)
    m = n_halfspaces or (6 + rng.randint(7))
    normals, offsets = [], []
    for _ in range(m):
        v = np.array([_gauss(rng) for _ in range(d)])
        nrm = np.linalg.norm(v)
        if nrm < 1e-9:
            continue
        normals.append(v / nrm)
        offsets.append(0.5 + 0.9 * rng.u01())
    A = np.concatenate([np.array(normals), np.eye(d), -np.eye(d)])
    b = np.concatenate([np.array(offsets), np.full(2 * d, 1.8)])
    return halfspace_polytope(A, b)


def _gauss(stream: Stream) -> float:
    u1 = max(stream.u01(), 1e-16)
    u2 = stream.u01()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def isoperimetric_deficit_test(table: NormTable, trials: int,
                               seed: int) -> DeficitReport:
    """Sample volume-matched random polytopes and compare their energy.

    The crystal minimizes surface energy at fixed volume, so every sampled
    deficit must be >= -1e-6; a violation indicates a geometry bug.
    Reports the deficit distribution and grid-approximated asymmetry
    indices.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    W = dilate_to_volume(wulff_crystal(table), reference_volume(table.d))
    iw = surface_energy(W, table)
    deficits = np.empty(trials)
    asyms = np.empty(trials)
    violations = 0
    for t in range(trials):
        sample = None
        for attempt in range(20):
            sample = random_polytope(table.d, seed=seed + 1000 * t + attempt)
            if sample.volume > 0.05:
                break
        sample = dilate_to_volume(sample, W.volume)
        energy = surface_energy(sample, table)
        deficits[t] = (energy - iw) / iw
        asyms[t] = asymmetry_index(sample, W)
        if energy < iw - REPORT_TOL:
            violations += 1
    return DeficitReport(deficits=deficits, asymmetries=asyms,
                         violations=violations, crystal_energy=iw)


# ---------------------------------------------------------------------------
# export


def polytope_to_off(P: Polytope) -> str:
    """OFF-style text: vertex list plus face index cycles."""
    lines = ["OFF", f"{len(P.vertices)} {len(P.faces)} 0"]
    for v in P.vertices:
        lines.append(" ".join(repr(float(x)) for x in v))
    for f in P.faces:
        lines.append(" ".join([str(len(f.vertex_ids))]
                              + [str(i) for i in f.vertex_ids]))
    return "\n".join(lines) + "\n"


def polytope_to_json(P: Polytope) -> dict:
    return {
        "halfspaces": [{"normal": a.tolist(), "offset": float(o)}
                       for a, o in zip(P.A, P.b)],
        "vertices": P.vertices.tolist(),
        "faces": [{"vertices": list(f.vertex_ids),
                   "normal": f.normal.tolist(),
                   "measure": f.measure} for f in P.faces],
        "volume": P.volume,
    }


def energy_report_json(P: Polytope, table: NormTable, theta: float) -> dict:
    return {
        "volume": P.volume,
        "surface_energy": surface_energy(P, table),
        "conductance": continuum_conductance(P, table, theta),
        "theta": theta,
        "norm_meta": dict(table.meta),
    }
