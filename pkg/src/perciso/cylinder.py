"""Oriented squares/discs, discrete cylinders, and minimal open cutsets.

The anchored cut weight of a direction v is the minimum number of open edges
in a cutset separating the upper and lower hemisphere shells of the discrete
cylinder over the chosen square of v; its large-scale normalization is the
surface tension estimated in perciso.surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .lattice import BoxSpec, Configuration

GEOM_TOL = 1e-9

#: Face-separation floor from the asymptotic suitability convention.  Desk
#: scales never reach it; estimators pass an explicit smaller floor instead.
STRICT_FACE_SEP_FACTOR = 100.0

#: Face-separation floor used by the Monte Carlo estimators: faces must be
#: genuinely apart, but at scales a desk run can afford.
DESK_FACE_SEP = 4.0


class Unsuitable(Exception):
    """Cylinder too small or thin for its cut variables to be meaningful."""


def _stereo_frame(v: np.ndarray) -> np.ndarray:
    """Tangent frame at v on the closed upper hemisphere.

    Pullback of the flat frame of the stereographic chart (projection from
    the south pole), orthonormalized; smooth and Lipschitz on the closed
    upper hemisphere, and equal to (e_1, ..., e_{d-1}) at the north pole.
    """
    d = len(v)
    y = v[: d - 1] / (1.0 + v[d - 1])
    lam = 2.0 / (1.0 + y @ y)
    basis = np.zeros((d - 1, d))
    for i in range(d - 1):
        basis[i, : d - 1] = -lam * y[i] * y
        basis[i, i] += 1.0
        basis[i, d - 1] = -lam * y[i]
    return basis


@dataclass(frozen=True)
class Frame:
    """Unit direction plus an orthonormal basis of its orthogonal complement."""

    v: np.ndarray
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        b = np.asarray(self.basis, dtype=float)
        if abs(v @ v - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        gram = b @ b.T
        if not np.allclose(gram, np.eye(len(b)), atol=1e-12):
            raise ValueError("basis must be orthonormal")
        if np.abs(b @ v).max() > 1e-12:
            raise ValueError("basis must be orthogonal to the direction")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "basis", b)
        v.setflags(write=False)
        b.setflags(write=False)


def chosen_square(v) -> Frame:
    """Deterministic square orientation for a direction.

    Stereographic frame on the closed upper hemisphere; on the open lower
    hemisphere the frame at v is the negation of the frame at -v, which makes
    the spanned square of v and -v the same point set.
    """
    v = np.asarray(v, dtype=float)
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    v = v / nrm
    if v[-1] >= 0.0:
        basis = _stereo_frame(v)
    else:
        basis = -_stereo_frame(-v)
    return Frame(v=v, basis=basis)


@dataclass(frozen=True)
class CylinderSpec:
    """Cylinder over a square or disc, at lattice scale r.

    The base has the given half-width (square half-side or disc radius), sits
    at `center` with normal frame.v, and extends `height` on both sides; the
    lattice cylinder collects integer points z with z/scale inside it.
    min_face_sep=None applies the strict asymptotic separation floor
    (100 * d); estimators pass DESK_FACE_SEP.
    """

    kind: str
    center: np.ndarray
    frame: Frame
    half_width: float
    height: float
    scale: float
    min_face_sep: float | None = None

    def __post_init__(self):
        if self.kind not in ("square", "disc"):
            raise ValueError("kind must be 'square' or 'disc'")
        if min(self.half_width, self.height, self.scale) <= 0:
            raise ValueError("half_width, height and scale must be positive")
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c)
        c.setflags(write=False)

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def face_sep_floor(self) -> float:
        if self.min_face_sep is None:
            return STRICT_FACE_SEP_FACTOR * self.d
        return self.min_face_sep


def anchored_square_spec(v, r: float, x=None, half_width: float = 1.0,
                         height: float = 1.0,
                         min_face_sep: float | None = DESK_FACE_SEP
                         ) -> CylinderSpec:
    """Cylinder over the chosen square of v, centered at x, at scale r."""
    v = np.asarray(v, dtype=float)
    center = np.zeros(len(v)) if x is None else np.asarray(x, dtype=float)
    return CylinderSpec(kind="square", center=center, frame=chosen_square(v),
                        half_width=half_width, height=height, scale=r,
                        min_face_sep=min_face_sep)


@dataclass(frozen=True)
class DiscreteCylinder:
    """Lattice realization of a CylinderSpec.

    All vertex arrays carry integer coordinates of shape (m, d).  The shell
    sets use the local complement test: the continuum cylinder and slab are
    convex, so their discretizations cannot trap complement cavities and the
    outer vertex boundary is exactly the set of vertices with a neighbor
    outside.
    """

    spec: CylinderSpec
    vertices: np.ndarray = field(repr=False)
    hemi_plus: np.ndarray = field(repr=False)
    hemi_minus: np.ndarray = field(repr=False)
    face_plus: np.ndarray = field(repr=False)
    face_minus: np.ndarray = field(repr=False)
    suitable: bool = True
    reason: str | None = None
    face_separation: float = np.inf


def _cyl_membership(spec: CylinderSpec, pts: np.ndarray):
    """(inside cylinder, inside slab, normal coordinate) for lattice points."""
    rel = pts / spec.scale - spec.center
    t = rel @ spec.frame.v
    s = rel @ spec.frame.basis.T
    if spec.kind == "square":
        lateral = np.abs(s).max(axis=1) <= spec.half_width + GEOM_TOL
    else:
        lateral = np.einsum("ij,ij->i", s, s) <= (spec.half_width + GEOM_TOL) ** 2
    in_slab = np.abs(t) <= spec.height + GEOM_TOL
    return lateral & in_slab, in_slab, t


def _canonical_sign(v: np.ndarray) -> float:
    """+1 if the first nonzero component of v is positive, else -1.

    Vertices exactly on the equator hyperplane attach to the hemisphere on
    the canonical side.  A v-independent geometric rule keeps runs
    reproducible and makes the problems for v and -v exact set-swaps of one
    another, so shared seeds give identical cut weights.
    """
    for x in v:
        if abs(x) > 1e-12:
            return 1.0 if x > 0 else -1.0
    raise ValueError("zero direction")


def _plus_side(spec: CylinderSpec, t: np.ndarray) -> np.ndarray:
    tie = np.abs(t) <= GEOM_TOL
    if _canonical_sign(spec.frame.v) > 0:
        return (t > GEOM_TOL) | tie
    return t > GEOM_TOL


def discrete_cylinder(spec: CylinderSpec, strict: bool = True
                      ) -> DiscreteCylinder:
    """Enumerate the lattice cylinder with its hemisphere and face shells.

    Vertices exactly on the equator hyperplane are assigned to the "+" side.
    With strict=True an unsuitable spec raises Unsuitable; otherwise the
    geometry is returned flagged, and downstream cut variables are zero.
    """
    d = spec.d
    r = spec.scale
    # per-axis extent of the continuum cylinder, then a 1-step margin so the
    # complement test sees every lattice neighbor
    reach = (spec.half_width * np.abs(spec.frame.basis).sum(axis=0)
             + spec.height * np.abs(spec.frame.v))
    lo = np.floor(r * (spec.center - reach)).astype(np.int64) - 1
    hi = np.ceil(r * (spec.center + reach)).astype(np.int64) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grid], axis=1)
    in_cyl, in_slab, t = _cyl_membership(spec, pts)

    shape = tuple(len(a) for a in axes)
    cyl_grid = in_cyl.reshape(shape)
    slab_grid = in_slab.reshape(shape)

    def shell(mask_grid):
        # vertex with some lattice neighbor outside the region
        border = np.zeros_like(mask_grid)
        for ax in range(d):
            for shift in (1, -1):
                rolled = np.roll(mask_grid, shift, axis=ax)
                # points at the array edge have outside neighbors by margin
                border |= mask_grid & ~rolled
        return border.ravel()

    hemi_shell = shell(cyl_grid)
    slab_shell = shell(slab_grid) & in_cyl

    plus = _plus_side(spec, t)
    verts = pts[in_cyl]
    hemi_p = pts[hemi_shell & plus]
    hemi_m = pts[hemi_shell & ~plus]
    face_p = pts[slab_shell & plus]
    face_m = pts[slab_shell & ~plus]

    suitable, reason, sep = True, None, np.inf
    if min(len(hemi_p), len(hemi_m)) == 0:
        suitable, reason = False, "empty-hemisphere"
    elif min(len(face_p), len(face_m)) == 0:
        suitable, reason = False, "empty-face"
    else:
        sep = float(cdist(face_p, face_m).min())
        if sep < spec.face_sep_floor:
            suitable = False
            reason = (f"face-separation {sep:.3g} below floor "
                      f"{spec.face_sep_floor:.3g}")
    dc = DiscreteCylinder(spec=spec, vertices=verts, hemi_plus=hemi_p,
                          hemi_minus=hemi_m, face_plus=face_p,
                          face_minus=face_m, suitable=suitable, reason=reason,
                          face_separation=sep)
    if strict and not suitable:
        raise Unsuitable(reason)
    return dc


@dataclass(frozen=True)
class CutResult:
    """Minimal open-cutset weight with a witness cutset.

    value counts the open edges of the witness; the witness additionally
    carries the crossing closed edges so that removing it disconnects the
    source side from the sink side in the full arena graph.  value 0 comes
    with an empty witness (closed edges alone already separate).
    """

    value: int
    witness: np.ndarray = field(repr=False)
    suitable: bool = True
    reason: str | None = None

    def to_json(self, cfg: Configuration, spec: CylinderSpec | None = None
                ) -> dict:
        out = {
            "value": int(self.value),
            "suitable": bool(self.suitable),
            "witness_edges": cfg.box.edge_key[self.witness].tolist(),
        }
        if self.reason is not None:
            out["reason"] = self.reason
        if spec is not None:
            out["spec"] = {
                "kind": spec.kind,
                "center": spec.center.tolist(),
                "direction": spec.frame.v.tolist(),
                "half_width": spec.half_width,
                "height": spec.height,
                "scale": spec.scale,
                "min_face_sep": spec.face_sep_floor,
            }
        return out


def min_open_cut(cfg: Configuration, sources, sinks, arena) -> CutResult:
    """Minimum open-edge weight of a cutset separating sources from sinks.

    The cut ranges over edge sets within the arena's induced subgraph; closed
    edges cost nothing, so the weight equals the max flow over open edges
    alone.  The witness is the canonical minimal-source-side cut.
    """
    box = cfg.box
    arena = np.unique(np.asarray(arena, dtype=np.int64))
    sources = np.unique(np.asarray(sources, dtype=np.int64))
    sinks = np.unique(np.asarray(sinks, dtype=np.int64))
    if len(sources) == 0 or len(sinks) == 0:
        raise ValueError("sources and sinks must be nonempty")
    if np.intersect1d(sources, sinks).size:
        raise ValueError("sources and sinks must be disjoint")
    for name, s in (("sources", sources), ("sinks", sinks)):
        if not np.all(np.isin(s, arena)):
            raise ValueError(f"{name} must lie inside the arena")

    member = np.zeros(box.n_vertices, dtype=bool)
    member[arena] = True
    local = np.full(box.n_vertices, -1, dtype=np.int64)
    local[arena] = np.arange(len(arena))

    edge_in = member[box.edges_u] & member[box.edges_v]
    edge_ids = np.flatnonzero(edge_in)
    eu = local[box.edges_u[edge_ids]]
    ev = local[box.edges_v[edge_ids]]
    open_mask = cfg.bits[edge_ids] == 1

    value, reach = kernels.max_flow_unit(
        len(arena), eu[open_mask], ev[open_mask],
        np.ones(int(open_mask.sum()), dtype=np.int64),
        local[sources], local[sinks])
    if value == 0:
        return CutResult(value=0, witness=np.empty(0, dtype=np.int64))
    crossing = reach[eu] != reach[ev]
    witness = edge_ids[crossing]
    return CutResult(value=int(value), witness=witness)


def _cylinder_arrays_in_box(box: BoxSpec, coords: np.ndarray) -> np.ndarray:
    if len(coords) and np.abs(coords).max() > box.half:
        raise ValueError("configuration box does not cover the cylinder")
    return box.index_of(coords)


def _xi(cfg: Configuration, spec: CylinderSpec, use_faces: bool) -> CutResult:
    geo = discrete_cylinder(spec, strict=False)
    if not geo.suitable:
        return CutResult(value=0, witness=np.empty(0, dtype=np.int64),
                         suitable=False, reason=geo.reason)
    box = cfg.box
    arena = _cylinder_arrays_in_box(box, geo.vertices)
    if use_faces:
        src, snk = geo.face_plus, geo.face_minus
    else:
        src, snk = geo.hemi_plus, geo.hemi_minus
    res = min_open_cut(cfg, box.index_of(src), box.index_of(snk), arena)
    return res


def xi_hemi(cfg: Configuration, spec: CylinderSpec) -> CutResult:
    """Minimal open cutset weight separating the hemisphere shells."""
    return _xi(cfg, spec, use_faces=False)


def xi_face(cfg: Configuration, spec: CylinderSpec) -> CutResult:
    """Minimal open cutset weight separating the top and bottom face layers.

    Face cutsets may meet the cylinder sides at any height, so pointwise
    xi_face <= xi_hemi.
    """
    return _xi(cfg, spec, use_faces=True)


def equatorial_edges(cfg: Configuration, spec: CylinderSpec,
                     geo: DiscreteCylinder | None = None) -> np.ndarray:
    """Edge positions of the explicit equatorial cutset of the cylinder.

    All in-cylinder edges whose endpoints straddle the equator hyperplane
    (ties on the hyperplane count as "+").  This set always separates the
    hemisphere shells, giving the trivial upper bound on the hemisphere cut.
    """
    if geo is None:
        geo = discrete_cylinder(spec, strict=False)
    box = cfg.box
    arena = _cylinder_arrays_in_box(box, geo.vertices)
    member = np.zeros(box.n_vertices, dtype=bool)
    member[arena] = True
    ids = np.flatnonzero(member[box.edges_u] & member[box.edges_v])
    cu = box.coords_of(box.edges_u[ids])
    cv = box.coords_of(box.edges_v[ids])
    tu = (cu / spec.scale - spec.center) @ spec.frame.v
    tv = (cv / spec.scale - spec.center) @ spec.frame.v
    return ids[_plus_side(spec, tu) != _plus_side(spec, tv)]


def cylinder_box(spec: CylinderSpec, pad: int = 0) -> BoxSpec:
    """Smallest centered box (plus pad) covering the cylinder's lattice hull."""
    reach = (spec.half_width * np.abs(spec.frame.basis).sum(axis=0)
             + spec.height * np.abs(spec.frame.v))
    extent = spec.scale * (np.abs(spec.center) + reach)
    half = int(np.ceil(extent.max())) + 1
    return BoxSpec(d=spec.d, n=half, pad=pad)
