"""Finite-box lattice model: percolation sampling, clusters, boundaries.

A box holds the vertices of [-(n+pad), n+pad]^d; the pad region approximates
the infinite cluster so that open edge boundaries of sets inside [-n, n]^d
are counted the way they would be in the full lattice.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from ._rng import GOLDEN, MASK64, derive_seed, finalize64, open_threshold

MAGIC = b"PCFG"
FORMAT_VERSION = 1

_COORD_BITS = 20  # exact key packing for d <= 3; |coordinate| < 2**19


class EmptyCluster(Exception):
    """No usable open cluster in the sampled box."""


class BoundaryClipped(Exception):
    """A boundary operation would be undercounted at the padded-box hull."""


def _zigzag(c: np.ndarray) -> np.ndarray:
    c = c.astype(np.int64)
    return np.where(c >= 0, 2 * c, -2 * c - 1).astype(np.uint64)


def edge_keys(coords: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Absolute 64-bit id of the edge from its lower endpoint along axis.

    Box-independent, so nested boxes assign identical ids (hence identical
    sampled states) to shared edges.  Exact packing for d <= 3; a hash fold
    for higher dimensions.
    """
    d = coords.shape[1]
    if d <= 3:
        key = np.zeros(len(coords), dtype=np.uint64)
        for i in range(d):
            key = (key << np.uint64(_COORD_BITS)) | _zigzag(coords[:, i])
        return (key << np.uint64(3)) | axis.astype(np.uint64)
    with np.errstate(over="ignore"):
        key = np.full(len(coords), np.uint64(finalize64(d)), dtype=np.uint64)
        for i in range(d):
            key = (key + (_zigzag(coords[:, i]) + np.uint64(1))
                   * np.uint64(GOLDEN))
            key ^= key >> np.uint64(31)
            key = key * np.uint64(0xBF58476D1CE4E5B9)
        return (key + (axis.astype(np.uint64) + np.uint64(1))
                * np.uint64(GOLDEN)) & np.uint64(MASK64)


@dataclass(frozen=True)
class BoxSpec:
    """Box [-n, n]^d plus a margin of pad approximating the infinite volume."""

    d: int
    n: int
    pad: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if self.n < 1 or self.pad < 0:
            raise ValueError("need half-side n >= 1 and pad >= 0")
        if self.half >= 2 ** (_COORD_BITS - 1) - 1:
            raise ValueError("box too large for edge-key packing")

    @property
    def half(self) -> int:
        return self.n + self.pad

    @property
    def side(self) -> int:
        return 2 * self.half + 1

    @property
    def n_vertices(self) -> int:
        return self.side ** self.d

    @property
    def n_edges(self) -> int:
        # per axis: (side-1) * side^(d-1) interior columns of edges
        return self.d * (self.side - 1) * self.side ** (self.d - 1)

    def index_of(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        single = coords.ndim == 1
        if single:
            coords = coords[None, :]
        if np.any(np.abs(coords) > self.half):
            raise ValueError("coordinates outside box")
        idx = np.zeros(len(coords), dtype=np.int64)
        for i in range(self.d):
            idx = idx * self.side + (coords[:, i] + self.half)
        return idx[0] if single else idx

    def coords_of(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        single = idx.ndim == 0
        if single:
            idx = idx[None]
        out = np.empty((len(idx), self.d), dtype=np.int64)
        rem = idx.copy()
        for i in range(self.d - 1, -1, -1):
            out[:, i] = rem % self.side - self.half
            rem //= self.side
        return out[0] if single else out

    @cached_property
    def _edge_struct(self):
        """(eu, ev, axis, keys) over all in-box nearest-neighbor edges."""
        half = self.half
        all_coords = self.coords_of(np.arange(self.n_vertices))
        eu, ev, ax = [], [], []
        for a in range(self.d):
            mask = all_coords[:, a] < half
            u = np.flatnonzero(mask)
            w = all_coords[mask].copy()
            w[:, a] += 1
            eu.append(u)
            ev.append(self.index_of(w))
            ax.append(np.full(mask.sum(), a, dtype=np.int64))
        eu = np.concatenate(eu)
        ev = np.concatenate(ev)
        ax = np.concatenate(ax)
        # canonical storage order: lower-endpoint lex index, then axis
        order = np.lexsort((ax, eu))
        eu, ev, ax = eu[order], ev[order], ax[order]
        keys = edge_keys(self.coords_of(eu), ax)
        return eu, ev, ax, keys

    @property
    def edges_u(self) -> np.ndarray:
        return self._edge_struct[0]

    @property
    def edges_v(self) -> np.ndarray:
        return self._edge_struct[1]

    @property
    def edge_axis(self) -> np.ndarray:
        return self._edge_struct[2]

    @property
    def edge_key(self) -> np.ndarray:
        return self._edge_struct[3]

    @cached_property
    def _edge_lookup(self) -> np.ndarray:
        """(vertex, axis) -> edge position, -1 where no such edge."""
        eu, _, ax, _ = self._edge_struct
        table = np.full(self.n_vertices * self.d, -1, dtype=np.int64)
        table[eu * self.d + ax] = np.arange(len(eu))
        return table

    def edge_position(self, u_idx, axis) -> np.ndarray:
        return self._edge_lookup[np.asarray(u_idx) * self.d + np.asarray(axis)]

    @cached_property
    def hull_vertices(self) -> np.ndarray:
        coords = self.coords_of(np.arange(self.n_vertices))
        return np.flatnonzero(np.abs(coords).max(axis=1) == self.half)

    def in_core(self, idx) -> np.ndarray:
        """True for vertices inside the unpadded box [-n, n]^d."""
        coords = self.coords_of(np.asarray(idx))
        return np.abs(coords).max(axis=-1) <= self.n


@dataclass(frozen=True)
class Configuration:
    """One percolation sample: open/closed flag per in-box edge."""

    box: BoxSpec
    p: float
    seed: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.bits) != self.box.n_edges:
            raise ValueError("bit count does not match box edge count")
        self.bits.setflags(write=False)

    @property
    def n_open(self) -> int:
        return int(self.bits.sum())

    def open_edge_arrays(self):
        mask = self.bits == 1
        return self.box.edges_u[mask], self.box.edges_v[mask]


def sample_configuration(p: float, box: BoxSpec, seed: int) -> Configuration:
    """Sample every in-box edge independently with probability p.

    Each edge's state is a pure function of (seed, absolute edge id), so
    enlarging the box preserves the states of shared edges and samples may be
    drawn in parallel.
    """
    thr = open_threshold(p)
    bits = kernels.edge_open_bits(seed & MASK64, thr, box.edge_key)
    return Configuration(box=box, p=p, seed=seed & MASK64, bits=bits)


@dataclass(frozen=True)
class Subgraph:
    """A duplicate-free, sorted vertex set inside a box."""

    box: BoxSpec
    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.unique(np.asarray(self.vertices, dtype=np.int64))
        if len(v) and (v[0] < 0 or v[-1] >= self.box.n_vertices):
            raise ValueError("vertex index out of range")
        object.__setattr__(self, "vertices", v)
        v.setflags(write=False)

    def __len__(self):
        return len(self.vertices)

    @property
    def coords(self) -> np.ndarray:
        return self.box.coords_of(self.vertices)

    def member_mask(self) -> np.ndarray:
        mask = np.zeros(self.box.n_vertices, dtype=bool)
        mask[self.vertices] = True
        return mask


@dataclass(frozen=True)
class ClusterLabeling:
    """Open-cluster label per vertex; -1 marks vertices with no open edge."""

    labels: np.ndarray = field(repr=False)
    sizes: dict
    giant_label: int


def clusters(cfg: Configuration) -> ClusterLabeling:
    """Label open clusters; a label is the least vertex index in the cluster."""
    box = cfg.box
    eu, ev = cfg.open_edge_arrays()
    labels = kernels.min_labels(box.n_vertices, eu, ev)
    has_open = np.zeros(box.n_vertices, dtype=bool)
    has_open[eu] = True
    has_open[ev] = True
    labels = np.where(has_open, labels, -1)
    kept, counts = np.unique(labels[labels >= 0], return_counts=True)
    sizes = dict(zip(kept.tolist(), counts.tolist()))
    if len(kept) == 0:
        giant = -1
    else:
        best = counts.max()
        giant = int(kept[counts == best].min())
    return ClusterLabeling(labels=labels, sizes=sizes, giant_label=giant)


def giant_cluster_in_box(cfg: Configuration,
                         labeling: ClusterLabeling | None = None) -> Subgraph:
    """Largest padded-box open cluster restricted to the core box [-n, n]^d.

    Ties on cluster size go to the cluster with the smallest minimal vertex
    index.  Raises EmptyCluster when there is no open edge at all, or when
    the largest cluster misses the core box entirely.
    """
    lab = labeling if labeling is not None else clusters(cfg)
    if lab.giant_label < 0:
        raise EmptyCluster("configuration has no open edge")
    verts = np.flatnonzero(lab.labels == lab.giant_label)
    verts = verts[cfg.box.in_core(verts)]
    if len(verts) == 0:
        raise EmptyCluster("largest cluster does not meet the core box")
    return Subgraph(box=cfg.box, vertices=verts)


def open_edge_boundary(H: Subgraph, cfg: Configuration) -> np.ndarray:
    """Open edges with exactly one endpoint in H, as sorted edge positions.

    Counts edges leaving the core box into the pad region; raises
    BoundaryClipped if H touches the padded hull, where boundary edges would
    be missing.
    """
    box = cfg.box
    if box is not H.box:
        if box != H.box:
            raise ValueError("subgraph and configuration use different boxes")
    coords = H.coords
    if len(coords) and np.abs(coords).max() >= box.half:
        raise BoundaryClipped("subgraph touches the padded-box hull")
    member = H.member_mask()
    mask = (cfg.bits == 1) & (member[box.edges_u] ^ member[box.edges_v])
    return np.flatnonzero(mask)


def outer_boundaries(H: Subgraph) -> tuple[np.ndarray, np.ndarray]:
    """Outer edge boundary and vertex boundary of H in the full lattice.

    A boundary edge is *outer* when its endpoint outside H reaches the
    padded-box hull through the complement of H; edges into enclosed holes
    are excluded.  Returns (sorted edge positions, sorted vertex indices of
    the H-endpoints).  Both are deterministic in H alone (no percolation).
    """
    box = H.box
    coords = H.coords
    if len(coords) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    if np.abs(coords).max() >= box.half:
        raise BoundaryClipped("subgraph touches the padded-box hull")
    member = H.member_mask()
    eu, ev = box.edges_u, box.edges_v
    comp_edge = ~member[eu] & ~member[ev]
    labels = kernels.min_labels(box.n_vertices, eu[comp_edge], ev[comp_edge])
    outer_labels = np.unique(labels[box.hull_vertices])
    outer = np.zeros(box.n_vertices, dtype=bool)
    outer[~member] = np.isin(labels[~member], outer_labels)
    du = member[eu] & outer[ev]
    dv = member[ev] & outer[eu]
    edge_ids = np.flatnonzero(du | dv)
    star = np.unique(np.concatenate([eu[du], ev[dv]]))
    return edge_ids, star


_STAR_OFFSETS: dict[int, np.ndarray] = {}


def _star_offsets(d: int) -> np.ndarray:
    if d not in _STAR_OFFSETS:
        grids = np.meshgrid(*([np.arange(-1, 2)] * d), indexing="ij")
        offs = np.stack([g.ravel() for g in grids], axis=1)
        _STAR_OFFSETS[d] = offs[np.any(offs != 0, axis=1)]
    return _STAR_OFFSETS[d]


def star_connected(coords) -> bool:
    """True iff the coordinate set is connected under l-infinity adjacency.

    The empty set counts as connected by convention.
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.size == 0:
        return True
    if coords.ndim == 1:
        coords = coords[None, :]
    todo = {tuple(c) for c in coords.tolist()}
    offs = _star_offsets(coords.shape[1]).tolist()
    start = next(iter(todo))
    stack = [start]
    todo.discard(start)
    while stack:
        c = stack.pop()
        for off in offs:
            nb = tuple(a + b for a, b in zip(c, off))
            if nb in todo:
                todo.discard(nb)
                stack.append(nb)
    return not todo


@dataclass(frozen=True)
class DensityEstimate:
    theta: float
    stderr: float
    samples: int
    values: np.ndarray = field(repr=False)


def density_estimate(p: float, d: int, n: int, samples: int, seed: int,
                     pad: int | None = None) -> DensityEstimate:
    """Monte Carlo density of the giant cluster inside the core box."""
    if samples < 1:
        raise ValueError("need at least one sample")
    box = BoxSpec(d=d, n=n, pad=n if pad is None else pad)
    core = (2 * n + 1) ** d
    vals = np.empty(samples)
    for i in range(samples):
        cfg = sample_configuration(p, box, derive_seed(seed, i))
        try:
            vals[i] = len(giant_cluster_in_box(cfg)) / core
        except EmptyCluster:
            vals[i] = 0.0
    theta = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return DensityEstimate(theta=theta, stderr=stderr, samples=samples,
                           values=vals)


def save_configuration(cfg: Configuration, path, extra: dict | None = None
                       ) -> None:
    """Binary dump (little-endian header + packed bitmap) plus JSON sidecar."""
    path = str(path)
    header = MAGIC + struct.pack(
        "<HHIId Q", FORMAT_VERSION, cfg.box.d, cfg.box.n, cfg.box.pad,
        cfg.p, cfg.seed)
    packed = np.packbits(cfg.bits, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(packed.tobytes())
    sidecar = {
        "format": "perciso-configuration",
        "version": FORMAT_VERSION,
        "d": cfg.box.d, "n": cfg.box.n, "pad": cfg.box.pad,
        "p": cfg.p, "seed": cfg.seed,
        "n_edges": int(cfg.box.n_edges), "n_open": cfg.n_open,
        "edge_order": "lower-endpoint lex index, then axis",
    }
    sidecar.update(extra or {})
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_configuration(path) -> Configuration:
    with open(str(path), "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError("not a perciso configuration file")
        version, d, n, pad, p, seed = struct.unpack("<HHIId Q", fh.read(28))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        box = BoxSpec(d=d, n=n, pad=pad)
        packed = np.frombuffer(fh.read(), dtype=np.uint8)
    bits = np.unpackbits(packed, count=box.n_edges, bitorder="little")
    return Configuration(box=box, p=p, seed=seed, bits=bits)
