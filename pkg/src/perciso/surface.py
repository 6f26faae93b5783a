"""Monte Carlo surface tension: direction-indexed cut-weight normalization.

For a direction v, the anchored hemisphere cut weight in the cylinder of
scale r, divided by the equator area (2r)^(d-1), approaches a deterministic
limit as r grows.  The estimator reports the per-scale trend and takes the
largest-scale mean as the point estimate; no extrapolation model is fitted.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np

from ._rng import derive_seed
from .cylinder import DESK_FACE_SEP, Unsuitable, anchored_square_spec, \
    cylinder_box, discrete_cylinder, xi_hemi
from .lattice import sample_configuration

DIRECTION_TOL = 1e-9


@dataclass(frozen=True)
class ScaleRecord:
    r: float
    mean: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class BetaEstimate:
    """Per-scale normalized cut means for one direction.

    beta_hat is the mean at the largest suitable scale; ci is its 95%
    half-width.  The full per-scale record is kept so the subadditive
    decrease toward the limit stays visible.
    """

    v: np.ndarray
    per_scale: tuple[ScaleRecord, ...]
    beta_hat: float
    stderr: float

    @property
    def ci(self) -> float:
        return 1.96 * self.stderr


def _xi_sample(v, p, r, seed, min_face_sep):
    spec = anchored_square_spec(v, r=r, min_face_sep=min_face_sep)
    cfg = sample_configuration(p, cylinder_box(spec), seed)
    return xi_hemi(cfg, spec)


def estimate_beta(v, p: float, d: int, scales, samples: int, seed: int,
                  min_face_sep: float | None = DESK_FACE_SEP,
                  threads: int = 1) -> BetaEstimate:
    """Estimate the surface tension in direction v.

    Per-sample seeds fold in (scale, sample index) but not the direction, so
    different directions at the same scale see identical configurations on
    identical boxes when their cylinders occupy the same box; that common
    random numbers scheme is what makes the +v/-v and axis-pair comparisons
    sharp.
    """
    v = np.asarray(v, dtype=float)
    if len(v) != d:
        raise ValueError("direction dimension mismatch")
    scales = list(scales)
    if scales != sorted(scales) or len(set(scales)) != len(scales):
        raise ValueError("scales must be strictly increasing")
    if samples < 1:
        raise ValueError("need at least one sample")

    records = []
    for r in scales:
        spec = anchored_square_spec(v, r=r, min_face_sep=min_face_sep)
        geo = discrete_cylinder(spec, strict=False)
        if not geo.suitable:
            records.append(ScaleRecord(r=r, mean=0.0, stderr=0.0, samples=0))
            continue
        seeds = [derive_seed(seed, int(r), i) for i in range(samples)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                cuts = list(pool.map(
                    lambda s: _xi_sample(v, p, r, s, min_face_sep), seeds))
        else:
            cuts = [_xi_sample(v, p, r, s, min_face_sep) for s in seeds]
        norm = (2.0 * r) ** (d - 1)
        vals = [c.value / norm for c in cuts]
        mean = math.fsum(vals) / samples
        if samples > 1:
            var = math.fsum((x - mean) ** 2 for x in vals) / (samples - 1)
            stderr = math.sqrt(var / samples)
        else:
            stderr = 0.0
        records.append(ScaleRecord(r=r, mean=mean, stderr=stderr,
                                   samples=samples))
    usable = [rec for rec in records if rec.samples > 0]
    if not usable:
        raise Unsuitable("every requested scale is unsuitable for this "
                         "direction")
    last = usable[-1]
    return BetaEstimate(v=v, per_scale=tuple(records), beta_hat=last.mean,
                        stderr=last.stderr)


@dataclass(frozen=True)
class NormTable:
    """Direction-indexed surface tension values with uncertainties."""

    directions: np.ndarray
    beta: np.ndarray
    ci: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=float)
        if dirs.ndim != 2 or len(dirs) == 0:
            raise ValueError("directions must be a nonempty (m, d) array")
        norms = np.linalg.norm(dirs, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("directions must be unit vectors")
        d = dirs.shape[1]
        for a in range(d):
            for s in (1.0, -1.0):
                e = np.zeros(d)
                e[a] = s
                if np.linalg.norm(dirs - e, axis=1).min() > DIRECTION_TOL:
                    raise ValueError("table must contain all +/- axis "
                                     "directions")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "ci", np.asarray(self.ci, dtype=float))

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def __len__(self):
        return len(self.directions)

    def find(self, v) -> int:
        """Index of the table direction equal to v (within tolerance)."""
        dist = np.linalg.norm(self.directions - np.asarray(v, float), axis=1)
        i = int(np.argmin(dist))
        if dist[i] > DIRECTION_TOL:
            raise KeyError("direction not present in table")
        return i


def axis_directions(d: int) -> np.ndarray:
    out = []
    for a in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[a] = s
            out.append(e)
    return np.array(out)


def diagonal_directions(d: int) -> np.ndarray:
    out = []
    for signs in product((1.0, -1.0), repeat=d):
        out.append(np.array(signs) / math.sqrt(d))
    return np.array(out)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Near-uniform direction set on the 2-sphere."""
    i = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(1.0 - z * z)
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def default_directions(d: int, fib: int = 50) -> np.ndarray:
    parts = [axis_directions(d), diagonal_directions(d)]
    if d == 3 and fib > 0:
        parts.append(fibonacci_sphere(fib))
    dirs = np.concatenate(parts)
    # drop near-duplicates, keeping first occurrences
    keep = []
    for i, v in enumerate(dirs):
        if all(np.linalg.norm(v - dirs[j]) > DIRECTION_TOL for j in keep):
            keep.append(i)
    return dirs[keep]


def exact_norm_table(norm_fn, directions, meta=None) -> NormTable:
    """Table holding exact norm values (zero uncertainty) on the directions."""
    dirs = np.asarray(directions, dtype=float)
    beta = np.array([float(norm_fn(v)) for v in dirs])
    return NormTable(directions=dirs, beta=beta, ci=np.zeros(len(dirs)),
                     meta=dict(meta or {}, kind="exact"))


def estimate_norm_table(p: float, d: int, directions, scales, samples: int,
                        seed: int, min_face_sep: float | None = DESK_FACE_SEP,
                        threads: int = 1) -> NormTable:
    """Run the beta estimator over a direction set and collect the table."""
    dirs = np.asarray(directions, dtype=float)
    beta = np.empty(len(dirs))
    ci = np.empty(len(dirs))
    n_unsuitable = 0
    for i, v in enumerate(dirs):
        try:
            est = estimate_beta(v, p, d, scales, samples, seed,
                                min_face_sep=min_face_sep, threads=threads)
        except Unsuitable:
            n_unsuitable += 1
            beta[i] = np.nan
            ci[i] = np.nan
            continue
        beta[i] = est.beta_hat
        ci[i] = est.ci
    if n_unsuitable == len(dirs):
        raise Unsuitable("every direction was unsuitable at every scale")
    good = ~np.isnan(beta)
    meta = {"p": p, "d": d, "scales": list(scales), "samples": samples,
            "seed": seed, "n_directions": int(good.sum())}
    return NormTable(directions=dirs[good], beta=beta[good], ci=ci[good],
                     meta=meta)


def norm_value(table: NormTable, x) -> float:
    """Homogeneous extension by nearest-direction lookup.

    Exact whenever x/|x| is a table direction; in between it returns the
    value at the direction of largest dot product (documented estimator
    choice, adequate for half-space constructions that only query sampled
    directions).
    """
    x = np.asarray(x, dtype=float)
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        return 0.0
    u = x / nrm
    i = int(np.argmax(table.directions @ u))
    return nrm * float(table.beta[i])


def signed_permutation_matrices(d: int):
    """All symmetries of the lattice fixing the origin: signed permutations."""
    mats = []
    for perm in permutations(range(d)):
        for signs in product((1, -1), repeat=d):
            m = np.zeros((d, d))
            for i, (j, s) in enumerate(zip(perm, signs)):
                m[i, j] = s
            mats.append(m)
    return mats


@dataclass(frozen=True)
class SymmetryFinding:
    index_v: int
    index_image: int
    diff: float
    combined_stderr: float
    ok: bool


@dataclass(frozen=True)
class SymmetryReport:
    findings: tuple[SymmetryFinding, ...]
    n_checked: int
    n_flagged: int

    @property
    def ok(self) -> bool:
        return self.n_flagged == 0


def symmetry_audit(table: NormTable, n_stderr: float = 2.0) -> SymmetryReport:
    """Compare beta across lattice-symmetry images of the table directions.

    For each signed permutation L and each direction v whose image Lv is
    also tabulated, flags |beta(Lv) - beta(v)| beyond n_stderr combined
    standard errors (ci entries are 95% half-widths, i.e. 1.96 stderr).
    """
    findings = []
    flagged = 0
    stderr = table.ci / 1.96
    seen = set()
    for mat in signed_permutation_matrices(table.d):
        images = table.directions @ mat.T
        for i in range(len(table)):
            try:
                j = table.find(images[i])
            except KeyError:
                continue
            if i == j or (i, j) in seen:
                continue
            seen.add((i, j))
            seen.add((j, i))
            diff = abs(float(table.beta[i] - table.beta[j]))
            comb = float(np.hypot(stderr[i], stderr[j]))
            ok = diff <= n_stderr * comb + 1e-12
            if not ok:
                flagged += 1
            findings.append(SymmetryFinding(index_v=i, index_image=j,
                                            diff=diff, combined_stderr=comb,
                                            ok=ok))
    return SymmetryReport(findings=tuple(findings), n_checked=len(findings),
                          n_flagged=flagged)


@dataclass(frozen=True)
class TailRecord:
    r: float
    tail: float
    mean: float
    samples: int


def concentration_audit(v, p: float, d: int, scales, samples: int,
                        eps: float, seed: int,
                        beta_ref: float | None = None,
                        min_face_sep: float | None = DESK_FACE_SEP,
                        threads: int = 1) -> list[TailRecord]:
    """Empirical tail P(|normalized cut - beta| >= eps) per scale.

    The reference beta defaults to the largest-scale mean of the same run.
    Decay with r is the object of interest; only the trend is meaningful at
    desk scales.
    """
    if samples < 100:
        raise ValueError("concentration audit needs at least 100 samples")
    est = estimate_beta(v, p, d, scales, samples, seed,
                        min_face_sep=min_face_sep, threads=threads)
    ref = est.beta_hat if beta_ref is None else beta_ref
    out = []
    for rec in est.per_scale:
        if rec.samples == 0:
            continue
        r = rec.r
        norm = (2.0 * r) ** (d - 1)
        seeds = [derive_seed(seed, int(r), i) for i in range(samples)]
        vals = [_xi_sample(v, p, r, s, min_face_sep).value / norm
                for s in seeds]
        tail = sum(1 for x in vals if abs(x - ref) >= eps) / samples
        out.append(TailRecord(r=r, tail=tail, mean=rec.mean, samples=samples))
    return out


CSV_SCHEMA_VERSION = 1


def table_to_csv(table: NormTable, path) -> None:
    """Fixed-schema CSV: direction components, beta, ci, r_max, samples."""
    d = table.d
    scales = table.meta.get("scales", [])
    r_max = max(scales) if scales else ""
    samples = table.meta.get("samples", "")
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"v_{i}" for i in range(d)]
                        + ["beta", "ci", "r_max", "samples"])
        for i in range(len(table)):
            row = [repr(float(x)) for x in table.directions[i]]
            row += [repr(float(table.beta[i])), repr(float(table.ci[i])),
                    str(r_max), str(samples)]
            writer.writerow(row)


def table_from_csv(path, meta=None) -> NormTable:
    with open(str(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = sum(1 for h in header if h.startswith("v_"))
        dirs, beta, ci = [], [], []
        for row in reader:
            dirs.append([float(x) for x in row[:d]])
            beta.append(float(row[d]))
            ci.append(float(row[d + 1]))
    return NormTable(directions=np.array(dirs), beta=np.array(beta),
                     ci=np.array(ci), meta=dict(meta or {}))
