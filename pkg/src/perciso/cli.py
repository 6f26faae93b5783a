"""Reproducible experiment driver.

Subcommands: sample | beta | wulff | cheeger | coarse | converge.  Each run
is described by an INI-style config (flat key=value under section headers,
comma-separated lists); every output embeds the effective config hash, the
master seed and the package version, and reruns are byte-identical.

Exit codes: 0 success, 2 config error, 3 every direction unsuitable (beta),
4 every repetition failed (converge).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import derive_seed
from .cheeger import (
    AnnealParams,
    CarveFailed,
    CheegerProblem,
    carve_polytope,
    cheeger_anneal,
    cheeger_exact,
    distance_to_wulff_set,
    empirical_measure,
    l1_shape_distance,
)
from .cylinder import DESK_FACE_SEP, Unsuitable
from .lattice import (
    BoxSpec,
    EmptyCluster,
    density_estimate,
    sample_configuration,
    save_configuration,
)
from .surface import (
    axis_directions,
    diagonal_directions,
    default_directions,
    estimate_norm_table,
    fibonacci_sphere,
    table_from_csv,
    table_to_csv,
)
from .wulff import (
    dilate_to_volume,
    energy_report_json,
    polytope_to_json,
    polytope_to_off,
    reference_volume,
    surface_energy,
    wulff_crystal,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSUITABLE = 3
EXIT_ALL_FAILED = 4


class ConfigError(Exception):
    pass


def load_config(path: str) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case (e.g. the resolution key K)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value.strip()
    return flat


RESULT_NEUTRAL_KEYS = {"run.out", "run.threads"}


def config_hash(flat: dict) -> str:
    """Hash of the effective config, excluding keys that cannot change
    results (output location, thread count)."""
    canon = "\n".join(f"{k}={flat[k]}" for k in sorted(flat)
                      if k not in RESULT_NEUTRAL_KEYS)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


class Params:
    """Typed access to the flat config with error reporting."""

    def __init__(self, flat: dict):
        self.flat = flat

    def _raw(self, key, default=None, required=False):
        if key in self.flat:
            return self.flat[key]
        if required:
            raise ConfigError(f"missing required config key '{key}'")
        return default

    def get_str(self, key, default=None, required=False):
        return self._raw(key, default, required)

    def get_int(self, key, default=None, required=False):
        raw = self._raw(key, default, required)
        if raw is None or isinstance(raw, int):
            return raw
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}' must be an integer, "
                              f"got {raw!r}") from exc

    def get_float(self, key, default=None, required=False):
        raw = self._raw(key, default, required)
        if raw is None or isinstance(raw, float):
            return raw
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key '{key}' must be a number, "
                              f"got {raw!r}") from exc

    def get_int_list(self, key, default=None, required=False):
        raw = self._raw(key, default, required)
        if raw is None or isinstance(raw, list):
            return raw
        try:
            return [int(tok) for tok in raw.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"config key '{key}' must be a comma list of "
                              f"integers, got {raw!r}") from exc


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv_bytes(header, rows) -> bytes:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue().encode()


def _write_outputs(out_dir: Path, files: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out_dir / name).write_bytes(data)


def _directions_from_tokens(tokens: str, d: int) -> np.ndarray:
    parts = []
    for tok in tokens.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "axes":
            parts.append(axis_directions(d))
        elif tok == "diagonals":
            parts.append(diagonal_directions(d))
        elif tok.startswith("fibonacci:"):
            if d != 3:
                raise ConfigError("fibonacci directions need d = 3")
            parts.append(fibonacci_sphere(int(tok.split(":")[1])))
        elif tok == "default":
            parts.append(default_directions(d))
        else:
            raise ConfigError(f"unknown direction token {tok!r}")
    if not parts:
        raise ConfigError("empty direction set")
    dirs = np.concatenate(parts)
    keep = []
    for i, v in enumerate(dirs):
        if all(np.linalg.norm(v - dirs[j]) > 1e-9 for j in keep):
            keep.append(i)
    return dirs[keep]


def _common(params: Params):
    p = params.get_float("model.p", required=True)
    d = params.get_int("model.d", required=True)
    if not 0.0 <= p <= 1.0:
        raise ConfigError("model.p must be in [0, 1]")
    if d < 2:
        raise ConfigError("model.d must be at least 2")
    seed = params.get_int("run.seed", required=True)
    threads = params.get_int("run.threads", 1)
    if threads < 1:
        raise ConfigError("run.threads must be positive")
    return p, d, seed, threads


def _meta(params: Params, seed: int) -> dict:
    return {"config_hash": config_hash(params.flat), "seed": seed,
            "version": __version__}


def run_sample(params: Params, out_dir: Path) -> int:
    p, d, seed, _ = _common(params)
    n = params.get_int("sample.n", required=True)
    pad = params.get_int("sample.pad", n)
    box = BoxSpec(d=d, n=n, pad=pad)
    cfg = sample_configuration(p, box, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_configuration(cfg, out_dir / "sample.bin", extra=_meta(params, seed))
    manifest = dict(_meta(params, seed), command="sample",
                    n_open=cfg.n_open, n_edges=int(box.n_edges))
    _write_outputs(out_dir, {"sample.json": _json_bytes(manifest)})
    return EXIT_OK


def run_beta(params: Params, out_dir: Path) -> int:
    p, d, seed, threads = _common(params)
    tokens = params.get_str("beta.directions", "axes,diagonals")
    scales = params.get_int_list("beta.scales", required=True)
    samples = params.get_int("beta.samples", required=True)
    sep = params.get_float("beta.min_face_sep", DESK_FACE_SEP)
    directions = _directions_from_tokens(tokens, d)
    try:
        table = estimate_norm_table(p, d, directions, scales, samples, seed,
                                    min_face_sep=sep, threads=threads)
    except Unsuitable:
        print("error: every direction unsuitable at every scale",
              file=sys.stderr)
        return EXIT_UNSUITABLE
    out_dir.mkdir(parents=True, exist_ok=True)
    table_to_csv(table, out_dir / "beta.csv")
    manifest = dict(_meta(params, seed), command="beta", table=table.meta)
    _write_outputs(out_dir, {"beta.json": _json_bytes(manifest)})
    return EXIT_OK


def _load_table(params: Params, key: str):
    path = params.get_str(key, required=True)
    if not os.path.exists(path):
        raise ConfigError(f"{key} file {path!r} not found; "
                          "run the beta subcommand first")
    return table_from_csv(path)


def run_wulff(params: Params, out_dir: Path) -> int:
    seed = params.get_int("run.seed", required=True)
    table = _load_table(params, "wulff.beta_table")
    theta = params.get_float("wulff.theta", 1.0)
    W = dilate_to_volume(wulff_crystal(table), reference_volume(table.d))
    files = {
        "crystal.off": polytope_to_off(W).encode(),
        "crystal.json": _json_bytes(dict(_meta(params, seed),
                                         command="wulff",
                                         polytope=polytope_to_json(W))),
        "energy.json": _json_bytes(dict(_meta(params, seed),
                                        **energy_report_json(W, table,
                                                             theta))),
    }
    _write_outputs(out_dir, files)
    return EXIT_OK


def run_cheeger(params: Params, out_dir: Path) -> int:
    p, d, seed, _ = _common(params)
    n = params.get_int("cheeger.n", required=True)
    pad = params.get_int("cheeger.pad", n)
    method = params.get_str("cheeger.method", "auto")
    if method not in ("auto", "exact", "anneal", "carve"):
        raise ConfigError(f"unknown cheeger.method {method!r}")
    table = None
    if method == "carve" or params.get_str("cheeger.beta_table"):
        table = _load_table(params, "cheeger.beta_table")
    anneal = AnnealParams(
        restarts=params.get_int("cheeger.restarts", 8),
        steps=params.get_int("cheeger.steps", 200_000),
        cooling=params.get_float("cheeger.cooling", 0.995),
    )

    cfg = sample_configuration(p, BoxSpec(d=d, n=n, pad=pad), seed)
    try:
        prob = CheegerProblem.from_configuration(cfg)
    except EmptyCluster:
        raise ConfigError("configuration has no usable cluster; "
                          "raise model.p or sample.n")
    if method == "auto":
        method = "exact" if len(prob.Cn) <= 22 else "anneal"
    if method == "exact":
        sol = cheeger_exact(prob)
    elif method == "carve":
        W = dilate_to_volume(wulff_crystal(table), reference_volume(d))
        sol = carve_polytope(prob, W,
                             h=params.get_float("cheeger.height", 0.1))
    else:
        seeds = []
        if table is not None:
            W = dilate_to_volume(wulff_crystal(table), reference_volume(d))
            try:
                seeds = [carve_polytope(
                    prob, W, h=params.get_float("cheeger.height", 0.1)
                ).witness.vertices]
            except CarveFailed:
                seeds = []
        sol = cheeger_anneal(prob, anneal, seed, seed_sets=seeds)
    manifest = dict(_meta(params, seed), command="cheeger",
                    **sol.to_json(include_witness=params.get_str(
                        "cheeger.witness", "yes") == "yes"),
                    cap=prob.cap, cluster_size=len(prob.Cn))
    _write_outputs(out_dir, {"cheeger.json": _json_bytes(manifest)})
    return EXIT_OK


def run_coarse(params: Params, out_dir: Path) -> int:
    from .coarse import type_rate

    p, d, seed, _ = _common(params)
    k_list = params.get_int_list("coarse.k_list", required=True)
    samples = params.get_int("coarse.samples", required=True)
    recs = type_rate(p, d, k_list, samples, seed)
    rows = [(r.k, r.rate, r.stderr, r.samples) for r in recs]
    files = {
        "rates.csv": _csv_bytes(["k", "rate", "stderr", "samples"], rows),
        "rates.json": _json_bytes(dict(_meta(params, seed), command="coarse",
                                       rates=[r.__dict__ for r in recs])),
    }
    _write_outputs(out_dir, files)
    return EXIT_OK


def _converge_rep(p, d, n, rep, master_seed, table, W, theta, anneal,
                  heights, K):
    seed = derive_seed(master_seed, n, rep)
    cfg = sample_configuration(p, BoxSpec(d=d, n=n, pad=n), seed)
    try:
        prob = CheegerProblem.from_configuration(cfg)
    except EmptyCluster:
        return {"n": n, "rep": rep, "status": "empty-cluster"}
    if prob.cap < 1:
        return {"n": n, "rep": rep, "status": "infeasible-cap"}
    seeds = []
    for h in heights:
        try:
            seeds.append(carve_polytope(prob, W, h=h).witness.vertices)
        except CarveFailed:
            pass
    sol = cheeger_anneal(prob, anneal, seed, seed_sets=seeds)
    n_phi = n * sol.value
    predicted = surface_energy(W, table) / (theta * W.volume)
    l1 = l1_shape_distance(sol.witness, cfg, W, Cn=prob.Cn)
    mu = empirical_measure(sol.witness, n, K)
    dd, _ = distance_to_wulff_set(mu, W, theta)
    return {
        "n": n, "rep": rep, "status": "ok",
        "phi_num": sol.phi_num, "phi_den": sol.phi_den,
        "n_phi": n_phi, "predicted": predicted,
        "ratio": n_phi / predicted if predicted > 0 else math.inf,
        "l1_dist": l1, "d_dist": dd,
    }


def run_converge(params: Params, out_dir: Path) -> int:
    p, d, seed, threads = _common(params)
    n_list = params.get_int_list("converge.n_list", required=True)
    reps = params.get_int("converge.seeds_per_n", required=True)
    table = _load_table(params, "converge.beta_table")
    K = params.get_int("converge.K", 8)
    heights_raw = params.get_str("converge.heights", "0.1,0.15,0.22")
    try:
        heights = [float(tok) for tok in heights_raw.split(",") if tok]
    except ValueError as exc:
        raise ConfigError("converge.heights must be a comma list of "
                          "numbers") from exc
    theta_samples = params.get_int("converge.theta_samples", 30)
    theta_n = params.get_int("converge.theta_n", max(n_list))
    anneal = AnnealParams(
        restarts=params.get_int("converge.restarts", 3),
        steps=params.get_int("converge.steps", 100_000),
        cooling=params.get_float("converge.cooling", 0.9995),
    )
    W = dilate_to_volume(wulff_crystal(table), reference_volume(d))
    theta = density_estimate(p, d, theta_n, theta_samples,
                             derive_seed(seed, 0xD0)).theta
    if theta <= 0:
        raise ConfigError("estimated cluster density is zero; "
                          "model.p looks subcritical")

    jobs = [(n, rep) for n in n_list for rep in range(reps)]

    def work(job):
        n, rep = job
        return _converge_rep(p, d, n, rep, seed, table, W, theta, anneal,
                             heights, K)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(job) for job in jobs]

    ok = [r for r in results if r["status"] == "ok"]
    header = ["n", "rep", "status", "phi_num", "phi_den", "n_phi",
              "predicted", "ratio", "l1_dist", "d_dist"]
    rows = [[r.get(k, "") for k in header] for r in results]
    files = {
        "converge.csv": _csv_bytes(header, rows),
        "converge.json": _json_bytes(dict(
            _meta(params, seed), command="converge", theta=theta,
            crystal_energy=surface_energy(W, table), results=results)),
    }
    _write_outputs(out_dir, files)
    if not ok:
        print("error: every repetition failed", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


COMMANDS = {
    "sample": run_sample,
    "beta": run_beta,
    "wulff": run_wulff,
    "cheeger": run_cheeger,
    "coarse": run_coarse,
    "converge": run_converge,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perciso",
        description="percolation isoperimetry experiment driver")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config run.out, "
                             "else $PERCISO_OUT/<command>)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override run.seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="override run.threads")
    args = parser.parse_args(argv)

    try:
        flat = load_config(args.config)
        if args.seed is not None:
            flat["run.seed"] = str(args.seed)
        if args.threads is not None:
            flat["run.threads"] = str(args.threads)
        if args.out is not None:
            flat["run.out"] = args.out
        params = Params(flat)
        out = params.get_str("run.out")
        if out is None:
            root = os.environ.get("PERCISO_OUT")
            if root is None:
                raise ConfigError("no output directory: set run.out, "
                                  "--out, or $PERCISO_OUT")
            out = str(Path(root) / args.command)
        return COMMANDS[args.command](params, Path(out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
