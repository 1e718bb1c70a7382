"""Command-line pipeline: synthetic generation, ingest, fitting, projection, heatmaps.

Settings resolve in order: built-in defaults < ``--config`` JSON file <
``RFFTRACK_*`` environment variables < command-line flags. Environment keys
address nested settings with ``__``, e.g. ``RFFTRACK_MH__N_ITERATIONS=2000``.

Exit codes: 0 ok, 2 configuration/argument error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from rfftrack import __version__
from rfftrack._seeds import derive_seed
from rfftrack.density import (
    DensityFit,
    count_modes,
    default_bounds,
    evaluate_grid,
    write_grid_csv,
    write_grid_pgm,
)
from rfftrack.errors import ConfigError, DataError, InvalidArgumentError, NumericError, RffTrackError
from rfftrack.inference import MHConfig, NoiseConfig, fit_series, load_fit_file, pooled_box, save_fit_file
from rfftrack.ingest import load_crime_csv, load_embedding_sets, normalize, reduce_embeddings, sample_periods
from rfftrack.rff_basis import PhaseRange, load_basis, median_heuristic_sigma, sample_basis, save_basis
from rfftrack.series import VectorSetSeries, read_series_csv, write_series_csv
from rfftrack.synthetic import SyntheticSpec, generate_suite
from rfftrack.trajectory import (
    axis_sweep_coords,
    explained_variance,
    fit_pca,
    inverse_map,
    save_projection,
    write_trajectory_csv,
)

log = logging.getLogger("rfftrack")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
ENV_PREFIX = "RFFTRACK_"

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "out": "rfftrack-out",
    "source": "synthetic",
    "workers": 1,
    "basis": {"k": 30, "sigma": "median", "phase_range": "TwoPi"},
    "noise": {"ratio": 4.0, "margin": 0.25},
    "mh": {
        "n_iterations": 20000,
        "burn_in": 10000,
        "thin": 10,
        "step_size": 0.2,
        "prior_w_std": 5.0,
        "prior_c_std": 10.0,
        "estimator": "PosteriorMean",
    },
    "grid": {"resolution": 100, "margin": 0.25, "mode_threshold": 0.1},
    "axes": [1, 2],
    "axis_sweep": False,
    "sweep_spacing": 50.0,
    "heatmaps": True,
    "synthetic": {"n_steps": 10, "n_points": 200, "cluster_std": 0.5, "travel": 4.0},
    "crime": {
        "path": None,
        "categories": ["INTERFERENCE WITH PUBLIC OFFICER", "WEAPONS VIOLATION", "PROSTITUTION", "NARCOTICS"],
        "years": list(range(2001, 2020, 3)),
        "per_year": 200,
        "norm_mode": "CenterScaleIso",
        "columns": {},
    },
    "embeddings": {"words": {}, "target_dim": 2},
}


# ---------------------------------------------------------------- config


def _deep_update(base: dict, extra: dict) -> dict:
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], val)
        else:
            base[key] = val
    return base


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _env_overrides(environ) -> dict:
    out: dict = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_scalar(raw)
    return out


def _parse_axes(value) -> list[int]:
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    try:
        axes = [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"axes must be comma-separated 1-based integers, got {value!r}") from None
    if not axes or any(a < 1 for a in axes):
        raise ConfigError("axes are 1-based and must be non-empty")
    return axes


def load_config(args, environ=None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        p = Path(args.config)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            _deep_update(cfg, json.loads(p.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    _deep_update(cfg, _env_overrides(os.environ if environ is None else environ))
    flag_map = {
        "seed": ("seed",),
        "k": ("basis", "k"),
        "sigma": ("basis", "sigma"),
        "axes": ("axes",),
        "axis_sweep": ("axis_sweep",),
        "grid_res": ("grid", "resolution"),
        "out": ("out",),
        "iterations": ("mh", "n_iterations"),
        "burn_in": ("mh", "burn_in"),
        "workers": ("workers",),
    }
    for attr, path in flag_map.items():
        val = getattr(args, attr, None)
        if val is None or val is False:
            continue
        node = cfg
        for part in path[:-1]:
            node = node[part]
        node[path[-1]] = val
    cfg["axes"] = _parse_axes(cfg["axes"])
    sigma = cfg["basis"]["sigma"]
    if sigma != "median":
        try:
            cfg["basis"]["sigma"] = float(sigma)
        except (TypeError, ValueError):
            raise ConfigError(f"sigma must be a positive number or 'median', got {sigma!r}") from None
    return cfg


def _mh_config(cfg: dict) -> MHConfig:
    known = {f.name for f in fields(MHConfig)} - {"seed"}
    unknown = set(cfg["mh"]) - known
    if unknown:
        raise ConfigError(f"unknown mh settings {sorted(unknown)}")
    return MHConfig(seed=derive_seed(cfg["seed"], "mh"), **cfg["mh"])


# ---------------------------------------------------------------- helpers


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


class Artifacts:
    """Collects written files so commands can report and hash them."""

    def __init__(self, root: Path):
        self.root = root
        self.paths: list[Path] = []

    def add(self, path: Path) -> Path:
        self.paths.append(Path(path))
        return path

    def manifest_entries(self) -> list[dict]:
        return [
            {"path": p.relative_to(self.root).as_posix(), "sha256": _sha256(p)}
            for p in sorted(set(self.paths))
        ]


# ---------------------------------------------------------------- stages


def gen_synthetic(cfg: dict, out: Path, art: Artifacts) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    try:
        base = SyntheticSpec(**cfg["synthetic"])
    except TypeError as exc:
        raise ConfigError(f"synthetic settings: {exc}") from None
    suite = generate_suite(cfg["seed"], base)
    paths, entries = [], []
    for s in suite:
        p = art.add(write_series_csv(s, out / f"{_safe(s.instance_label)}.csv"))
        paths.append(p)
        entries.append({"label": s.instance_label, "file": p.name, "seed": derive_seed(cfg["seed"], "synthetic", s.instance_label)})
    art.add(_write_json(out / "manifest.json", {"suite_seed": cfg["seed"], "series": entries, "spec": cfg["synthetic"]}))
    return paths


def fit_all(cfg: dict, series_list: list[VectorSetSeries], out: Path, art: Artifacts, sources=None) -> list[Path]:
    """Fit every series on one shared basis and one pooled noise box."""
    if not series_list:
        raise DataError("no series to fit")
    dims = {s.dim for s in series_list}
    if len(dims) != 1:
        raise DataError(f"series have mixed dimensionality {sorted(dims)}")
    labels = [s.instance_label for s in series_list]
    if len(set(labels)) != len(labels):
        raise DataError("instance labels must be unique across fitted series")
    out.mkdir(parents=True, exist_ok=True)
    all_sets = [p for s in series_list for _, p in s.steps]
    pooled = np.vstack(all_sets)
    sigma = cfg["basis"]["sigma"]
    if sigma == "median":
        sigma = median_heuristic_sigma(pooled, seed=derive_seed(cfg["seed"], "median"))
    basis = sample_basis(dims.pop(), int(cfg["basis"]["k"]), float(sigma), PhaseRange(cfg["basis"]["phase_range"]), derive_seed(cfg["seed"], "basis"))
    basis_path = art.add(save_basis(basis, out / "basis.json"))
    box = pooled_box(all_sets, float(cfg["noise"]["margin"]))
    noise = NoiseConfig(ratio=float(cfg["noise"]["ratio"]), box=box, seed=derive_seed(cfg["seed"], "noise"))
    mh = _mh_config(cfg)
    paths = []
    for idx, s in enumerate(series_list):
        log.info("fitting %s (%d steps)", s.instance_label, len(s))
        try:
            fits = fit_series(s, basis, noise, mh, workers=int(cfg.get("workers", 1)))
        except RffTrackError as exc:
            raise type(exc)(f"series {s.instance_label}: {exc}") from exc
        bounds = {t: [list(b) for b in default_bounds(p, float(cfg["grid"]["margin"]))] for t, p in s.steps}
        extra = {
            "noise_box": [list(b) for b in box],
            "step_bounds": bounds,
            "n_points": {t: len(p) for t, p in s.steps},
        }
        if sources:
            # relative, so relocated runs hash identically
            extra["series_file"] = Path(os.path.relpath(Path(sources[idx]).resolve(), out.resolve())).as_posix()
        paths.append(art.add(save_fit_file(out / f"{_safe(s.instance_label)}.fit.json", s.instance_label, fits, basis_path.name, extra)))
    return paths


def _resolve_basis(fit_path: Path, doc: dict, basis_path=None):
    candidate = Path(basis_path) if basis_path else fit_path.parent / doc.get("basis_file", "basis.json")
    if not candidate.is_file():
        raise DataError(f"basis file not found for {fit_path}: {candidate}")
    basis = load_basis(candidate)
    if doc.get("basis_ref") and doc["basis_ref"] != basis.basis_id:
        raise DataError(f"{fit_path} was fitted with basis {doc['basis_ref']}, {candidate} is {basis.basis_id}")
    return basis


def _read_fits(paths) -> list[tuple[Path, str, list[DensityFit], dict]]:
    out = []
    for p in paths:
        p = Path(p)
        if not p.is_file():
            raise DataError(f"fit file not found: {p}")
        try:
            inst, fits, doc = load_fit_file(p)
        except (KeyError, json.JSONDecodeError) as exc:
            raise DataError(f"{p}: malformed fit file ({exc})") from None
        out.append((p, inst, fits, doc))
    return out


def write_heatmap(fit: DensityFit, basis, bounds, resolution: int, stem: Path, art: Artifacts):
    grid = evaluate_grid(fit, basis, bounds, resolution)
    art.add(write_grid_csv(grid, stem.with_suffix(".csv")))
    art.add(write_grid_pgm(grid, stem.with_suffix(".pgm")))
    return grid


def _instance_view(proj, instance):
    rows = [i for i, k in enumerate(proj.keys) if k[0] == instance]
    return type(proj)(proj.mean, proj.components, proj.eigenvalues, proj.coords[rows], tuple(proj.keys[i] for i in rows))


def project_all(cfg: dict, fit_paths, out: Path, art: Artifacts, basis_path=None) -> dict:
    loaded = _read_fits(fit_paths)
    weights, keys = [], []
    for _, inst, fits, _ in loaded:
        for f in fits:
            weights.append(f.weights)
            keys.append((inst, f.label))
    if len(weights) < 2:
        raise DataError("projection needs at least two weight vectors")
    if len({len(w) for w in weights}) != 1:
        raise DataError("fit files disagree on K")
    refs = {doc.get("basis_ref") for _, _, _, doc in loaded}
    if len(refs) > 1:
        raise DataError("fit files were produced with different bases; weights are not comparable")
    proj = fit_pca(weights, keys)
    axes = [a - 1 for a in cfg["axes"]]
    if max(axes) >= proj.n_components:
        raise ConfigError(f"axis {max(axes) + 1} exceeds the {proj.n_components} available components")
    out.mkdir(parents=True, exist_ok=True)
    art.add(write_trajectory_csv(proj, axes, out / "trajectory.csv"))
    for _, inst, _, _ in loaded:
        sub = _instance_view(proj, inst)
        art.add(write_trajectory_csv(sub, axes, out / f"trajectory_{_safe(inst)}.csv"))
    art.add(save_projection(proj, out / "projection.json"))
    art.add(_write_json(out / "explained_variance.json", explained_variance(proj)))
    summary = {"n_vectors": len(weights), "axes": cfg["axes"]}
    if cfg.get("axis_sweep"):
        p0, _, _, doc0 = loaded[0]
        basis = _resolve_basis(p0, doc0, basis_path)
        bounds = doc0.get("noise_box")
        if not bounds:
            raise DataError(f"{p0}: no noise_box recorded; cannot place sweep grids")
        sweep_dir = out / "sweep"
        sweep_dir.mkdir(exist_ok=True)
        spacing = float(cfg["sweep_spacing"])
        n = 0
        for a in axes:
            for value in axis_sweep_coords(proj.coords[:, a], spacing):
                w = inverse_map(proj, [value], [a])
                fit = DensityFit(weights=w, offset=0.0, basis_ref=basis.basis_id, label=f"pc{a + 1}={value:g}")
                write_heatmap(fit, basis, bounds, int(cfg["grid"]["resolution"]), sweep_dir / f"pc{a + 1}_{value:+g}", art)
                n += 1
        summary["sweep_grids"] = n
    return summary


def heatmaps_for(cfg: dict, fit_path: Path, steps, out: Path, art: Artifacts, basis_path=None) -> dict:
    ((p, inst, fits, doc),) = _read_fits([fit_path])
    basis = _resolve_basis(p, doc, basis_path)
    by_label = {f.label: f for f in fits}
    wanted = list(by_label) if steps is None else [str(s) for s in steps]
    out.mkdir(parents=True, exist_ok=True)
    modes = {}
    for label in wanted:
        if label not in by_label:
            raise DataError(f"{p}: no step {label!r}; available: {', '.join(by_label)}")
        bounds = doc.get("step_bounds", {}).get(label) or doc.get("noise_box")
        grid = write_heatmap(by_label[label], basis, bounds, int(cfg["grid"]["resolution"]), out / f"{_safe(inst)}_{_safe(label)}", art)
        modes[label] = count_modes(grid, float(cfg["grid"]["mode_threshold"]))
    return modes


def ingest_crime(cfg: dict, path, category: str, out: Path, art: Artifacts) -> Path:
    c = cfg["crime"]
    records, skipped = load_crime_csv(path, category, c.get("columns") or None)
    label = _safe(category.title().replace(" ", ""))
    series = sample_periods(records, c["years"], int(c["per_year"]), derive_seed(cfg["seed"], "crime"), label=label)
    normed, params = normalize(series, c["norm_mode"])
    out.mkdir(parents=True, exist_ok=True)
    p = art.add(write_series_csv(normed, out / f"{label}.csv"))
    side = params.to_dict()
    side["skipped_rows"] = skipped
    art.add(_write_json(out / f"{label}.norm.json", side))
    return p


def ingest_embeddings(cfg: dict, files, label: str, out: Path, art: Artifacts) -> Path:
    series = load_embedding_sets(files, label)
    reduced, ratios = reduce_embeddings(series, int(cfg["embeddings"]["target_dim"]))
    out.mkdir(parents=True, exist_ok=True)
    p = art.add(write_series_csv(reduced, out / f"{_safe(label)}.csv"))
    art.add(_write_json(out / f"{_safe(label)}.pca.json", {"explained_variance": ratios, "input_dim": series.dim}))
    return p


def _load_series_files(paths) -> tuple[list[VectorSetSeries], list[Path]]:
    series, sources = [], []
    for p in paths:
        for s in read_series_csv(p):
            series.append(s)
            sources.append(Path(p))
    return series, sources


def run_pipeline(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    art = Artifacts(out)
    source = cfg["source"]
    stage = "ingest"
    try:
        if source == "synthetic":
            series_paths = gen_synthetic(cfg, out / "series", art)
        elif source == "crime":
            if not cfg["crime"]["path"]:
                raise ConfigError("crime.path is required for source 'crime'")
            series_paths = [ingest_crime(cfg, cfg["crime"]["path"], cat, out / "series", art) for cat in cfg["crime"]["categories"]]
        elif source == "embeddings":
            words = cfg["embeddings"]["words"]
            if not words:
                raise ConfigError("embeddings.words must map each word to its per-period files")
            series_paths = [ingest_embeddings(cfg, files, word, out / "series", art) for word, files in words.items()]
        else:
            raise ConfigError(f"unknown source {source!r}")
        stage = "fit"
        series, sources = _load_series_files(series_paths)
        fit_paths = fit_all(cfg, series, out / "fits", art, sources)
        stage = "project"
        summary = project_all(cfg, fit_paths, out / "trajectory", art)
        modes = {}
        if cfg.get("heatmaps", True):
            stage = "heatmap"
            for fp in fit_paths:
                inst = json.loads(fp.read_text())["instance"]
                modes[inst] = heatmaps_for(cfg, fp, None, out / "heatmaps", art)
            art.add(_write_json(out / "heatmaps" / "mode_counts.json", modes))
    except RffTrackError as exc:
        raise type(exc)(f"[{stage}] {exc}") from exc
    manifest = {
        "rfftrack_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "master_seed": cfg["seed"],
        "seeds": {name: derive_seed(cfg["seed"], name) for name in ("basis", "noise", "mh", "median", "crime")},
        "config": cfg,
        "projection": summary,
        "artifacts": art.manifest_entries(),
    }
    return _write_json(out / "manifest.json", manifest)


# ---------------------------------------------------------------- argparse


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_fit_flags(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, help="number of random features")
    p.add_argument("--sigma", help="frequency std, or 'median' for the median heuristic")
    p.add_argument("--iterations", type=int, help="MH iterations")
    p.add_argument("--burn-in", type=int, dest="burn_in", help="MH burn-in")
    p.add_argument("--workers", type=int, help="threads for per-step fits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfftrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write the 12-series Shift/Converge/Diverge suite")
    _add_common(p)

    p = sub.add_parser("fit", help="fit RFF weights for every step of the given series CSVs")
    _add_common(p)
    _add_fit_flags(p)
    p.add_argument("series", nargs="+", help="series CSV files (instance,time,x,y)")

    p = sub.add_parser("project", help="joint PCA of fitted weights; trajectory CSV")
    _add_common(p)
    p.add_argument("fits", nargs="+", help="fit files")
    p.add_argument("--axes", help="1-based components, e.g. 1,2 or 3,5")
    p.add_argument("--axis-sweep", action="store_true", dest="axis_sweep", help="heatmaps along each axis at the sweep spacing")
    p.add_argument("--grid-res", type=int, dest="grid_res")
    p.add_argument("--basis", help="basis file (default: the one named in the fit file)")

    p = sub.add_parser("heatmap", help="grid density CSV + PGM for one step of a fit file")
    _add_common(p)
    p.add_argument("fit", help="fit file")
    p.add_argument("--step", action="append", help="time label (repeatable; default all steps)")
    p.add_argument("--grid-res", type=int, dest="grid_res")
    p.add_argument("--basis", help="basis file")

    p = sub.add_parser("pipeline", help="run generation/ingest, fit, project and heatmaps end to end")
    _add_common(p)
    _add_fit_flags(p)
    p.add_argument("--axes")
    p.add_argument("--axis-sweep", action="store_true", dest="axis_sweep")
    p.add_argument("--grid-res", type=int, dest="grid_res")

    p = sub.add_parser("ingest-crime", help="sample, normalize and write one crime category as a series")
    _add_common(p)
    p.add_argument("csv", help="crime CSV in the city-portal schema")
    p.add_argument("--type", required=True, dest="crime_type", help="primary type, e.g. NARCOTICS")
    p.add_argument("--years", help="comma-separated years (default 2001..2019 step 3)")
    p.add_argument("--per-year", type=int, dest="per_year")
    p.add_argument("--norm-mode", choices=["CenterScaleIso", "CenterScalePerAxis"], dest="norm_mode")

    p = sub.add_parser("ingest-embeddings", help="reduce per-period embedding matrices to a low-dimensional series")
    _add_common(p)
    p.add_argument("files", nargs="+", help="one CSV matrix per period, in time order")
    p.add_argument("--label", required=True, help="instance label, e.g. the target word")
    p.add_argument("--dim", type=int, default=None, help="target dimension (default 2)")
    return parser


def _dispatch(args, cfg) -> int:
    out = Path(cfg["out"])
    art = Artifacts(out)
    cmd = args.command
    if cmd == "gen-synthetic":
        paths = gen_synthetic(cfg, out, art)
        print(f"wrote {len(paths)} series to {out}")
    elif cmd == "fit":
        series, sources = _load_series_files(args.series)
        paths = fit_all(cfg, series, out, art, sources)
        print(f"wrote {len(paths)} fit files and basis.json to {out}")
    elif cmd == "project":
        summary = project_all(cfg, args.fits, out, art, args.basis)
        print(json.dumps(summary))
    elif cmd == "heatmap":
        modes = heatmaps_for(cfg, Path(args.fit), args.step, out, art, args.basis)
        print(json.dumps({"mode_counts": modes}))
    elif cmd == "pipeline":
        print(run_pipeline(cfg))
    elif cmd == "ingest-crime":
        if args.years:
            try:
                cfg["crime"]["years"] = [int(y) for y in args.years.split(",")]
            except ValueError:
                raise ConfigError(f"--years must be comma-separated integers, got {args.years!r}") from None
        if args.per_year:
            cfg["crime"]["per_year"] = args.per_year
        if args.norm_mode:
            cfg["crime"]["norm_mode"] = args.norm_mode
        print(ingest_crime(cfg, args.csv, args.crime_type, out, art))
    elif cmd == "ingest-embeddings":
        if args.dim:
            cfg["embeddings"]["target_dim"] = args.dim
        print(ingest_embeddings(cfg, args.files, args.label, out, art))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return _dispatch(args, cfg)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"rfftrack: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"rfftrack: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"rfftrack: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"rfftrack: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
