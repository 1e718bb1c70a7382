"""Loading and preparing real-world point sets: crime reports and usage embeddings."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rfftrack._seeds import derive_seed
from rfftrack.errors import DataError, InsufficientDataError, InvalidArgumentError
from rfftrack.series import VectorSetSeries
from rfftrack.trajectory import explained_variance, fit_pca, project

__all__ = [
    "CRIME_COLUMNS",
    "CrimeRecord",
    "NormMode",
    "NormalizationParams",
    "load_crime_csv",
    "load_embedding_sets",
    "normalize",
    "reduce_embeddings",
    "sample_periods",
]

log = logging.getLogger(__name__)

CRIME_COLUMNS = {
    "date": "Date",
    "latitude": "Latitude",
    "longitude": "Longitude",
    "primary_type": "Primary Type",
}

_DATE_FORMATS = ("%m/%d/%Y %I:%M:%S %p", "%m/%d/%Y %H:%M:%S", "%m/%d/%Y", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d")


@dataclass(frozen=True)
class CrimeRecord:
    timestamp: dt.datetime
    latitude: float
    longitude: float
    primary_type: str


def _parse_date(text: str) -> dt.datetime | None:
    text = text.strip()
    for fmt in _DATE_FORMATS:
        try:
            return dt.datetime.strptime(text, fmt)
        except ValueError:
            pass
    try:
        return dt.datetime.fromisoformat(text)
    except ValueError:
        return None


def load_crime_csv(path, type_filter: str, columns: dict | None = None) -> tuple[list[CrimeRecord], int]:
    """Rows whose primary type equals ``type_filter`` (case-insensitive).

    Returns (records, skipped) where ``skipped`` counts matching rows dropped
    for a missing or invalid date or coordinate.
    """
    cols = {**CRIME_COLUMNS, **(columns or {})}
    path = Path(path)
    if not path.is_file():
        raise DataError(f"crime file not found: {path}")
    wanted = type_filter.strip().upper()
    records, skipped = [], 0
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in cols.values() if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing required columns {missing}")
        for row in reader:
            if row[cols["primary_type"]].strip().upper() != wanted:
                continue
            when = _parse_date(row[cols["date"]] or "")
            try:
                lat = float(row[cols["latitude"]])
                lon = float(row[cols["longitude"]])
            except (TypeError, ValueError):
                skipped += 1
                continue
            if when is None or not (-90 <= lat <= 90 and -180 <= lon <= 180):
                skipped += 1
                continue
            records.append(CrimeRecord(when, lat, lon, row[cols["primary_type"]].strip()))
    if skipped:
        log.info("%s: skipped %d %s rows without usable date/coordinates", path, skipped, wanted)
    if not records:
        raise DataError(f"{path}: no usable rows of type {type_filter!r}")
    return records, skipped


def sample_periods(records, years, per_year: int = 200, seed: int = 0, label: str = "") -> VectorSetSeries:
    """Uniform sample without replacement of ``per_year`` incidents per year.

    Points are (longitude, latitude) so x runs east.
    """
    years = [int(y) for y in years]
    if not years:
        raise InvalidArgumentError("years must be non-empty")
    if per_year < 1:
        raise InvalidArgumentError("per_year must be >= 1")
    by_year: dict[int, list[CrimeRecord]] = {}
    for r in records:
        by_year.setdefault(r.timestamp.year, []).append(r)
    steps = []
    for y in years:
        pool = by_year.get(y, [])
        if len(pool) < per_year:
            raise InsufficientDataError(f"year {y}: {len(pool)} records available, {per_year} requested")
        rng = np.random.default_rng(derive_seed(seed, "crime", label, y))
        idx = rng.choice(len(pool), size=per_year, replace=False)
        steps.append((str(y), np.array([[pool[i].longitude, pool[i].latitude] for i in idx])))
    if not label and records:
        label = records[0].primary_type
    return VectorSetSeries(label, tuple(steps))


class NormMode(str, enum.Enum):
    ISO = "CenterScaleIso"
    PER_AXIS = "CenterScalePerAxis"


@dataclass(frozen=True)
class NormalizationParams:
    center: np.ndarray
    scale: np.ndarray  # per axis; equal entries in isotropic mode
    mode: NormMode = NormMode.ISO

    def apply(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) / self.scale

    def invert(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.center

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> NormalizationParams:
        return cls(np.asarray(d["center"], float), np.asarray(d["scale"], float), NormMode(d["mode"]))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        return path


def normalize(series: VectorSetSeries, mode: NormMode | str = NormMode.ISO) -> tuple[VectorSetSeries, NormalizationParams]:
    """Center and scale with statistics pooled over every step."""
    mode = NormMode(mode)
    pooled = series.pooled()
    if len(pooled) < 2:
        raise InsufficientDataError("normalization needs at least two points")
    std = pooled.std(axis=0)
    if not np.any(std > 0):
        raise DataError("all points are identical; nothing to normalize")
    center = pooled.mean(axis=0)
    if mode is NormMode.ISO:
        scale = np.full_like(std, std.mean())
    else:
        scale = std.copy()
        flat = scale <= 0
        if flat.any():
            warnings.warn(f"zero-variance axes {np.flatnonzero(flat).tolist()} left unscaled", RuntimeWarning, stacklevel=2)
            scale[flat] = 1.0
    params = NormalizationParams(center, scale, mode)
    return series.map_points(params.apply), params


def load_embedding_sets(paths, label: str = "") -> VectorSetSeries:
    """One step per file (comma-separated, one usage vector per row), labelled by file stem."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise InvalidArgumentError("no embedding files given")
    steps, first = [], None
    for p in paths:
        if not p.is_file():
            raise DataError(f"embedding file not found: {p}")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                m = np.loadtxt(p, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"{p}: malformed matrix ({exc})") from None
        if m.size == 0:
            raise DataError(f"{p}: empty embedding file")
        if first is not None and m.shape[1] != first[1]:
            raise DataError(f"dimension mismatch: {first[0]} has {first[1]} columns, {p} has {m.shape[1]}")
        first = first or (p, m.shape[1])
        steps.append((p.stem, m))
    return VectorSetSeries(label or paths[0].parent.name, tuple(steps))


def reduce_embeddings(series: VectorSetSeries, target_dim: int = 2) -> tuple[VectorSetSeries, list[float]]:
    """Project every step onto the top principal axes of the pooled points.

    Returns the reduced series and the explained-variance ratios of the kept axes.
    """
    pooled = series.pooled()
    if not 1 <= target_dim <= series.dim:
        raise InvalidArgumentError(f"target_dim must lie in [1, {series.dim}]")
    if len(pooled) < max(target_dim, 2):
        raise InsufficientDataError("too few pooled points for the requested dimension")
    proj = fit_pca(pooled)
    axes = list(range(target_dim))
    ratios = explained_variance(proj)[:target_dim]
    return series.map_points(lambda p: project(proj, p, axes)), ratios
