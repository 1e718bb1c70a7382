"""Joint PCA over fitted weight vectors, projection and inverse mapping."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rfftrack.errors import InvalidArgumentError

__all__ = [
    "TrajectoryProjection",
    "axis_sweep_coords",
    "explained_variance",
    "fit_pca",
    "inverse_map",
    "load_projection",
    "project",
    "save_projection",
    "write_trajectory_csv",
]

DEFAULT_SWEEP_SPACING = 50.0


@dataclass(frozen=True)
class TrajectoryProjection:
    mean: np.ndarray  # (K,)
    components: np.ndarray  # (n_components, K), rows are unit vectors
    eigenvalues: np.ndarray  # non-increasing
    coords: np.ndarray  # (n_inputs, n_components)
    keys: tuple = ()  # (instance, time) per input row

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def coords_for(self, instance: str) -> tuple[list[str], np.ndarray]:
        rows = [i for i, (inst, _) in enumerate(self.keys) if inst == instance]
        return [self.keys[i][1] for i in rows], self.coords[rows]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "coords": self.coords.tolist(),
            "keys": [list(k) for k in self.keys],
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrajectoryProjection:
        k = len(d["mean"])
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            components=np.asarray(d["components"], dtype=np.float64).reshape(-1, k),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=np.float64),
            coords=np.asarray(d["coords"], dtype=np.float64).reshape(len(d["keys"]) or -1, -1),
            keys=tuple(tuple(x) for x in d["keys"]),
        )


def _orient(components: np.ndarray) -> np.ndarray:
    # largest |entry| positive; argmax picks the lowest index on ties
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(len(components)), idx])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def fit_pca(weights, keys=None) -> TrajectoryProjection:
    """Eigendecomposition of the 1/(n-1) covariance of the stacked weights."""
    try:
        w = np.asarray(weights, dtype=np.float64)
    except ValueError:
        raise InvalidArgumentError("weight vectors have inconsistent lengths") from None
    if w.ndim != 2:
        raise InvalidArgumentError("weight vectors have inconsistent lengths")
    if len(w) < 2:
        raise InvalidArgumentError("PCA needs at least two weight vectors")
    mean = w.mean(axis=0)
    centered = w - mean
    cov = centered.T @ centered / (len(w) - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    comps = _orient(evecs[:, order].T)
    # round-off noise from eigh is not variance
    tol = max(evals.max(initial=0.0), 0.0) * w.shape[1] * np.finfo(float).eps * 10
    evals = np.where(evals > tol, evals, 0.0)
    coords = centered @ comps.T
    if keys is None:
        keys = tuple(("", str(i)) for i in range(len(w)))
    keys = tuple((str(a), str(b)) for a, b in keys)
    if len(keys) != len(w):
        raise InvalidArgumentError("one key per weight vector is required")
    return TrajectoryProjection(mean, comps, evals, coords, keys)


def _check_axes(proj: TrajectoryProjection, axes) -> list[int]:
    axes = [int(a) for a in axes]
    for a in axes:
        if not 0 <= a < proj.n_components:
            raise InvalidArgumentError(f"component index {a} out of range [0, {proj.n_components})")
    return axes


def project(proj: TrajectoryProjection, w, axes=(0, 1)) -> np.ndarray:
    axes = _check_axes(proj, axes)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != proj.mean.shape[0]:
        raise InvalidArgumentError(f"weight vectors must have length {proj.mean.shape[0]}")
    return (w - proj.mean) @ proj.components[axes].T


def inverse_map(proj: TrajectoryProjection, coords, axes=(0, 1)) -> np.ndarray:
    axes = _check_axes(proj, axes)
    c = np.asarray(coords, dtype=np.float64)
    if c.shape[-1] != len(axes):
        raise InvalidArgumentError("need one coordinate per requested axis")
    return proj.mean + c @ proj.components[axes]


def explained_variance(proj: TrajectoryProjection) -> list[float]:
    total = float(proj.eigenvalues.sum())
    if total <= 0:
        return []
    return [float(e) / total for e in proj.eigenvalues]


def axis_sweep_coords(values, spacing: float = DEFAULT_SWEEP_SPACING) -> np.ndarray:
    """Multiples of ``spacing`` covering [min(values), max(values)]."""
    v = np.asarray(values, dtype=np.float64)
    if spacing <= 0:
        raise InvalidArgumentError("spacing must be positive")
    lo = np.floor(v.min() / spacing)
    hi = np.ceil(v.max() / spacing)
    return spacing * np.arange(lo, hi + 1)


def write_trajectory_csv(proj: TrajectoryProjection, axes, path) -> Path:
    """Columns instance,time,pc<i>... with 1-based component numbers."""
    axes = _check_axes(proj, axes)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "time", *(f"pc{a + 1}" for a in axes)])
        for (inst, t), row in zip(proj.keys, proj.coords[:, axes]):
            w.writerow([inst, t, *(repr(float(v)) for v in row)])
    return path


def save_projection(proj: TrajectoryProjection, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(proj.to_dict(), indent=1) + "\n")
    return path


def load_projection(path) -> TrajectoryProjection:
    return TrajectoryProjection.from_dict(json.loads(Path(path).read_text()))
