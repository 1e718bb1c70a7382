"""Unnormalized GP density sigmoid(phi(x) . w) and its grid-normalized form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rfftrack.errors import InvalidArgumentError
from rfftrack.rff_basis import FeatureBasis, design_matrix

__all__ = [
    "DensityFit",
    "GridDensity",
    "count_modes",
    "default_bounds",
    "evaluate_grid",
    "log_sigmoid",
    "log_unnormalized_density",
    "write_grid_csv",
    "write_grid_pgm",
]

DEFAULT_RESOLUTION = 100
DEFAULT_MARGIN = 0.25


def log_sigmoid(z):
    """log(1 / (1 + exp(-z))) without overflow."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


@dataclass(frozen=True)
class DensityFit:
    weights: np.ndarray
    offset: float
    basis_ref: str
    acceptance_rate: float = 0.0
    n_iterations: int = 1
    burn_in: int = 0
    objective_trace: tuple = ()
    label: str = ""
    seeds: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise InvalidArgumentError("weights must be a vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise InvalidArgumentError("acceptance_rate must lie in [0, 1]")
        if not 0 <= self.burn_in < self.n_iterations:
            raise InvalidArgumentError("burn_in must be smaller than n_iterations")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "weights": self.weights.tolist(),
            "offset": float(self.offset),
            "basis_ref": self.basis_ref,
            "acceptance_rate": float(self.acceptance_rate),
            "n_iterations": int(self.n_iterations),
            "burn_in": int(self.burn_in),
            "seeds": dict(self.seeds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DensityFit:
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            offset=float(d["offset"]),
            basis_ref=d.get("basis_ref", ""),
            acceptance_rate=float(d.get("acceptance_rate", 0.0)),
            n_iterations=int(d.get("n_iterations", 1)),
            burn_in=int(d.get("burn_in", 0)),
            label=str(d.get("label", "")),
            seeds=dict(d.get("seeds", {})),
        )


@dataclass(frozen=True)
class GridDensity:
    bounds: tuple  # ((min, max), ...) one pair per axis
    resolution: tuple
    values: np.ndarray
    cell_area: float

    def axis_centers(self) -> list[np.ndarray]:
        out = []
        for (lo, hi), n in zip(self.bounds, self.resolution):
            h = (hi - lo) / n
            out.append(lo + h * (np.arange(n) + 0.5))
        return out

    @property
    def total_mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def argmax_point(self) -> np.ndarray:
        idx = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return np.array([c[i] for c, i in zip(self.axis_centers(), idx)])


def _check_fit(fit: DensityFit, basis: FeatureBasis):
    if fit.k != basis.k:
        raise InvalidArgumentError(f"fit has {fit.k} weights but basis has K={basis.k}")


def log_unnormalized_density(fit: DensityFit, basis: FeatureBasis, x) -> float:
    _check_fit(fit, basis)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (basis.dim,):
        raise InvalidArgumentError(f"x must have length {basis.dim}, got shape {x.shape}")
    return float(log_sigmoid(design_matrix(basis, x[None, :])[0] @ fit.weights))


def default_bounds(points, margin: float = DEFAULT_MARGIN) -> tuple:
    """Bounding box of ``points`` grown by ``margin`` of its extent on each side."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    # a flat axis still needs a non-degenerate extent
    span = np.where(span > 0, span, 1.0)
    return tuple((float(a - margin * s), float(b + margin * s)) for a, b, s in zip(lo, hi, span))


def evaluate_grid(
    fit: DensityFit,
    basis: FeatureBasis,
    bounds,
    resolution=DEFAULT_RESOLUTION,
) -> GridDensity:
    """sigmoid(f) at cell centers, divided by its Riemann sum.

    Works for 1-D and 2-D bases; ``values[i, j]`` is the cell at x-center i and
    y-center j.
    """
    _check_fit(fit, basis)
    if basis.dim not in (1, 2):
        raise InvalidArgumentError("grid evaluation supports 1-D and 2-D bases only")
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if len(bounds) != basis.dim:
        raise InvalidArgumentError(f"need {basis.dim} (min, max) pairs, got {len(bounds)}")
    if np.isscalar(resolution):
        resolution = (int(resolution),) * basis.dim
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != basis.dim or any(r < 2 for r in resolution):
        raise InvalidArgumentError("resolution must be >= 2 per axis")
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise InvalidArgumentError(f"degenerate bounds ({lo}, {hi})")

    steps = [(hi - lo) / n for (lo, hi), n in zip(bounds, resolution)]
    centers = [lo + h * (np.arange(n) + 0.5) for (lo, _), h, n in zip(bounds, steps, resolution)]
    mesh = np.meshgrid(*centers, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    logv = log_sigmoid(design_matrix(basis, pts) @ fit.weights)
    # rescale before exp; the constant cancels in the normalization
    v = np.exp(logv - logv.max()).reshape(resolution)
    cell_area = float(np.prod(steps))
    v = v / (v.sum() * cell_area)
    v.setflags(write=False)
    return GridDensity(bounds, resolution, v, cell_area)


def count_modes(grid: GridDensity, threshold_frac: float = 0.1) -> int:
    """Strict local maxima (8-neighbourhood in 2-D) at or above threshold_frac * max."""
    if not 0.0 < threshold_frac < 1.0:
        raise InvalidArgumentError("threshold_frac must lie in (0, 1)")
    v = np.asarray(grid.values, dtype=np.float64)
    padded = np.pad(v, 1, constant_values=-np.inf)
    neighbours = []
    for offset in np.ndindex(*(3,) * v.ndim):
        if all(o == 1 for o in offset):
            continue
        sl = tuple(slice(o, o + n) for o, n in zip(offset, v.shape))
        neighbours.append(padded[sl])
    peak = v > np.max(neighbours, axis=0)
    return int(np.count_nonzero(peak & (v >= threshold_frac * v.max())))


def write_grid_csv(grid: GridDensity, path) -> Path:
    if len(grid.resolution) != 2:
        raise InvalidArgumentError("grid export is 2-D only")
    path = Path(path)
    xs, ys = grid.axis_centers()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "density"])
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(grid.values[i, j]))])
    return path


def write_grid_pgm(grid: GridDensity, path) -> Path:
    """8-bit binary PGM, max density -> 255, y increasing upwards."""
    if len(grid.resolution) != 2:
        raise InvalidArgumentError("grid export is 2-D only")
    path = Path(path)
    v = np.asarray(grid.values)
    vmax = v.max()
    scaled = np.rint(255.0 * v / vmax) if vmax > 0 else np.zeros_like(v)
    # rows of the image run top to bottom, so flip the y axis
    img = np.clip(scaled, 0, 255).astype(np.uint8).T[::-1]
    nx, ny = grid.resolution
    with path.open("wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return path


def read_grid_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (x centers, y centers, values) from an exported grid CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    return xs, ys, data[:, 2].reshape(len(xs), len(ys))
