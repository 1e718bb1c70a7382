"""Shared random Fourier feature map approximating the Gaussian kernel.

phi_k(x) = sqrt(2/K) * cos(omega_k . x + b_k),  omega_k ~ N(0, sigma^2 I)

so that phi(x) . phi(x') ~= exp(-sigma^2 |x - x'|^2 / 2) when the phases are
uniform on [0, 2*pi).
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from rfftrack.errors import InvalidArgumentError

__all__ = [
    "FeatureBasis",
    "PhaseRange",
    "design_matrix",
    "eval_features",
    "load_basis",
    "median_heuristic_sigma",
    "sample_basis",
    "save_basis",
]


class PhaseRange(str, enum.Enum):
    PAPER_UNIT = "PaperUnit"  # b ~ Unif[0, 1)
    TWO_PI = "TwoPi"  # b ~ Unif[0, 2*pi), unbiased kernel estimator

    @property
    def upper(self) -> float:
        return 1.0 if self is PhaseRange.PAPER_UNIT else 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class FeatureBasis:
    dim: int
    k: int
    sigma: float
    phase_range: PhaseRange
    seed: int
    unit_frequencies: np.ndarray = field(repr=False)  # (k, dim) draws from N(0, I)
    phases: np.ndarray = field(repr=False)  # (k,)

    def __post_init__(self):
        uf = np.array(self.unit_frequencies, dtype=np.float64)
        ph = np.array(self.phases, dtype=np.float64)
        if uf.shape != (self.k, self.dim):
            raise InvalidArgumentError(f"frequencies must have shape ({self.k}, {self.dim}), got {uf.shape}")
        if ph.shape != (self.k,):
            raise InvalidArgumentError(f"phases must have shape ({self.k},), got {ph.shape}")
        if np.any(ph < 0) or np.any(ph >= self.phase_range.upper):
            raise InvalidArgumentError("phase outside the selected phase range")
        uf.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "unit_frequencies", uf)
        object.__setattr__(self, "phases", ph)
        freq = self.sigma * uf
        freq.setflags(write=False)
        object.__setattr__(self, "_frequencies", freq)

    @property
    def frequencies(self) -> np.ndarray:
        return self._frequencies

    @property
    def scale(self) -> float:
        return float(np.sqrt(2.0 / self.k))

    def with_sigma(self, sigma: float) -> FeatureBasis:
        """Same seed draw rescaled to a new bandwidth."""
        _check_positive("sigma", sigma)
        return FeatureBasis(self.dim, self.k, float(sigma), self.phase_range, self.seed, self.unit_frequencies, self.phases)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "k": self.k,
            "sigma": float(self.sigma),
            "phase_range": self.phase_range.value,
            "seed": int(self.seed),
            "unit_frequencies": self.unit_frequencies.tolist(),
            "frequencies": self.frequencies.tolist(),
            "phases": self.phases.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FeatureBasis:
        return cls(
            dim=int(d["dim"]),
            k=int(d["k"]),
            sigma=float(d["sigma"]),
            phase_range=PhaseRange(d["phase_range"]),
            seed=int(d["seed"]),
            unit_frequencies=np.asarray(d["unit_frequencies"], dtype=np.float64).reshape(int(d["k"]), int(d["dim"])),
            phases=np.asarray(d["phases"], dtype=np.float64),
        )

    @property
    def basis_id(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, FeatureBasis):
            return NotImplemented
        return (
            (self.dim, self.k, self.sigma, self.phase_range, self.seed)
            == (other.dim, other.k, other.sigma, other.phase_range, other.seed)
            and np.array_equal(self.unit_frequencies, other.unit_frequencies)
            and np.array_equal(self.phases, other.phases)
        )

    __hash__ = None


def _check_positive(name, value):
    if not np.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be positive, got {value!r}")


def sample_basis(
    dim: int,
    k: int,
    sigma: float = 1.0,
    phase_range: PhaseRange | str = PhaseRange.TWO_PI,
    seed: int = 0,
) -> FeatureBasis:
    _check_positive("dim", dim)
    _check_positive("k", k)
    _check_positive("sigma", sigma)
    if int(dim) != dim or int(k) != k:
        raise InvalidArgumentError("dim and k must be integers")
    phase_range = PhaseRange(phase_range)
    rng = np.random.default_rng(seed)
    unit = rng.standard_normal((int(k), int(dim)))
    phases = rng.uniform(0.0, phase_range.upper, size=int(k))
    return FeatureBasis(int(dim), int(k), float(sigma), phase_range, int(seed), unit, phases)


def design_matrix(basis: FeatureBasis, points) -> np.ndarray:
    """Row i is phi(points[i]); an (N, K) matrix."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(0, basis.dim)
    if x.ndim != 2 or x.shape[1] != basis.dim:
        raise InvalidArgumentError(f"points must have shape (N, {basis.dim}), got {x.shape}")
    return basis.scale * np.cos(x @ basis.frequencies.T + basis.phases)


def eval_features(basis: FeatureBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (basis.dim,):
        raise InvalidArgumentError(f"x must have length {basis.dim}, got shape {x.shape}")
    return design_matrix(basis, x[None, :])[0]


def median_heuristic_sigma(points, max_points: int = 2000, seed: int = 0) -> float:
    """Inverse of the median pairwise distance.

    Large pools are subsampled (seeded) to keep the pairwise pass cheap.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < 2:
        raise InvalidArgumentError("median heuristic needs at least two points")
    if len(x) > max_points:
        idx = np.random.default_rng(seed).choice(len(x), size=max_points, replace=False)
        x = x[np.sort(idx)]
    med = float(np.median(pdist(x)))
    if med <= 0:
        raise InvalidArgumentError("median pairwise distance is zero; all points coincide")
    return 1.0 / med


def save_basis(basis: FeatureBasis, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(basis.to_dict(), indent=1) + "\n")
    return path


def load_basis(path) -> FeatureBasis:
    return FeatureBasis.from_dict(json.loads(Path(path).read_text()))
