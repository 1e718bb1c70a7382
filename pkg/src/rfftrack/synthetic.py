"""Seeded Shift / Converge / Diverge point-set series."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from rfftrack._seeds import derive_seed
from rfftrack.errors import InvalidArgumentError
from rfftrack.series import VectorSetSeries

__all__ = ["Movement", "SyntheticSpec", "center_schedule", "generate", "generate_suite"]


class Movement(str, enum.Enum):
    SHIFT = "Shift"
    CONVERGE = "Converge"
    DIVERGE = "Diverge"


@dataclass(frozen=True)
class SyntheticSpec:
    movement: Movement = Movement.SHIFT
    n_steps: int = 10
    n_points: int = 200
    cluster_std: float = 0.5
    direction_angle: float = 0.0
    travel: float = 4.0
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "movement", Movement(self.movement))
        if self.n_steps < 2 or self.n_points < 2:
            raise InvalidArgumentError("n_steps and n_points must be >= 2")
        if not self.cluster_std > 0 or not self.travel > 0:
            raise InvalidArgumentError("cluster_std and travel must be positive")


def center_schedule(spec: SyntheticSpec) -> np.ndarray:
    """Cluster centers per step, shape (n_steps, n_clusters, 2)."""
    u = np.array([np.cos(spec.direction_angle), np.sin(spec.direction_angle)])
    frac = np.arange(spec.n_steps) / (spec.n_steps - 1)
    if spec.movement is Movement.SHIFT:
        pos = -spec.travel / 2 + spec.travel * frac
        return (pos[:, None] * u)[:, None, :]
    half = spec.travel / 2 * (1.0 - frac)
    if spec.movement is Movement.DIVERGE:
        half = half[::-1]
    return np.stack([half[:, None] * u, -half[:, None] * u], axis=1)


def generate(spec: SyntheticSpec) -> VectorSetSeries:
    centers = center_schedule(spec)
    n_clusters = centers.shape[1]
    # ceil/floor split between the two subgroups
    sizes = [spec.n_points - spec.n_points // 2, spec.n_points // 2] if n_clusters == 2 else [spec.n_points]
    rng = np.random.default_rng(spec.seed)
    steps = []
    for t in range(spec.n_steps):
        parts = [centers[t, j] + spec.cluster_std * rng.standard_normal((n, 2)) for j, n in enumerate(sizes)]
        steps.append((str(t + 1), np.vstack(parts)))
    label = spec.label or f"{spec.movement.value}"
    return VectorSetSeries(label, tuple(steps))


SHIFT_ANGLES = (0.0, np.pi, np.pi / 2, 3 * np.pi / 2)
PAIR_AXIS_ANGLES = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)


def generate_suite(seed: int = 0, base: SyntheticSpec | None = None) -> list[VectorSetSeries]:
    """Shift_1..4, Converge_1..4, Diverge_1..4.

    Shift_1/Shift_2 travel in opposite directions, as do Shift_3/Shift_4.
    Converge_i and Diverge_i share the subgroup axis.
    """
    base = base or SyntheticSpec()
    out = []
    for movement, angles in (
        (Movement.SHIFT, SHIFT_ANGLES),
        (Movement.CONVERGE, PAIR_AXIS_ANGLES),
        (Movement.DIVERGE, PAIR_AXIS_ANGLES),
    ):
        for i, angle in enumerate(angles, start=1):
            label = f"{movement.value}_{i}"
            spec = replace(base, movement=movement, direction_angle=angle, seed=derive_seed(seed, "synthetic", label), label=label)
            out.append(generate(spec))
    return out
