"""Time-indexed point sets and the common ``instance,time,x,y`` CSV format."""

from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rfftrack.errors import DataError, InvalidArgumentError

__all__ = ["VectorSetSeries", "read_series_csv", "write_series_csv"]


@dataclass(frozen=True)
class VectorSetSeries:
    instance_label: str
    steps: tuple  # ((time_label, (N, d) array), ...)

    def __post_init__(self):
        steps = []
        for label, pts in self.steps:
            a = np.array(pts, dtype=np.float64)
            if a.ndim != 2:
                raise InvalidArgumentError(f"step {label!r}: points must be an (N, d) matrix")
            a.setflags(write=False)
            steps.append((str(label), a))
        if not steps:
            raise InvalidArgumentError("a series needs at least one step")
        dims = {a.shape[1] for _, a in steps}
        if len(dims) != 1:
            raise InvalidArgumentError(f"series {self.instance_label!r} mixes dimensionalities {sorted(dims)}")
        labels = [lab for lab, _ in steps]
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"series {self.instance_label!r} has duplicate time labels")
        object.__setattr__(self, "steps", tuple(steps))

    @property
    def dim(self) -> int:
        return self.steps[0][1].shape[1]

    @property
    def time_labels(self) -> list[str]:
        return [lab for lab, _ in self.steps]

    def __len__(self):
        return len(self.steps)

    def points(self, time_label: str) -> np.ndarray:
        for lab, pts in self.steps:
            if lab == time_label:
                return pts
        raise KeyError(time_label)

    def pooled(self) -> np.ndarray:
        return np.vstack([pts for _, pts in self.steps])

    def map_points(self, fn, label: str | None = None) -> VectorSetSeries:
        return VectorSetSeries(label or self.instance_label, tuple((t, fn(p)) for t, p in self.steps))


def _coord_columns(dim: int) -> list[str]:
    return ["x", "y"] if dim == 2 else [f"x{i}" for i in range(dim)]


def write_series_csv(series: VectorSetSeries | list[VectorSetSeries], path) -> Path:
    if isinstance(series, VectorSetSeries):
        series = [series]
    dims = {s.dim for s in series}
    if len(dims) != 1:
        raise InvalidArgumentError("all series in one file must share a dimension")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "time", *_coord_columns(dims.pop())])
        for s in series:
            for t, pts in s.steps:
                for row in pts:
                    w.writerow([s.instance_label, t, *(repr(float(v)) for v in row)])
    return path


def read_series_csv(path) -> list[VectorSetSeries]:
    """Read every instance in a series CSV, preserving first-seen order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"series file not found: {path}")
    grouped: OrderedDict[str, OrderedDict[str, list]] = OrderedDict()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["instance", "time"] or len(header) < 3:
            raise DataError(f"{path}: expected header starting with 'instance,time'")
        ncoord = len(header) - 2
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncoord + 2:
                raise DataError(f"{path}:{lineno}: expected {ncoord + 2} fields, got {len(row)}")
            try:
                coords = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            grouped.setdefault(row[0], OrderedDict()).setdefault(row[1], []).append(coords)
    if not grouped:
        raise DataError(f"{path}: no data rows")
    return [VectorSetSeries(inst, tuple((t, np.array(p)) for t, p in steps.items())) for inst, steps in grouped.items()]
