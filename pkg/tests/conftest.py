import csv
import datetime as dt

import numpy as np
import pytest

from rfftrack.density import DensityFit
from rfftrack.rff_basis import FeatureBasis, PhaseRange, sample_basis


@pytest.fixture
def basis30():
    return sample_basis(2, 30, 1.0, PhaseRange.TWO_PI, seed=7)


def zero_basis(k=2, dim=2):
    return FeatureBasis(dim, k, 1.0, PhaseRange.TWO_PI, 0, np.zeros((k, dim)), np.zeros(k))


def make_fit(weights, basis_ref="test", offset=0.0):
    return DensityFit(weights=np.asarray(weights, dtype=float), offset=offset, basis_ref=basis_ref)


YEARS = list(range(2001, 2020, 3))

# filled by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_crime_fixture(path, per_year=210, seed=0, types=("NARCOTICS", "THEFT")):
    """Portal-shaped CSV with ``per_year`` rows of each type in every sampled year."""
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ID", "Date", "Primary Type", "Latitude", "Longitude"])
        rid = 0
        for y in YEARS:
            for t in types:
                for _ in range(per_year):
                    rid += 1
                    d = dt.datetime(y, 1, 1) + dt.timedelta(minutes=int(rng.integers(0, 364 * 24 * 60)))
                    w.writerow([rid, d.strftime("%m/%d/%Y %I:%M:%S %p"), t,
                                f"{41.8 + 0.1 * rng.standard_normal():.6f}",
                                f"{-87.65 + 0.1 * rng.standard_normal():.6f}"])
    return path
