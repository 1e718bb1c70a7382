import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfftrack.errors import InvalidArgumentError
from rfftrack.rff_basis import (
    PhaseRange,
    design_matrix,
    eval_features,
    load_basis,
    median_heuristic_sigma,
    sample_basis,
    save_basis,
)

from conftest import zero_basis


def gaussian_kernel(x, y, sigma):
    return np.exp(-(sigma**2) * np.sum((x - y) ** 2, axis=-1) / 2)


def test_bochner_identity_by_direct_monte_carlo():
    # independent of the package: E[2 cos(w.x+b) cos(w.y+b)] with w ~ N(0, s^2 I), b ~ U[0, 2pi)
    rng = np.random.default_rng(123)
    sigma = 0.8
    x, y = np.array([0.3, -1.0]), np.array([1.1, 0.4])
    w = sigma * rng.standard_normal((400_000, 2))
    b = rng.uniform(0, 2 * np.pi, 400_000)
    est = np.mean(2 * np.cos(w @ x + b) * np.cos(w @ y + b))
    assert est == pytest.approx(gaussian_kernel(x, y, sigma), abs=0.01)


def test_unit_phase_is_biased_under_direct_monte_carlo():
    # with b ~ U[0, 1) the cos(w.(x+y) + 2b) term does not vanish
    rng = np.random.default_rng(5)
    x, y = np.array([0.0, 0.0]), np.array([0.0, 0.0])
    w = rng.standard_normal((200_000, 2))
    b = rng.uniform(0, 1, 200_000)
    est = np.mean(2 * np.cos(w @ x + b) * np.cos(w @ y + b))
    assert abs(est - 1.0) > 0.1


def test_default_sized_basis():
    b = sample_basis(2, 30, 1.0, PhaseRange.TWO_PI, seed=7)
    assert b.frequencies.shape == (30, 2)
    assert b.phases.shape == (30,)
    assert np.all((b.phases >= 0) & (b.phases < 2 * np.pi))


def test_unit_phase_range_in_unit_interval():
    b = sample_basis(2, 500, 1.0, PhaseRange.PAPER_UNIT, seed=1)
    assert np.all((b.phases >= 0) & (b.phases < 1))


def test_vanishing_sigma_gives_zero_frequency():
    b = sample_basis(2, 1, 1e-12, "PaperUnit", seed=3)
    np.testing.assert_allclose(b.frequencies, 0.0, atol=1e-10)


def test_same_arguments_same_basis():
    a = sample_basis(3, 17, 0.7, PhaseRange.TWO_PI, seed=99)
    b = sample_basis(3, 17, 0.7, PhaseRange.TWO_PI, seed=99)
    assert a == b
    assert np.array_equal(a.frequencies, b.frequencies)
    assert a != sample_basis(3, 17, 0.7, PhaseRange.TWO_PI, seed=100)


@pytest.mark.parametrize("args", [(0, 3, 1.0), (2, 0, 1.0), (2, 3, 0.0), (2, 3, -1.0), (-1, 3, 1.0)])
def test_invalid_arguments(args):
    with pytest.raises(InvalidArgumentError):
        sample_basis(*args)


def test_zero_frequency_features_are_one():
    np.testing.assert_array_equal(eval_features(zero_basis(2), np.array([3.0, -7.0])), [1.0, 1.0])


def test_feature_bound(basis30):
    x = np.random.default_rng(0).normal(size=(50, 2)) * 10
    phi = design_matrix(basis30, x)
    assert np.all(np.abs(phi) <= np.sqrt(2 / 30) + 1e-15)
    assert np.sqrt(2 / 30) == pytest.approx(0.2582, abs=1e-4)


def test_dimension_mismatch(basis30):
    with pytest.raises(InvalidArgumentError):
        eval_features(basis30, np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        design_matrix(basis30, np.zeros((4, 3)))


def test_design_matrix_shapes(basis30):
    assert design_matrix(basis30, np.empty((0, 2))).shape == (0, 30)
    x = np.array([[0.5, -0.2]])
    np.testing.assert_array_equal(design_matrix(basis30, x)[0], eval_features(basis30, x[0]))
    assert design_matrix(basis30, np.zeros((200, 2))).shape == (200, 30)


def test_kernel_approximation_k2048():
    rng = np.random.default_rng(11)
    b = sample_basis(2, 2048, 1.0, PhaseRange.TWO_PI, seed=2024)
    x = rng.uniform(-2, 2, (100, 2))
    y = rng.uniform(-2, 2, (100, 2))
    approx = np.sum(design_matrix(b, x) * design_matrix(b, y), axis=1)
    assert np.max(np.abs(approx - gaussian_kernel(x, y, 1.0))) <= 0.05


def test_sigma_scales_unit_draw():
    a = sample_basis(2, 40, 1.0, seed=4)
    b = sample_basis(2, 40, 3.5, seed=4)
    np.testing.assert_array_equal(b.frequencies, 3.5 * a.frequencies)
    np.testing.assert_array_equal(a.phases, b.phases)
    assert a.with_sigma(3.5) == b


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2),
    st.integers(1, 64),
    st.floats(0.01, 10),
    st.integers(0, 2**32),
)
def test_squared_norm_bounded(x, k, sigma, seed):
    b = sample_basis(2, k, sigma, seed=seed)
    assert np.sum(eval_features(b, np.array(x)) ** 2) <= 2 + 1e-12


def test_serialization_round_trip(tmp_path, basis30):
    p = save_basis(basis30, tmp_path / "basis.json")
    again = load_basis(p)
    assert again == basis30
    assert np.array_equal(again.frequencies, basis30.frequencies)
    doc = json.loads(p.read_text())
    assert {"dim", "k", "sigma", "phase_range", "seed", "frequencies", "phases"} <= set(doc)
    assert again.basis_id == basis30.basis_id


def test_median_heuristic():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    # distances 1, 2, sqrt5 -> median 2
    assert median_heuristic_sigma(pts) == pytest.approx(0.5)
    with pytest.raises(InvalidArgumentError):
        median_heuristic_sigma(np.zeros((5, 2)))


def test_basis_is_read_only(basis30):
    with pytest.raises(ValueError):
        basis30.phases[0] = 1.0
