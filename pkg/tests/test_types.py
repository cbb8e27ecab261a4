import math

import numpy as np
import pytest

from spherewf.types import (
    ModelParams,
    SimplexPoint,
    SpherePoint,
    SphericalCoords,
    Truncation,
    cartesian_from_spherical,
    spherical_from_cartesian,
    sqrt_lift,
    square_push,
)


def test_simplex_accepts_and_renormalizes_near_misses():
    x = SimplexPoint([0.5, 0.3, 0.2 + 5e-10])
    assert abs(x.coords.sum() - 1.0) < 1e-15
    tiny_neg = SimplexPoint([1.0 + 5e-10, -5e-10, 0.0])
    assert tiny_neg.coords.min() == 0.0


def test_simplex_rejects_bad_inputs():
    with pytest.raises(ValueError):
        SimplexPoint([0.5, 0.4])  # sums to 0.9
    with pytest.raises(ValueError):
        SimplexPoint([1.1, -0.1, 0.0])
    with pytest.raises(ValueError):
        SimplexPoint([1.0])
    with pytest.raises(ValueError):
        SimplexPoint([np.nan, 1.0])


def test_points_are_immutable():
    x = SimplexPoint([0.5, 0.5])
    with pytest.raises(ValueError):
        x.coords[0] = 0.3
    y = SpherePoint([0.6, 0.8])
    with pytest.raises(ValueError):
        y.coords[0] = 0.0


def test_sphere_norm_validation():
    SpherePoint([0.6, -0.64, 0.48])
    with pytest.raises(ValueError):
        SpherePoint([1.0, 1.0])


def test_sqrt_lift_examples():
    assert np.array_equal(sqrt_lift(SimplexPoint([1, 0, 0])).coords, [1, 0, 0])
    y = sqrt_lift(SimplexPoint([0.25, 0.25, 0.5]))
    assert np.allclose(y.coords, [0.5, 0.5, 1 / math.sqrt(2)], rtol=0, atol=1e-15)


def test_square_push_examples():
    assert np.array_equal(square_push(SpherePoint([0, 1, 0])).coords, [0, 1, 0])
    x = square_push(SpherePoint([1 / math.sqrt(2), -1 / math.sqrt(2), 0]))
    assert np.allclose(x.coords, [0.5, 0.5, 0.0], atol=1e-15)
    x2 = square_push(SpherePoint([0.5, 0.5, 1 / math.sqrt(2)]))
    assert np.allclose(x2.coords, [0.25, 0.25, 0.5], atol=1e-15)


def test_lift_push_round_trips():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = SimplexPoint(rng.dirichlet(np.ones(4)))
        back = square_push(sqrt_lift(x))
        assert np.allclose(back.coords, x.coords, rtol=0, atol=1e-15)
    # positive-orthant sphere points round trip the other way
    for _ in range(50):
        g = np.abs(rng.standard_normal(4)) + 1e-3
        y = SpherePoint(g / np.linalg.norm(g))
        there = sqrt_lift(square_push(y))
        assert np.allclose(there.coords, y.coords, rtol=0, atol=1e-12)


def test_spherical_coordinate_examples():
    y = cartesian_from_spherical(SphericalCoords([0.0, math.pi / 2]))
    assert np.allclose(y.coords, [0.0, 1.0, 0.0], atol=1e-15)
    y2 = cartesian_from_spherical(SphericalCoords([0.0]))
    assert np.allclose(y2.coords, [0.0, 1.0], atol=1e-15)


def test_spherical_round_trip_and_unit_norm():
    rng = np.random.default_rng(12)
    for k in (2, 3, 5):
        for _ in range(40):
            angles = np.empty(k - 1)
            angles[0] = rng.uniform(0, 2 * math.pi)
            if k > 2:
                angles[1:] = rng.uniform(0.05, math.pi - 0.05, size=k - 2)
            theta = SphericalCoords(angles)
            y = cartesian_from_spherical(theta)
            assert abs(y.coords @ y.coords - 1.0) < 1e-14
            back, degenerate = spherical_from_cartesian(y)
            assert not degenerate
            assert np.allclose(back.angles, angles, rtol=0, atol=1e-12)


def test_spherical_inverse_at_pole_is_canonical():
    theta, degenerate = spherical_from_cartesian(SpherePoint([0.0, 0.0, 1.0]))
    assert degenerate
    assert theta.angles[0] == 0.0
    roundtrip = cartesian_from_spherical(theta)
    assert np.allclose(roundtrip.coords, [0.0, 0.0, 1.0], atol=1e-15)
    # antipodal pole representable via theta_{k-1} = pi
    theta2, deg2 = spherical_from_cartesian(SpherePoint([0.0, 0.0, -1.0]))
    assert deg2 and abs(theta2.angles[-1] - math.pi) < 1e-15


def test_model_params():
    p = ModelParams(3, 2.0, [0.1, 0.2, 0.3])
    assert p.mu == pytest.approx(0.6)
    assert p.diffusion_constant == pytest.approx(0.5)
    assert not p.is_common()
    drift = p.drift(np.array([0.2, 0.3, 0.5]))
    assert abs(drift.sum()) < 1e-15
    common = ModelParams(4, 1.0, 0.5)
    assert common.is_common() and common.common_epsilon == 0.5


def test_model_params_from_moran():
    p = ModelParams.from_moran(2, lam=1.0, N=100)
    assert p.c == pytest.approx(math.sqrt(1.0 / 200.0))
    assert p.diffusion_constant == pytest.approx(1.0 / 1600.0)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(1, 1.0)
    with pytest.raises(ValueError):
        ModelParams(3, 0.0)
    with pytest.raises(ValueError):
        ModelParams(3, 1.0, [-0.1, 0.1, 0.1])
    with pytest.raises(ValueError):
        ModelParams(3, 1.0, [0.1, 0.1])


def test_truncation_validation():
    Truncation(10, 1e-8, 1)
    with pytest.raises(ValueError):
        Truncation(0, 1e-8, 1)
    with pytest.raises(ValueError):
        Truncation(10, 0.0, 1)
    with pytest.raises(ValueError):
        Truncation(10, 1e-8, 0)
