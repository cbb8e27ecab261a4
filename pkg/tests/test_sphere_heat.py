import math

import numpy as np
import pytest

from spherewf.sphere_heat import (
    SPHERE_TRUNCATION,
    KernelValue,
    SphereKernelQuery,
    heat_kernel,
    heat_kernel_circle,
    heat_kernel_unnormalized,
    sample_uniform_sphere,
    truncation_cutoff,
    zonal_kernel,
    zonal_series,
)
from spherewf.specfun import sphere_surface_area
from spherewf.types import SpherePoint, Truncation


def _legendre_sum(z: float, t: float, D: float) -> float:
    # independent Legendre route for k = 3: sum (2L+1) P_L(z) exp(-D L(L+1) t)
    total = 1.0  # L = 0 term
    p_prev, p_cur = 1.0, z  # P_0, P_1
    L = 1
    while True:
        w = (2 * L + 1) * math.exp(-D * L * (L + 1) * t)
        total += w * p_cur
        if w < 1e-18 and L > 2:
            return total
        p_prev, p_cur = p_cur, ((2 * L + 1) * z * p_cur - L * p_prev) / (L + 1)
        L += 1


def test_long_time_limit_is_one():
    rng = np.random.default_rng(21)
    for k in (3, 4, 5):
        y = sample_uniform_sphere(k, rng)
        yp = sample_uniform_sphere(k, rng)
        res = heat_kernel(SphereKernelQuery(y, yp, 1e3, 0.125))
        assert abs(res.value - 1.0) < 1e-12
        assert res.converged


def test_exchange_symmetry_exact():
    rng = np.random.default_rng(22)
    for _ in range(10):
        y = sample_uniform_sphere(4, rng)
        yp = sample_uniform_sphere(4, rng)
        a = heat_kernel(SphereKernelQuery(y, yp, 0.3, 0.125))
        b = heat_kernel(SphereKernelQuery(yp, y, 0.3, 0.125))
        assert a.value == b.value


def test_k3_kernel_matches_independent_legendre():
    rng = np.random.default_rng(23)
    for _ in range(100):
        z = float(rng.uniform(-1, 1))
        t = float(rng.uniform(0.05, 5.0))
        got = zonal_kernel(z, t, 0.125, 3).value
        ref = _legendre_sum(z, t, 0.125)
        assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


def test_k3_normalization_by_quadrature():
    # (1/2) int_{-1}^{1} rho(z) dz = 1 at several times
    z, w = np.polynomial.legendre.leggauss(256)
    for t in (0.05, 0.5, 5.0):
        even, odd, _, _, conv = zonal_series(z, t, 0.125, 3, SPHERE_TRUNCATION)
        assert conv
        integral = 0.5 * float((w * (even + odd)).sum())
        assert abs(integral - 1.0) < 1e-8


def test_positivity_of_truncated_kernel():
    rng = np.random.default_rng(24)
    for _ in range(1000):
        k = int(rng.integers(3, 6))
        z = float(rng.uniform(-1, 1))
        t = float(rng.uniform(0.05, 10.0))
        assert zonal_kernel(z, t, 0.125, k).value >= -1e-10


def test_unnormalized_accessor_scales_by_area():
    y = SpherePoint([0.6, -0.64, 0.48])
    yp = SpherePoint([0.0, 0.0, 1.0])
    q = SphereKernelQuery(y, yp, 0.7, 0.125)
    a = heat_kernel(q)
    b = heat_kernel_unnormalized(q)
    assert b.value == pytest.approx(a.value / sphere_surface_area(3), rel=1e-15)


def test_time_floor_enforced():
    y = SpherePoint([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        zonal_kernel(0.5, 1e-4, 0.125, 3)
    with pytest.raises(ValueError):
        heat_kernel_circle(0.3, 1e-4, 0.125)


def test_non_convergence_reported_when_capped():
    tight = Truncation(max_terms=3, tol=1e-12, consecutive_small=3)
    res = zonal_kernel(0.2, 0.01, 0.125, 3, tight)
    assert not res.converged
    assert res.tail_bound > 1e-12


def test_circle_kernel_long_time_and_direct_sum():
    assert abs(heat_kernel_circle(1.234, 1e3, 0.125).value - 1.0) < 1e-12
    # direct partial sum at da = 0, t = 1, D = 1/8
    direct = 1.0 + 2.0 * sum(math.exp(-(L * L) / 8.0) for L in range(1, 200))
    got = heat_kernel_circle(0.0, 1.0, 0.125)
    assert got.value == pytest.approx(direct, rel=1e-13)
    assert got.converged


def test_circle_kernel_normalization_trapezoid():
    angles = np.linspace(0.0, 2 * math.pi, 512, endpoint=False)
    vals = [heat_kernel_circle(float(a), 0.5, 0.125).value for a in angles]
    integral = float(np.mean(vals))  # uniform rule on the periodic interval
    assert abs(integral - 1.0) < 1e-10


def test_truncation_cutoff_properties():
    # monotone in t
    prev = math.inf
    for t in (0.05, 0.1, 0.5, 1.0, 10.0):
        L, ok = truncation_cutoff(t, 0.125, 3, 1e-12)
        assert ok
        assert L <= prev
        prev = L
    L1, _ = truncation_cutoff(1.0, 0.125, 3, 1e-12)
    assert L1 <= 25
    # with tol = 1 the bound still has to cover the genuine tail, which at
    # t = 1 is sum_{L>=1} (2L+1) exp(-L(L+1)/8) ~ 7.3; the cutoff is 4 there
    Lb, _ = truncation_cutoff(1.0, 0.125, 3, 1.0)
    assert Lb == 4
    tail_after = sum((2 * L + 1) * math.exp(-L * (L + 1) / 8.0) for L in range(5, 200))
    assert tail_after < 1.0
    Lc, _ = truncation_cutoff(8.0, 0.125, 3, 1.0)
    assert Lc == 0
    with pytest.raises(ValueError):
        truncation_cutoff(0.5, 0.125, 2, 1e-8)


def test_uniform_sampler_moments():
    rng = np.random.default_rng(25)
    n = 100_000
    for k in (2, 3, 5):
        pts = sample_uniform_sphere(k, rng, n=n)
        assert np.max(np.abs((pts ** 2).sum(axis=1) - 1.0)) < 1e-14
        assert np.max(np.abs(pts.mean(axis=0))) < 4.0 / math.sqrt(n)
        assert np.max(np.abs((pts ** 2).mean(axis=0) - 1.0 / k)) < 4.0 / math.sqrt(n)
    single = sample_uniform_sphere(3, rng)
    assert isinstance(single, SpherePoint)


def test_kernel_value_float_conversion():
    res = zonal_kernel(0.1, 0.5, 0.125, 3)
    assert isinstance(res, KernelValue)
    assert float(res) == res.value
