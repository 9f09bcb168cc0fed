import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodic_fm.errors import DomainError, WoodAnomaly
from periodic_fm.lattice import (
    LatticeParams,
    beta_from_alpha,
    count_propagating,
    green_eval,
    green_on_plane,
    green_rayleigh,
    green_rayleigh_all,
    mode_data,
    mode_indices,
)

from conftest import ALPHA, K


def trapezoid_coefficient(params, m, plane_x3, z, n=256, N=60):
    """(1/4 pi^2) double integral of exp(-i alpha_m . x) G(x - z) on a plane, periodic trapezoid rule."""
    x = -np.pi + 2 * np.pi * np.arange(n) / n
    G = green_on_plane(params, x, x, plane_x3, z, N=N)
    a = params.alpha[0] + m[0], params.alpha[1] + m[1]
    e1 = np.exp(-1j * a[0] * x)
    e2 = np.exp(-1j * a[1] * x)
    return e1 @ G @ e2 / n**2


class TestModes:
    def test_index_set_order(self):
        idx = mode_indices(4)
        assert idx.shape == (16, 2)
        assert tuple(idx[0]) == (-1, -1) and tuple(idx[1]) == (-1, 0) and tuple(idx[-1]) == (2, 2)

    def test_beta_propagating_example(self):
        md = mode_data(LatticeParams(K, ALPHA, 1.0, 2), (0, 0))
        assert md.propagating
        assert md.beta_m == pytest.approx(np.pi / np.sqrt(2), abs=1e-12)
        assert md.beta_m == pytest.approx(2.221441469079183, rel=1e-14)

    def test_beta_evanescent_example(self):
        md = mode_data(LatticeParams(K, ALPHA, 1.0, 2), (2, 0))
        assert not md.propagating
        assert md.beta_m.real == 0
        # 40-digit evaluation of sqrt(|alpha_m|^2 - k^2); the commonly quoted
        # 2.312661 is off in the sixth digit.
        assert md.beta_m.imag == pytest.approx(2.312657152851435, rel=1e-14)
        assert md.beta_m.imag == pytest.approx(2.312661, abs=1e-5)

    def test_wood_anomaly_in_mode_data(self):
        p = LatticeParams(2.0, (0.0, 0.0), 1.0, 2)
        with pytest.raises(WoodAnomaly):
            mode_data(p, (2, 0))

    def test_wood_guard_at_mode(self):
        # alpha = 0, k = 1: mode (1, 0) has |alpha_m| = k exactly.
        with pytest.raises(WoodAnomaly):
            LatticeParams(1.0, (0.0, 0.0), 1.0, 2)

    @pytest.mark.parametrize("bad", [dict(k=0.0), dict(h=-1.0), dict(M=3), dict(M=0)])
    def test_invalid_params(self, bad):
        kw = dict(k=K, alpha=ALPHA, h=1.0, M=4)
        kw.update(bad)
        with pytest.raises(ValueError):
            LatticeParams(**kw)

    def test_count_propagating_reference(self):
        assert count_propagating(LatticeParams(K, ALPHA, 1.0, 20)) == 32

    def test_count_propagating_small(self):
        # Z^2_2 = {0, 1}^2: |alpha_m| for (0,0), (0,1), (1,0) is <= pi, (1,1) is not.
        assert count_propagating(LatticeParams(K, ALPHA, 1.0, 2)) == 3

    def test_count_propagating_small_k(self):
        assert count_propagating(LatticeParams(1e-6, ALPHA, 1.0, 20)) == 0

    @given(st.floats(0.1, 6.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
    @settings(max_examples=60, deadline=None)
    def test_dispersion_relation(self, k, a1, a2):
        b = complex(beta_from_alpha(k, a1 + 1.0, a2 - 2.0))
        aa = (a1 + 1.0) ** 2 + (a2 - 2.0) ** 2
        assert abs(b * b + aa - k * k) <= 1e-12 * max(k * k, aa)
        if aa <= k * k:
            assert b.imag == 0 and b.real >= 0
        else:
            assert b.real == 0 and b.imag > 0


class TestGreen:
    def test_domain_error_on_plane(self, params):
        with pytest.raises(DomainError):
            green_eval(params, (0.1, 0.2, 0.0))

    def test_truncation_below_M(self, params):
        with pytest.raises(ValueError):
            green_eval(params, (0.1, 0.2, 0.3), N=params.M - 1)

    def test_quasiperiodic(self, params, rng):
        for _ in range(10):
            x = rng.uniform(-np.pi, np.pi, 3)
            x[2] = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
            n = rng.integers(-3, 4, 2)
            shifted = x + np.array([2 * np.pi * n[0], 2 * np.pi * n[1], 0.0])
            g0 = green_eval(params, x)
            g1 = green_eval(params, shifted)
            phase = np.exp(2j * np.pi * (params.alpha[0] * n[0] + params.alpha[1] * n[1]))
            assert abs(g1 - phase * g0) <= 1e-10 * abs(g0)

    def test_self_convergence(self, params):
        x = (0.3, -0.7, 0.5)
        g20 = green_eval(params, x, N=20)
        g40 = green_eval(params, x, N=40)
        # tail of the series is bounded by the first omitted evanescent terms
        assert abs(g20 - g40) <= np.exp(-0.5 * 20)

    def test_helmholtz_equation(self, params):
        # (Delta + k^2) G = 0 away from the lattice of sources, by central differences.
        x = np.array([0.4, -0.3, 0.6])
        d = 1e-3
        lap = -6 * green_eval(params, x)
        for i in range(3):
            e = np.zeros(3)
            e[i] = d
            lap += green_eval(params, x + e) + green_eval(params, x - e)
        lap /= d * d
        assert abs(lap + params.k**2 * green_eval(params, x)) <= 1e-4 * abs(params.k**2 * green_eval(params, x))

    def test_plane_coefficient_matches_closed_term(self, params):
        m = (1, -2)
        md = mode_data(params, m)
        got = trapezoid_coefficient(params, m, params.h, (0.0, 0.0, 0.0))
        want = 1j * np.exp(1j * md.beta_m * params.h) / (8 * np.pi**2 * md.beta_m)
        assert abs(got - want) <= 1e-10 * abs(want)

    def test_green_on_plane_agrees_with_pointwise(self, params):
        x1 = np.array([-1.0, 0.5])
        x2 = np.array([0.2, 2.0])
        z = (0.1, 0.2, 0.3)
        G = green_on_plane(params, x1, x2, 0.9, z, N=32)
        for i in range(2):
            for j in range(2):
                want = green_eval(params, (x1[i] - z[0], x2[j] - z[1], 0.9 - z[2]), N=32)
                assert G[i, j] == pytest.approx(want, rel=1e-12)


class TestRayleigh:
    def test_origin_symmetric(self, params):
        for m in [(0, 0), (2, -1), (4, 4)]:
            md = mode_data(params, m)
            want = 1j / (8 * np.pi**2 * md.beta_m) * np.exp(1j * md.beta_m * params.h)
            assert green_rayleigh(params, m, (0, 0, 0), +1) == pytest.approx(want, rel=1e-14)
            assert green_rayleigh(params, m, (0, 0, 0), -1) == pytest.approx(want, rel=1e-14)

    def test_mirror(self, params, rng):
        for _ in range(5):
            z = np.array([*rng.uniform(-3, 3, 2), rng.uniform(-0.9, 0.9)])
            zm = z * np.array([1, 1, -1])
            m = tuple(rng.integers(-3, 5, 2))
            assert green_rayleigh(params, m, z, +1) == pytest.approx(green_rayleigh(params, m, zm, -1), rel=1e-14)

    def test_domain(self, params):
        with pytest.raises(DomainError):
            green_rayleigh(params, (0, 0), (0, 0, 1.0), +1)

    def test_single_example_against_quadrature(self):
        p = LatticeParams(K, ALPHA, 1.0, 2)
        z = (0.0, 0.0, 0.25)
        got = green_rayleigh(p, (0, 0), z, +1)
        want = trapezoid_coefficient(p, (0, 0), p.h, z)
        assert abs(got - want) <= 1e-8 * abs(want)

    def test_vectorized_matches_scalar(self, params, rng):
        z = np.column_stack([rng.uniform(-3, 3, (4, 2)), rng.uniform(-0.9, 0.9, 4)])
        gp, gm = green_rayleigh_all(params, z)
        for i in range(4):
            for j, m in enumerate(params.modes()[::7]):
                jj = j * 7
                assert gp[i, jj] == pytest.approx(green_rayleigh(params, m, z[i], +1), rel=1e-13)
                assert gm[i, jj] == pytest.approx(green_rayleigh(params, m, z[i], -1), rel=1e-13)
