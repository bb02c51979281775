import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mollifier_checks import (
    commutation_error, convergence_rate, decay_slopes, linf_bound_ratios, smoothing_exponents,
    sup_from_l2_constants, uniform_convergence,
)
from oracles import bump_hat

from mhd2d import Grid, SpectralField, VectorField, leray_project, mollify, norm
from mhd2d.spectral import bump_fourier, mollifier_symbol


def direct_convolution(values, grid, eps, points):
    """sum_y rho_eps(x - y) f(y) dx^2 at the given grid indices, with the kernel sampled in physical space."""
    n, dx = grid.n, grid.dx
    offs = np.arange(-n // 2, n // 2) * dx
    d1, d2 = np.meshgrid(offs, offs, indexing="ij")
    r = np.hypot(d1, d2) / eps
    ker = np.where(r < 1, np.exp(-1.0 / (1.0 - np.minimum(r, 1 - 1e-16) ** 2)), 0.0)
    ker /= ker.sum()
    out = []
    for i, j in points:
        rows = (i - np.arange(-n // 2, n // 2)) % n
        cols = (j - np.arange(-n // 2, n // 2)) % n
        out.append(float(np.sum(ker * values[np.ix_(rows, cols)])))
    return np.array(out)


class TestBumpTransform:
    def test_unit_mass(self):
        assert bump_fourier(np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("q", [0.5, 3.0, 11.7, 40.0, 150.0])
    def test_matches_adaptive_quadrature(self, q):
        assert bump_fourier(np.array([q]))[0] == pytest.approx(bump_hat(q), rel=1e-9, abs=1e-15)

    def test_radial_and_bounded(self):
        q = np.linspace(0, 200, 2001)
        vals = bump_fourier(q)
        assert np.all(np.abs(vals) <= 1 + 1e-14)
        assert np.all(np.diff(vals[:50]) < 0)

    def test_decay_steepens_past_any_fixed_power(self):
        sl = decay_slopes()
        assert all(a > b for a, b in zip(sl, sl[1:]))
        assert sl[-1] < -8


class TestMollify:
    def test_constant_is_fixed(self, grid32):
        f = SpectralField.from_physical(grid32, np.full((32, 32), 2.5))
        np.testing.assert_allclose(mollify(f, 0.7).to_physical(), 2.5, atol=1e-14)

    def test_single_mode_scaled_by_symbol(self, grid32):
        x1, x2 = grid32.x
        f = SpectralField.from_physical(grid32, np.cos(3 * x1 + 4 * x2))
        expect = bump_hat(0.4 * 5.0) * np.cos(3 * x1 + 4 * x2)
        np.testing.assert_allclose(mollify(f, 0.4).to_physical(), expect, atol=1e-10)

    def test_matches_direct_convolution(self):
        # the sampled kernel is a quadrature of the continuous one, so the gap shrinks fast with n
        eps, gaps = 0.8, []
        for n in (128, 256):
            g = Grid(n)
            x1, x2 = g.x
            v = np.sin(x1) * np.cos(2 * x2) + 0.3 * np.cos(5 * x1 - 3 * x2) + 0.1
            pts = [(0, 0), (n // 8, n // 2 + 7), (n // 2, 5), (n - 3, n - 1)]
            got = mollify(SpectralField.from_physical(g, v), eps).to_physical()
            want = direct_convolution(v, g, eps, pts)
            gaps.append(max(abs(got[p] - w) for p, w in zip(pts, want)))
        assert gaps[1] < 1e-7
        assert gaps[1] < 0.05 * gaps[0]

    @pytest.mark.parametrize("eps", [-0.1, 0.0, math.pi / 2, 2.0])
    def test_rejects_bad_scale(self, grid32, eps):
        with pytest.raises(ValueError):
            mollify(SpectralField.zeros(grid32), eps)

    def test_scale_limit_uses_box_length(self):
        g = Grid(16, 20.0)
        mollifier_symbol(g, 4.9)
        with pytest.raises(ValueError, match="L/4"):
            mollifier_symbol(g, 5.0)

    def test_half_symbol_matches_full(self, grid32):
        full = mollifier_symbol(grid32, 0.3)
        half = mollifier_symbol(grid32, 0.3, half=True)
        np.testing.assert_array_equal(half, full[:, : grid32.nh])

    def test_commutes_with_leray(self, grid32, rng):
        v = VectorField.from_physical(grid32, rng.standard_normal((2, 32, 32)))
        a, b = leray_project(mollify(v, 0.2)), mollify(leray_project(v), 0.2)
        assert norm(a - b) < 1e-14 * norm(v)

    @given(eps=st.floats(0.01, 1.5), seed=st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_contraction_in_l2_and_hs(self, eps, seed):
        g = Grid(16)
        f = SpectralField.from_physical(g, np.random.default_rng(seed).standard_normal((16, 16)))
        for kind, kw in (("L2", {}), ("Hs", {"s": 1.5})):
            assert norm(mollify(f, eps), kind, **kw) <= norm(f, kind, **kw) * (1 + 1e-13)


class TestProperties:
    def test_uniform_convergence(self):
        sup = uniform_convergence()
        assert all(a > b for a, b in zip(sup, sup[1:]))
        assert sup[-1] < 0.05 * sup[0]
        # C^2 data: error shrinks roughly fourfold per halving
        assert all(a / b > 3 for a, b in zip(sup[1:], sup[2:]))

    def test_linf_bound(self):
        r = linf_bound_ratios()
        assert max(r) <= 1 + 1e-10
        assert max(r) > 0.95

    def test_commutes_with_derivatives(self):
        assert commutation_error() < 1e-12

    def test_linear_rate_one_order_down(self):
        low, top, top_norm = convergence_rate(n=512)
        ratios = [a / b for a, b in zip(low, low[1:])]
        assert all(1.7 < r < 2.4 for r in ratios)
        assert all(a > b for a, b in zip(top, top[1:]))
        assert max(top) < 2 * top_norm

    def test_smoothing_exponents(self):
        ex = smoothing_exponents(n=256, eps_values=(0.4, 0.2))
        for k, p in ex.items():
            assert abs(p - k) < 0.3

    def test_sup_from_l2_constants_bounded(self):
        c = sup_from_l2_constants(n=128)
        assert max(c) / min(c) < 1.5
