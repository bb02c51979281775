import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import hdot_norm, leray_by_modes

from mhd2d import (
    Grid, SpectralField, VectorField, differentiate, divergence, inner, lambda_s, leray_project, norm,
)
from mhd2d.spectral import full_from_half


def random_scalar(grid, rng, decay=2.0, mean=0.0):
    """Smooth random real field with |c| ~ (1+|xi|^2)^(-decay/2), dealiased."""
    noise = grid.fft(rng.standard_normal((grid.n, grid.n)))
    c = noise * (1 + grid.xi_sq) ** (-decay / 2) * grid.dealias_mask
    c[0, 0] = mean
    return SpectralField(grid, c)


def random_vector(grid, rng, decay=2.0):
    return VectorField((random_scalar(grid, rng, decay), random_scalar(grid, rng, decay)))


class TestGrid:
    def test_rejects_bad_sizes(self):
        for n in (6, 7, 33):
            with pytest.raises(ValueError):
                Grid(n)
        with pytest.raises(ValueError):
            Grid(16, 0.0)

    def test_wavenumbers_from_n_and_L(self):
        g = Grid(16, 4 * math.pi)
        k = np.fft.fftfreq(16, 1 / 16)
        np.testing.assert_array_equal(g.xi1[:, 0], 0.5 * k)
        np.testing.assert_array_equal(g.xi2[0, :], 0.5 * k)
        assert g.dx == pytest.approx(4 * math.pi / 16)

    def test_dealias_mask_is_two_thirds(self):
        g = Grid(48)
        kmax = np.max(np.abs(g.k1[g.dealias_mask]))
        assert kmax < 48 / 3 <= kmax + 1

    def test_half_layout_matches_full(self, grid32, rng):
        f = random_scalar(grid32, rng)
        half = grid32.rfft(f.to_physical())
        np.testing.assert_allclose(half, f.coeffs[:, : grid32.nh], atol=1e-15)
        np.testing.assert_allclose(full_from_half(half, 32), f.coeffs, atol=1e-15)

    def test_half_weights_reproduce_parseval(self, grid32, rng):
        f = random_scalar(grid32, rng, decay=0.0)
        half = f.coeffs[:, : grid32.nh]
        full = np.sum(np.abs(f.coeffs) ** 2)
        assert np.sum(grid32.half_weights * np.abs(half) ** 2) == pytest.approx(full, rel=1e-13)


class TestSpectralField:
    def test_round_trip(self, grid32, rng):
        v = rng.standard_normal((32, 32))
        f = SpectralField.from_physical(grid32, v)
        np.testing.assert_allclose(f.to_physical(), v, rtol=0, atol=1e-12 * np.max(np.abs(v)))

    def test_conjugate_symmetry_enforced(self, grid32):
        c = np.zeros((32, 32), complex)
        c[1, 2] = 1.0
        with pytest.raises(ValueError, match="conjugate"):
            SpectralField(grid32, c)
        SpectralField(grid32, c, real_flag=False)

    def test_immutable(self, grid32, rng):
        f = random_scalar(grid32, rng)
        with pytest.raises(ValueError):
            f.coeffs[0, 0] = 1.0

    def test_shape_checked(self, grid32):
        with pytest.raises(ValueError):
            SpectralField(grid32, np.zeros((16, 16)))

    def test_vector_components_share_grid(self, grid32):
        with pytest.raises(ValueError):
            VectorField((SpectralField.zeros(grid32), SpectralField.zeros(Grid(16))))


class TestDifferentiate:
    def test_constant(self, grid32):
        f = SpectralField.from_physical(grid32, np.full((32, 32), 3.0))
        assert np.max(np.abs(differentiate(f, 1).coeffs)) == 0

    @pytest.mark.parametrize("n", [8, 16, 64])
    def test_sin_to_cos(self, n):
        g = Grid(n)
        x1, _ = g.x
        d = differentiate(SpectralField.from_physical(g, np.sin(x1)), 1)
        np.testing.assert_allclose(d.to_physical(), np.cos(x1), atol=1e-12)

    def test_laplacian_of_product(self, grid32):
        x1, x2 = grid32.x
        f = SpectralField.from_physical(grid32, np.sin(x1) * np.sin(x2))
        lap = differentiate(f, 1, 2) + differentiate(f, 2, 2)
        np.testing.assert_allclose(lap.to_physical(), -2 * np.sin(x1) * np.sin(x2), atol=1e-12)

    def test_bad_arguments(self, grid32):
        f = SpectralField.zeros(grid32)
        with pytest.raises(ValueError):
            differentiate(f, 3)
        with pytest.raises(ValueError):
            differentiate(f, 1, 0)

    def test_odd_derivative_stays_real(self, grid32, rng):
        f = SpectralField.from_physical(grid32, rng.standard_normal((32, 32)))
        d = differentiate(f, 2, 3)
        assert d.real_flag


class TestLeray:
    def test_gradient_annihilated(self, grid32):
        x1, x2 = grid32.x
        grad = VectorField.from_physical(grid32, np.stack([np.cos(x1 + x2), np.cos(x1 + x2)]))
        assert norm(leray_project(grad)) < 1e-12

    def test_divergence_free_fixed(self, grid32):
        x1, x2 = grid32.x
        # psi = sin x1 sin x2
        v = VectorField.from_physical(grid32, np.stack([-np.sin(x1) * np.cos(x2), np.cos(x1) * np.sin(x2)]))
        assert norm(leray_project(v) - v) < 1e-12 * norm(v)

    def test_closed_form_and_mode_oracle(self, grid32):
        x1, x2 = grid32.x
        v = VectorField.from_physical(grid32, np.stack([np.sin(x2), np.sin(x1 + x2)]))
        p = leray_project(v)
        # div v = cos(x1 + x2) = Lap phi with phi = -cos(x1 + x2) / 2
        expect = np.stack([np.sin(x2) - 0.5 * np.sin(x1 + x2), 0.5 * np.sin(x1 + x2)])
        np.testing.assert_allclose(p.to_physical(), expect, atol=1e-13)
        o1, o2 = leray_by_modes(v[0].coeffs, v[1].coeffs, grid32.box_length)
        np.testing.assert_allclose(p.coeffs, np.stack([o1, o2]), atol=1e-15)

    def test_random_matches_mode_oracle(self, grid32, rng):
        v = random_vector(grid32, rng, decay=0.0)
        o1, o2 = leray_by_modes(v[0].coeffs, v[1].coeffs, grid32.box_length)
        np.testing.assert_allclose(leray_project(v).coeffs, np.stack([o1, o2]), atol=1e-14)

    def test_mean_passes_through(self, grid32):
        v = VectorField.from_physical(grid32, np.ones((2, 32, 32)))
        np.testing.assert_allclose(leray_project(v).to_physical(), 1.0)

    def test_idempotent_over_100_fields(self, grid32, rng):
        for _ in range(100):
            v = random_vector(grid32, rng, decay=1.0)
            p = leray_project(v)
            assert norm(leray_project(p) - p) < 1e-12 * norm(v)
            assert np.max(np.abs(divergence(p).coeffs)) < 1e-12 * np.max(np.abs(v.coeffs)) * 32

    def test_symmetric(self, grid32, rng):
        for _ in range(20):
            u, v = random_vector(grid32, rng), random_vector(grid32, rng)
            a, b = inner(leray_project(u), v), inner(u, leray_project(v))
            assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


class TestLambdaS:
    def test_zero_order_identity(self, grid32, rng):
        f = random_scalar(grid32, rng)
        np.testing.assert_array_equal(lambda_s(f, 0).coeffs, f.coeffs)

    @pytest.mark.parametrize("s", [0.5, 1.0, 2.5, -1.0])
    def test_unit_mode(self, grid32, s):
        x1, _ = grid32.x
        f = SpectralField.from_physical(grid32, np.cos(x1))
        np.testing.assert_allclose(lambda_s(f, s).to_physical(), 2 ** (s / 2) * np.cos(x1), atol=1e-12)

    def test_lambda_two_is_one_minus_laplacian(self, grid32, rng):
        f = random_scalar(grid32, rng)
        lap = differentiate(f, 1, 2) + differentiate(f, 2, 2)
        np.testing.assert_allclose(lambda_s(f, 2).coeffs, (f - lap).coeffs, atol=1e-12)

    @given(s=st.floats(-3, 3, allow_nan=False), seed=st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_inverse(self, s, seed):
        g = Grid(16)
        f = random_scalar(g, np.random.default_rng(seed))
        back = lambda_s(lambda_s(f, s), -s)
        np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-12 * np.max(np.abs(f.coeffs)))


class TestNorm:
    def test_sin_l2(self, grid32):
        x1, _ = grid32.x
        f = SpectralField.from_physical(grid32, np.sin(x1))
        assert norm(f) == pytest.approx(math.sqrt(2) * math.pi, rel=1e-12)

    def test_h0_is_l2(self, grid32, rng):
        f = random_scalar(grid32, rng)
        assert norm(f, "Hs", s=0) == pytest.approx(norm(f), rel=1e-14)

    @pytest.mark.parametrize("eps", [0.1, 0.3, 0.9])
    def test_hdot_unit_modes(self, grid32, eps):
        x1, _ = grid32.x
        f = SpectralField.from_physical(grid32, np.sin(x1))
        assert norm(f, "Hdot", sigma=-eps) == pytest.approx(norm(f), rel=1e-12)

    def test_hdot_matches_mode_sum(self, grid32, rng):
        f = random_scalar(grid32, rng, decay=0.0)
        for sigma in (-0.3, -0.8, 0.7):
            assert norm(f, "Hdot", sigma=sigma) == pytest.approx(hdot_norm(f.coeffs, 2 * math.pi, sigma), rel=1e-12)

    def test_hdot_negative_rejects_mean(self, grid32, rng):
        f = random_scalar(grid32, rng, mean=1.0)
        with pytest.raises(ValueError, match="mean"):
            norm(f, "Hdot", sigma=-0.3)

    def test_hs_is_l2_of_lambda_s(self, grid32, rng):
        v = random_vector(grid32, rng)
        assert norm(v, "Hs", s=2.5) == pytest.approx(norm(lambda_s(v, 2.5)), rel=1e-13)

    @pytest.mark.parametrize("L", [2 * math.pi, 7.0])
    def test_parseval(self, rng, L):
        g = Grid(32, L)
        f = random_scalar(g, rng, decay=0.5)
        quad = math.sqrt(np.sum(f.to_physical() ** 2) * g.dx**2)
        assert norm(f) == pytest.approx(quad, rel=1e-10)
        assert norm(f, "Lp", p=2) == pytest.approx(quad, rel=1e-10)

    def test_linf_and_lp_of_vector_use_magnitude(self, grid32):
        x1, _ = grid32.x
        v = VectorField.from_physical(grid32, np.stack([np.cos(x1), np.sin(x1)]))
        assert norm(v, "Linf") == pytest.approx(1.0)
        assert norm(v, "Lp", p=4) == pytest.approx((2 * math.pi) ** 0.5, rel=1e-12)

    def test_unknown_kind(self, grid32):
        with pytest.raises(ValueError):
            norm(SpectralField.zeros(grid32), "H1")

    @given(lam=st.floats(1e-3, 1e3), seed=st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_homogeneity(self, lam, seed):
        g = Grid(16)
        f = random_scalar(g, np.random.default_rng(seed))
        for kind, kw in (("L2", {}), ("Hs", {"s": 2.5}), ("Hdot", {"sigma": -0.3}), ("Linf", {}), ("Lp", {"p": 3})):
            assert norm(f * lam, kind, **kw) == pytest.approx(lam * norm(f, kind, **kw), rel=1e-12)
