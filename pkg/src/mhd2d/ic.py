"""Initial conditions: exact-solution seeds and random divergence-free spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mhd2d.spectral import Grid, VectorField, full_from_half, norm
from mhd2d.state import MHDState

KINDS = ("zero", "shear", "elsasser_aligned", "single_mode", "random_spectrum")


def alpha_for_epsilon(eps: float) -> float:
    """Low-shell slope whose linear heat flow decays like t^-min(eps, 1/2) in 2-D.

    With per-mode amplitude |u_hat| ~ |xi|^alpha the L2 norm of the heat flow behaves like
    t^-(alpha + 1)/2, and such data lie in H^-e for every e < alpha + 1.
    """
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    return 2.0 * min(eps, 0.5) - 1.0


@dataclass(frozen=True)
class ICSpec:
    kind: str = "random_spectrum"
    amplitude: float = 1e-2
    seed: int = 0
    alpha_low: float = 0.0
    r_high: float = 3.0
    k_cross: float = 1.0
    mode: tuple[int, int] = (1, 1)
    grid: Grid | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind != "zero" and not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.k_cross <= 0:
            raise ValueError("k_cross must be positive")
        object.__setattr__(self, "mode", tuple(int(m) for m in self.mode))
        object.__setattr__(self, "seed", int(self.seed))


def _stream_to_velocity(grid: Grid, psi_half: np.ndarray) -> np.ndarray:
    """(-d2 psi, d1 psi) in the half layout."""
    return np.stack([-1j * grid.xi2_half * psi_half, 1j * grid.xi1_half * psi_half])


def _random_phases(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    c = grid.rfft(rng.standard_normal((grid.n, grid.n)))
    mag = np.abs(c)
    out = np.zeros_like(c)
    nz = mag > 0
    out[nz] = c[nz] / mag[nz]
    return out


def spectrum_profile(xi: np.ndarray, alpha_low: float, r_high: float, k_cross: float) -> np.ndarray:
    """|xi|^alpha_low below k_cross, continued as |xi|^-r_high above; zero at xi = 0."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    lo = (xi > 0) & (xi < k_cross)
    hi = xi >= k_cross
    out[lo] = xi[lo] ** alpha_low
    out[hi] = k_cross ** (alpha_low + r_high) * xi[hi] ** (-r_high)
    return out


def _random_spectrum(spec: ICSpec, grid: Grid) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    xi = np.sqrt(grid.xi_sq_half)
    amp = spectrum_profile(xi, spec.alpha_low, spec.r_high, spec.k_cross) * grid.dealias_mask_half
    inv_xi = np.zeros_like(xi)
    inv_xi[xi > 0] = 1.0 / xi[xi > 0]
    fields = []
    for _ in range(2):  # u, then b
        psi = _random_phases(grid, rng) * amp * inv_xi
        fields.append(_stream_to_velocity(grid, psi))
    z = np.concatenate(fields)
    energy = grid.area * float(np.sum(grid.half_weights * np.abs(z) ** 2))
    if energy <= 0 or not math.isfinite(energy):
        raise ValueError("spectrum has no resolved energy on this grid")
    rms = math.sqrt(energy / grid.area)
    return z * (spec.amplitude / rms)


def make_ic(spec: ICSpec, grid: Grid | None = None) -> MHDState:
    """Divergence-free, zero-mean (u0, b0) for ``spec``.

    random_spectrum: per-mode |u_hat| follows ``spectrum_profile`` with random phases drawn
    from ``seed``, built from a stream function and truncated to the dealiasing mask;
    ``amplitude`` is the rms of (u, b) over the box. For the exact-solution kinds
    ``amplitude`` multiplies the closed-form fields.
    """
    grid = grid if grid is not None else spec.grid
    if grid is None:
        raise ValueError("a Grid is required")
    A = spec.amplitude
    x1, x2 = grid.x
    s = grid.dxi
    if spec.kind == "zero":
        return MHDState.zeros(grid)
    if spec.kind == "shear":
        m = spec.mode[1] if spec.mode[1] else spec.mode[0]
        u = np.stack([A * np.sin(m * s * x2), np.zeros_like(x2)])
        return MHDState.from_physical(grid, u, np.zeros_like(u))
    if spec.kind == "elsasser_aligned":
        u = A * elsasser_profile(grid, 0.0)
        return MHDState.from_physical(grid, u, u.copy())
    if spec.kind == "single_mode":
        k1, k2 = spec.mode
        if k1 == 0 and k2 == 0:
            raise ValueError("single_mode needs a nonzero wavevector")
        xi1, xi2 = s * k1, s * k2
        mag = math.hypot(xi1, xi2)
        ph = xi1 * x1 + xi2 * x2
        perp = np.array([-xi2, xi1])[:, None, None] / mag
        return MHDState.from_physical(grid, A * perp * np.sin(ph), A * perp * np.cos(ph))
    z = _random_spectrum(spec, grid)
    state = MHDState.from_half(grid, z)
    rep = ic_report(state)
    if not all(math.isfinite(v) for v in rep.values()):
        raise ValueError(f"initial condition has non-finite norms: {rep}")
    return state


def elsasser_profile(grid: Grid, t: float) -> np.ndarray:
    """Closed-form u = b for the aligned seed after time t of translation-diffusion.

    Stream function psi = sin(x1) sin(x2) + 0.5 cos(2 x1 + x2) (in box units); every Fourier
    mode is multiplied by exp((-|xi|^2 + i xi1) t), i.e. heat flow plus unit drift along -x1.
    """
    x1, x2 = grid.x
    s = grid.dxi
    out = np.zeros((2, grid.n, grid.n))
    # sin(a)sin(b) = 0.5[cos(a-b) - cos(a+b)]; each term is a cosine wave c cos(k.x)
    waves = [(0.5, (1, -1)), (-0.5, (1, 1)), (0.5, (2, 1))]
    for c, (k1, k2) in waves:
        xi1, xi2 = s * k1, s * k2
        decay = math.exp(-(xi1**2 + xi2**2) * t)
        ph = xi1 * (x1 + t) + xi2 * x2
        # psi = c cos(ph)  ->  (-d2 psi, d1 psi) = c (xi2 sin(ph), -xi1 sin(ph))
        out[0] += c * decay * xi2 * np.sin(ph)
        out[1] += -c * decay * xi1 * np.sin(ph)
    return out


def ic_report(state: MHDState, eps: float = 0.3, s: float = 2.5) -> dict:
    """L2, H^s and homogeneous H^-eps norms of (u, b) combined."""
    def both(kind, **kw):
        return math.hypot(norm(state.u, kind, **kw), norm(state.b, kind, **kw))

    return {
        "l2": both("L2"),
        "hs": both("Hs", s=s),
        "hdot_neg": both("Hdot", sigma=-eps),
        "linf_u": norm(state.u, "Linf"),
        "linf_b": norm(state.b, "Linf"),
    }


def amplitude_calibrate(state: MHDState, target_hs_norm: float, s: float) -> MHDState:
    """Rescale (u, b) so that ||(u, b)||_{H^s} equals ``target_hs_norm``."""
    current = math.hypot(norm(state.u, "Hs", s=s), norm(state.b, "Hs", s=s))
    if current == 0:
        raise ValueError("cannot calibrate the zero state")
    if not target_hs_norm > 0:
        raise ValueError("target norm must be positive")
    return state.scaled(target_hs_norm / current)


def perturb_mode(state: MHDState, k: tuple[int, int], size: float) -> MHDState:
    """Add a divergence-free single-mode velocity perturbation of L2 norm |size| (sign kept)."""
    g = state.grid
    half = np.zeros((g.n, g.nh), dtype=complex)
    k1, k2 = k
    if k2 < 0:
        k1, k2 = -k1, -k2
    half[k1 % g.n, k2] = 1.0
    if k2 == 0:
        half[(-k1) % g.n, 0] = 1.0
    v = _stream_to_velocity(g, half)
    full = full_from_half(v, g.n)
    dv = VectorField.from_coeffs(g, full)
    scale = size / norm(dv, "L2")
    return type(state)(state.u + dv * scale, state.b, state.time)
