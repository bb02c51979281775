"""Fourier-space field representation on the periodic box and the linear operators acting on it.

Coefficients are stored as Fourier-series coefficients,

    f(x) = sum_k  c_k exp(i xi_k . x),      xi_k = (2 pi / L) k,

so ``c = fft2(f) / n**2`` and the L2 norm on the box is ``L * sqrt(sum |c_k|**2)``.
Array axis 0 is x1 and axis 1 is x2.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import scipy.fft as sfft
from scipy.special import j0

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "differentiate",
    "divergence",
    "leray_project",
    "mollify",
    "mollifier_symbol",
    "bump_fourier",
    "lambda_s",
    "norm",
    "inner",
    "fft_workers",
    "full_from_half",
]

REAL_TOL = 1e-12


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``MHD2D_THREADS``."""
    env = os.environ.get("MHD2D_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform n x n periodic grid on [0, L)^2."""

    n: int
    box_length: float = 2.0 * np.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n!r}")
        if not (self.box_length > 0 and np.isfinite(self.box_length)):
            raise ValueError(f"box_length must be positive, got {self.box_length!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def area(self) -> float:
        return self.box_length**2

    @property
    def dxi(self) -> float:
        """Spacing of the wavenumber lattice, 2 pi / L."""
        return 2.0 * np.pi / self.box_length

    @property
    def nh(self) -> int:
        return self.n // 2 + 1

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, in [-n/2, n/2)."""
        return _frozen(np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(np.int64))

    @cached_property
    def k_half(self) -> np.ndarray:
        return _frozen(np.arange(self.nh, dtype=np.int64))

    @cached_property
    def k1(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.k[:, None], (self.n, self.n)).copy())

    @cached_property
    def k2(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.k[None, :], (self.n, self.n)).copy())

    @cached_property
    def ksq(self) -> np.ndarray:
        """Integer |k|^2 (exact)."""
        return _frozen(self.k1**2 + self.k2**2)

    @cached_property
    def xi1(self) -> np.ndarray:
        return _frozen(self.dxi * self.k1)

    @cached_property
    def xi2(self) -> np.ndarray:
        return _frozen(self.dxi * self.k2)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return _frozen(self.dxi**2 * self.ksq.astype(float))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep |k_i| < n/3 on both axes."""
        keep = 3 * np.abs(self.k) < self.n
        return _frozen(keep[:, None] & keep[None, :])

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """Ones except on the Nyquist row/column, where odd derivatives are zeroed."""
        ok = self.k != -self.n // 2
        return _frozen((ok[:, None] & ok[None, :]).astype(float))

    # Half-spectrum (rfft2 along x2) layout used by the time stepper.

    @cached_property
    def k1_half(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.k[:, None], (self.n, self.nh)).copy())

    @cached_property
    def k2_half(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.k_half[None, :], (self.n, self.nh)).copy())

    @cached_property
    def ksq_half(self) -> np.ndarray:
        return _frozen(self.k1_half**2 + self.k2_half**2)

    @cached_property
    def xi1_half(self) -> np.ndarray:
        return _frozen(self.dxi * self.k1_half)

    @cached_property
    def xi2_half(self) -> np.ndarray:
        return _frozen(self.dxi * self.k2_half)

    @cached_property
    def xi_sq_half(self) -> np.ndarray:
        return _frozen(self.dxi**2 * self.ksq_half.astype(float))

    @cached_property
    def inv_xi_sq_half(self) -> np.ndarray:
        inv = np.zeros((self.n, self.nh))
        nz = self.ksq_half > 0
        inv[nz] = 1.0 / self.xi_sq_half[nz]
        return _frozen(inv)

    @cached_property
    def dealias_mask_half(self) -> np.ndarray:
        keep1 = 3 * np.abs(self.k) < self.n
        keep2 = 3 * self.k_half < self.n
        return _frozen(keep1[:, None] & keep2[None, :])

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum column in the full spectrum."""
        w = np.full(self.nh, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return _frozen(np.broadcast_to(w[None, :], (self.n, self.nh)).copy())

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates (x1, x2), each n x n, indexing='ij'."""
        s = np.arange(self.n) * self.dx
        x1, x2 = np.meshgrid(s, s, indexing="ij")
        return _frozen(x1), _frozen(x2)

    def fft(self, values: np.ndarray) -> np.ndarray:
        return sfft.fft2(values, norm="forward", workers=fft_workers())

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifft2(coeffs, norm="forward", workers=fft_workers())

    def rfft(self, values: np.ndarray) -> np.ndarray:
        return sfft.rfft2(values, norm="forward", workers=fft_workers())

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft2(coeffs, s=(self.n, self.n), norm="forward", workers=fft_workers())


def _reflect(c: np.ndarray) -> np.ndarray:
    """c[(-i) % n, (-j) % n] for the last two axes."""
    return np.roll(np.flip(c, axis=(-2, -1)), 1, axis=(-2, -1))


def full_from_half(half: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the full n x n spectrum of a real field from its rfft2 half."""
    nh = n // 2 + 1
    full = np.empty(half.shape[:-1] + (n,), dtype=complex)
    full[..., :nh] = half
    # columns j = nh .. n-1 hold k2 = j - n; conj partner sits at column n - j, row -i
    cols = np.arange(nh, n)
    rows = (-np.arange(n)) % n
    full[..., nh:] = np.conj(half[..., rows, :][..., n - cols])
    return full


@dataclass(frozen=True, eq=False)
class SpectralField:
    """One scalar field stored as Fourier coefficients on a Grid."""

    grid: Grid
    coeffs: np.ndarray
    real_flag: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        n = self.grid.n
        if c.shape != (n, n):
            raise ValueError(f"coeffs must have shape {(n, n)}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs contain non-finite values")
        if self.real_flag:
            scale = np.max(np.abs(c), initial=0.0)
            if scale > 0 and np.max(np.abs(c - np.conj(_reflect(c)))) > REAL_TOL * scale:
                raise ValueError("real_flag set but coefficients are not conjugate-symmetric")
        object.__setattr__(self, "coeffs", _frozen(c))

    @classmethod
    def _derived(cls, grid: Grid, coeffs: np.ndarray, real_flag: bool) -> "SpectralField":
        """Result of linear arithmetic on checked fields; symmetry is inherited, not re-tested.

        Re-testing against the result's own scale would reject the roundoff left by cancellation.
        """
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coeffs contain non-finite values")
        out = object.__new__(cls)
        object.__setattr__(out, "grid", grid)
        object.__setattr__(out, "coeffs", _frozen(np.array(coeffs, dtype=complex, copy=True)))
        object.__setattr__(out, "real_flag", real_flag)
        return out

    @classmethod
    def from_physical(cls, grid: Grid, values) -> "SpectralField":
        values = np.asarray(values)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"values must have shape {(grid.n, grid.n)}, got {values.shape}")
        real = not np.iscomplexobj(values)
        return cls(grid, grid.fft(values), real_flag=real)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    def to_physical(self) -> np.ndarray:
        v = self.grid.ifft(self.coeffs)
        return v.real.copy() if self.real_flag else v

    def with_coeffs(self, coeffs: np.ndarray, real_flag: bool | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real_flag if real_flag is None else real_flag)

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[0, 0])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField._derived(self.grid, self.coeffs + other.coeffs, self.real_flag and other.real_flag)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField._derived(self.grid, self.coeffs - other.coeffs, self.real_flag and other.real_flag)

    def __mul__(self, a: float) -> "SpectralField":
        if not np.isscalar(a):
            return NotImplemented
        real = self.real_flag and np.isrealobj(a)
        return SpectralField._derived(self.grid, self.coeffs * a, real)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self * -1.0


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two-component field; both components live on the same Grid."""

    components: tuple[SpectralField, SpectralField]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 2:
            raise ValueError("a VectorField has exactly two components")
        if comps[0].grid != comps[1].grid:
            raise ValueError("components must share one Grid")
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @property
    def real_flag(self) -> bool:
        return self.components[0].real_flag and self.components[1].real_flag

    @property
    def coeffs(self) -> np.ndarray:
        """Stacked coefficients, shape (2, n, n) (a fresh array)."""
        return np.stack([c.coeffs for c in self.components])

    def __getitem__(self, i: int) -> SpectralField:
        return self.components[i]

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs, real_flag: bool = True) -> "VectorField":
        return cls((SpectralField(grid, coeffs[0], real_flag), SpectralField(grid, coeffs[1], real_flag)))

    @classmethod
    def from_physical(cls, grid: Grid, values) -> "VectorField":
        return cls(tuple(SpectralField.from_physical(grid, v) for v in values))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls((SpectralField.zeros(grid), SpectralField.zeros(grid)))

    def to_physical(self) -> np.ndarray:
        return np.stack([c.to_physical() for c in self.components])

    def map(self, fn) -> "VectorField":
        return VectorField(tuple(fn(c) for c in self.components))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField((self[0] + other[0], self[1] + other[1]))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField((self[0] - other[0], self[1] - other[1]))

    def __mul__(self, a: float) -> "VectorField":
        if not np.isscalar(a):
            return NotImplemented
        return VectorField((self[0] * a, self[1] * a))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return self * -1.0


Field = Union[SpectralField, VectorField]


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def _apply(f: Field, symbol: np.ndarray, keeps_real: bool = True) -> Field:
    if isinstance(f, VectorField):
        return f.map(lambda c: _apply(c, symbol, keeps_real))
    return SpectralField(f.grid, f.coeffs * symbol, f.real_flag and keeps_real)


def differentiate(f: Field, axis: int, order: int = 1) -> Field:
    """Partial derivative along x_axis (axis 1 or 2), repeated ``order`` times."""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if int(order) != order or order < 1:
        raise ValueError("order must be a positive integer")
    g = f.grid
    xi = g.xi1 if axis == 1 else g.xi2
    symbol = (1j * xi) ** order
    if order % 2:
        # an odd derivative of the lone Nyquist mode has no real-valued image
        symbol = symbol * g.nyquist_free
    return _apply(f, symbol)


def divergence(v: VectorField) -> SpectralField:
    return differentiate(v[0], 1) + differentiate(v[1], 2)


def leray_project(v: VectorField) -> VectorField:
    """Remove the gradient part: v_hat - xi (xi . v_hat) / |xi|^2.

    The mean mode passes through, and so do Nyquist modes, which carry no divergence
    (odd derivatives vanish there) and would otherwise lose conjugate symmetry.
    """
    g = v.grid
    c1, c2 = v[0].coeffs, v[1].coeffs
    keep = g.nyquist_free
    xi1, xi2 = g.xi1 * keep, g.xi2 * keep
    inv = np.zeros_like(g.xi_sq)
    nz = (g.ksq > 0) & (keep > 0)
    inv[nz] = 1.0 / g.xi_sq[nz]
    dot = (xi1 * c1 + xi2 * c2) * inv
    w1 = c1 - xi1 * dot
    w2 = c2 - xi2 * dot
    return VectorField((v[0].with_coeffs(w1), v[1].with_coeffs(w2)))


def _bump(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@functools.lru_cache(maxsize=8)
def _bump_nodes(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    r = 0.5 * (x + 1.0)
    w = 0.5 * w
    weight = 2.0 * np.pi * _bump(r) * r * w
    return r, weight / weight.sum()


def bump_fourier(q) -> np.ndarray:
    """Fourier transform of the unit-mass radial bump in 2-D at |eta| = q.

    rho(r) = c exp(-1/(1-r^2)) on r < 1, and rho_hat(q) = 2 pi int_0^1 rho(r) J0(q r) r dr.
    Gauss-Legendre nodes are scaled with max q so the Bessel oscillation stays resolved.
    """
    q = np.asarray(q, dtype=float)
    qmax = float(np.max(q, initial=0.0))
    m = int(min(4096, 96 + 2 * np.ceil(qmax)))
    r, wt = _bump_nodes(m)
    flat = q.ravel()
    out = np.empty_like(flat)
    chunk = max(1, 2_000_000 // m)
    for s in range(0, flat.size, chunk):
        out[s : s + chunk] = j0(np.outer(flat[s : s + chunk], r)) @ wt
    return out.reshape(q.shape)


@functools.lru_cache(maxsize=32)
def _mollifier_table(n: int, box_length: float, eps: float, half: bool) -> np.ndarray:
    g = Grid(n, box_length)
    ksq = g.ksq_half if half else g.ksq
    uniq, inv = np.unique(ksq, return_inverse=True)
    vals = bump_fourier(eps * g.dxi * np.sqrt(uniq.astype(float)))
    return _frozen(vals[inv].reshape(ksq.shape))


def mollifier_symbol(grid: Grid, eps: float, half: bool = False) -> np.ndarray:
    """rho_hat(eps |xi|) on the grid's wavenumbers (cached per grid and eps)."""
    eps = float(eps)
    if not eps > 0:
        raise ValueError(f"mollification scale must be positive, got {eps}")
    if eps >= grid.box_length / 4:
        raise ValueError(
            f"mollification scale {eps} >= L/4 = {grid.box_length / 4}: the kernel would wrap around the box"
        )
    return _mollifier_table(grid.n, grid.box_length, eps, half)


def mollify(f: Field, eps: float) -> Field:
    """Convolution with rho_eps, applied as multiplication by rho_hat(eps xi)."""
    return _apply(f, mollifier_symbol(f.grid, eps))


def lambda_s(f: Field, s: float) -> Field:
    """Bessel potential (1 - Laplacian)^(s/2)."""
    g = f.grid
    return _apply(f, (1.0 + g.xi_sq) ** (0.5 * s))


def inner(f: Field, h: Field) -> float:
    """Real L2 inner product over the box."""
    _same_grid(f, h)
    a = f.coeffs if isinstance(f, VectorField) else f.coeffs[None]
    b = h.coeffs if isinstance(h, VectorField) else h.coeffs[None]
    return float(f.grid.area * np.sum(a * np.conj(b)).real)


def _stack(f: Field) -> np.ndarray:
    return f.coeffs if isinstance(f, VectorField) else f.coeffs[None]


def _magnitude(f: Field) -> np.ndarray:
    if isinstance(f, VectorField):
        v = f.to_physical()
        return np.sqrt(np.sum(np.abs(v) ** 2, axis=0))
    return np.abs(f.to_physical())


def norm(f: Field, kind: str = "L2", *, p: float | None = None, s: float | None = None,
         sigma: float | None = None) -> float:
    """Norm of a scalar or vector field on the box.

    ``kind`` is one of ``"L2"``, ``"Lp"`` (needs ``p``), ``"Linf"``, ``"Hs"`` (needs ``s``)
    or ``"Hdot"`` (needs ``sigma``). Vector norms use the Euclidean magnitude pointwise.
    Lp and Linf are evaluated by quadrature on the grid points.
    """
    g = f.grid
    kind = kind.lower()
    if kind == "l2":
        return float(g.box_length * np.sqrt(np.sum(np.abs(_stack(f)) ** 2)))
    if kind == "hs":
        if s is None:
            raise ValueError("Hs norm needs s")
        w = (1.0 + g.xi_sq) ** s
        return float(g.box_length * np.sqrt(np.sum(w * np.abs(_stack(f)) ** 2)))
    if kind == "hdot":
        if sigma is None:
            raise ValueError("Hdot norm needs sigma")
        c = _stack(f)
        if sigma < 0:
            scale = np.max(np.abs(c), initial=0.0)
            if np.max(np.abs(c[:, 0, 0]), initial=0.0) > 1e-12 * max(scale, 1e-300):
                raise ValueError("homogeneous norm of negative order is undefined for a nonzero mean")
        w = np.zeros_like(g.xi_sq)
        nz = g.ksq > 0
        w[nz] = g.xi_sq[nz] ** sigma
        if sigma == 0:
            w[0, 0] = 1.0
        return float(g.box_length * np.sqrt(np.sum(w * np.abs(c) ** 2)))
    if kind == "linf":
        return float(np.max(_magnitude(f)))
    if kind == "lp":
        if p is None or p < 1:
            raise ValueError("Lp norm needs p >= 1")
        if np.isinf(p):
            return float(np.max(_magnitude(f)))
        m = _magnitude(f)
        return float((np.sum(m**p) * g.dx**2) ** (1.0 / p))
    raise ValueError(f"unknown norm kind {kind!r}")
