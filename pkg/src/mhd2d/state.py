"""Velocity / magnetic-perturbation pair at one instant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mhd2d.spectral import Grid, SpectralField, VectorField, full_from_half

DIV_TOL = 1e-10
MEAN_TOL = 1e-12


class StateError(ValueError):
    pass


def _check_div_free(name: str, v: VectorField) -> None:
    g = v.grid
    c1, c2 = v[0].coeffs, v[1].coeffs
    div = np.abs(g.xi1 * c1 + g.xi2 * c2)
    scale = np.sqrt(g.xi_sq) * np.sqrt(np.abs(c1) ** 2 + np.abs(c2) ** 2)
    top = np.max(scale, initial=0.0)
    if top > 0 and np.max(div) > DIV_TOL * top:
        raise StateError(f"{name} is not divergence-free (max |xi.{name}_hat| = {np.max(div):.3e})")


def _check_zero_mean(name: str, v: VectorField) -> None:
    c = v.coeffs
    top = np.max(np.abs(c), initial=0.0)
    if np.max(np.abs(c[:, 0, 0])) > MEAN_TOL * max(top, 1e-300):
        raise StateError(f"{name} must have zero mean")


@dataclass(frozen=True, eq=False)
class MHDState:
    """(u, b) with b = B - e1, both divergence-free with zero mean."""

    u: VectorField
    b: VectorField
    time: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.b.grid:
            raise StateError("u and b must share one Grid")
        if not (self.time >= 0 and np.isfinite(self.time)):
            raise StateError(f"time must be finite and >= 0, got {self.time}")
        for name, v in (("u", self.u), ("b", self.b)):
            _check_div_free(name, v)
            _check_zero_mean(name, v)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "MHDState":
        return cls(VectorField.zeros(grid), VectorField.zeros(grid), time)

    @classmethod
    def from_physical(cls, grid: Grid, u, b, time: float = 0.0) -> "MHDState":
        return cls(VectorField.from_physical(grid, u), VectorField.from_physical(grid, b), time)

    @classmethod
    def from_half(cls, grid: Grid, z: np.ndarray, time: float = 0.0) -> "MHDState":
        """Build from stacked half spectra ``z`` of shape (4, n, n//2+1): u1, u2, b1, b2."""
        full = full_from_half(np.asarray(z), grid.n)
        return cls(
            VectorField.from_coeffs(grid, full[:2]),
            VectorField.from_coeffs(grid, full[2:]),
            time,
        )

    def to_half(self) -> np.ndarray:
        nh = self.grid.nh
        return np.concatenate([self.u.coeffs[:, :, :nh], self.b.coeffs[:, :, :nh]]).copy()

    def with_time(self, time: float) -> "MHDState":
        return MHDState(self.u, self.b, time)

    def scaled(self, factor: float) -> "MHDState":
        return MHDState(self.u * factor, self.b * factor, self.time)

    def total_magnetic_field(self) -> np.ndarray:
        """Physical B = e1 + b, shape (2, n, n)."""
        B = self.b.to_physical()
        B[0] += 1.0
        return B

    def physical(self) -> np.ndarray:
        """Physical u1, u2, b1, b2 stacked, shape (4, n, n)."""
        return np.concatenate([self.u.to_physical(), self.b.to_physical()])


def elsasser(state: MHDState) -> tuple[VectorField, VectorField]:
    """z+ = u + b and z- = u - b."""
    return state.u + state.b, state.u - state.b


__all__ = ["MHDState", "StateError", "elsasser", "SpectralField"]
