"""Refinement and comparison studies built on the solver: closed-form errors, time-step
refinement of the energy ledger, regularized-to-exact convergence and twin-run separation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from mhd2d.diagnostics import RecordWeights
from mhd2d.ic import elsasser_profile
from mhd2d.solver import SolverOptions, integrator
from mhd2d.spectral import norm
from mhd2d.state import MHDState


def fitted_order(h, err) -> float:
    """Least-squares slope of log(err) against log(h)."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 2 or np.any(err <= 0):
        raise ValueError("need at least two positive errors")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def integrate(state: MHDState, options: SolverOptions, t_end: float, callback=None) -> MHDState:
    """Advance ``state`` to ``t_end`` (a whole number of steps) without diagnostics."""
    opts = replace(options, t_end=t_end)
    it = integrator(state.grid, opts)
    z = state.to_half()
    for k in range(1, opts.n_steps + 1):
        z = it.step(z)
        if callback is not None:
            callback(k, z)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite state")
    return MHDState.from_half(state.grid, z, state.time + t_end)


def exact_solution(kind: str, state0: MHDState, t: float, amplitude: float, mode=(1, 1)) -> np.ndarray | None:
    """Closed-form physical (u1, u2, b1, b2) at time t for the shear and aligned seeds."""
    g = state0.grid
    if kind == "shear":
        m = mode[1] if mode[1] else mode[0]
        xi = m * g.dxi
        _, x2 = g.x
        u1 = amplitude * math.exp(-xi * xi * t) * np.sin(xi * x2)
        z = np.zeros_like(u1)
        return np.stack([u1, z, z, z])
    if kind == "elsasser_aligned":
        u = amplitude * elsasser_profile(g, t)
        return np.concatenate([u, u])
    if kind == "zero":
        return np.zeros((4, g.n, g.n))
    return None


def exact_error(kind: str, state: MHDState, amplitude: float, mode=(1, 1)) -> float | None:
    ref = exact_solution(kind, state, state.time, amplitude, mode)
    if ref is None:
        return None
    return float(np.max(np.abs(state.physical() - ref)))


@dataclass(frozen=True)
class DtStudy:
    dts: tuple[float, ...]
    residuals: tuple[float, ...]  # |E(t) + 2 int D - E(0)| / E(0) at t_end
    order: float


def dt_refinement(state0: MHDState, t_end: float, dts=(4e-3, 2e-3, 1e-3), scheme: str = "IF-RK2") -> DtStudy:
    """Energy-ledger residual at ``t_end`` for each dt, with its fitted order."""
    res = []
    for dt in dts:
        w = RecordWeights(state0.grid)
        z0 = state0.to_half()
        e0 = w.energy(z0)
        acc = {"cum": 0.0, "d": w.dissipation(z0)}

        def cb(k, z, w=w, acc=acc, dt=dt):
            d = w.dissipation(z)
            acc["cum"] += 0.5 * dt * (acc["d"] + d)
            acc["d"] = d

        final = integrate(state0, SolverOptions(dt=dt, scheme=scheme), t_end, cb)
        e = w.energy(final.to_half())
        res.append(abs(e + 2.0 * acc["cum"] - e0) / e0)
    return DtStudy(tuple(dts), tuple(res), fitted_order(dts, res))


@dataclass(frozen=True)
class RegularizationStudy:
    eps: tuple[float, ...]
    errors: tuple[float, ...]  # ||(u^eps, b^eps) - (u, b)||_L2 at t
    order: float
    monotone: bool


def regularization_convergence(state0: MHDState, t: float = 0.5, eps_values=(0.2, 0.1, 0.05),
                               dt: float = 1e-3) -> RegularizationStudy:
    """Distance between the mollified and exact evolutions from the same data at time t."""
    exact = integrate(state0, SolverOptions(dt=dt), t)
    errs = []
    for e in eps_values:
        reg = integrate(state0, SolverOptions(dt=dt, mode="regularized", eps_reg=e), t)
        du = reg.u - exact.u
        db = reg.b - exact.b
        errs.append(math.hypot(norm(du), norm(db)))
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    return RegularizationStudy(tuple(eps_values), tuple(errs), fitted_order(eps_values, errs), monotone)


@dataclass(frozen=True)
class TwinRun:
    times: np.ndarray
    separation: np.ndarray  # ||delta(t)||_L2
    gronwall: np.ndarray  # ||delta(0)|| exp(int_0^t (||grad u||_inf + ||grad b||_inf))
    rate: float  # fitted exponential rate of the separation
    gronwall_rate: float  # time-averaged Gronwall coefficient

    @property
    def within_bound(self) -> bool:
        return bool(np.all(self.separation <= self.gronwall * (1 + 1e-6) + 1e-300))


def _grad_sup(grid, z: np.ndarray) -> float:
    """||grad u||_inf + ||grad b||_inf (Frobenius pointwise) from half spectra."""
    xi = (grid.xi1_half, grid.xi2_half)
    total = 0.0
    for comp in (z[:2], z[2:]):
        d = np.stack([1j * xi[j] * comp[i] for i in range(2) for j in range(2)])
        phys = grid.irfft(d)
        total += float(np.sqrt(np.max(np.sum(phys**2, axis=0))))
    return total


def twin_run(state0: MHDState, perturbed: MHDState, t_end: float = 5.0, dt: float = 1e-3,
             every: int = 50) -> TwinRun:
    """Evolve two nearby states and compare their separation with the Gronwall envelope."""
    opts = SolverOptions(dt=dt)
    it = integrator(state0.grid, opts)
    g = state0.grid
    w = g.half_weights
    za, zb = state0.to_half(), perturbed.to_half()

    def sep(a, b):
        d = a - b
        return g.box_length * math.sqrt(float(np.sum(w * (d.real**2 + d.imag**2))))

    n_steps = replace(opts, t_end=t_end).n_steps
    times, seps, bound = [0.0], [sep(za, zb)], [sep(za, zb)]
    G_prev = _grad_sup(g, za)
    integral = 0.0
    for k in range(1, n_steps + 1):
        za = it.step(za)
        zb = it.step(zb)
        G = _grad_sup(g, za)
        integral += 0.5 * dt * (G_prev + G)
        G_prev = G
        if k % every == 0 or k == n_steps:
            times.append(k * dt)
            seps.append(sep(za, zb))
            bound.append(seps[0] * math.exp(integral))
    times = np.array(times)
    seps = np.array(seps)
    rate = float(np.polyfit(times, np.log(seps), 1)[0])
    return TwinRun(times, seps, np.array(bound), rate, integral / t_end)


def perturbation(state: MHDState, k=(1, 2), size: float = 1e-10) -> MHDState:
    from mhd2d.ic import perturb_mode

    return perturb_mode(state, k, size)


__all__ = [
    "DtStudy", "RegularizationStudy", "TwinRun", "dt_refinement", "exact_error", "exact_solution",
    "fitted_order", "integrate", "perturbation", "regularization_convergence", "twin_run",
]
