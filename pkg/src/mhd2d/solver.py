"""Time integration of the perturbation system around (0, e1) and of its mollified approximation.

Evolution equations (b = B - e1)::

    du/dt = Lap u + d1 b + P(b.grad b - u.grad u)
    db/dt = Lap b + d1 u + b.grad u - u.grad b

The linear part is diagonal in Elsasser variables z± = u ± b with symbols -|xi|^2 ± i xi1
and is applied exactly through integrating factors; the nonlinear terms go through an
explicit Runge-Kutta scheme with 2/3-rule dealiasing. Nonlinear terms are evaluated in
divergence form: b.grad b - u.grad u = div(b(x)b - u(x)u) and
b.grad u - u.grad b = (d2 w, -d1 w) with w = u1 b2 - u2 b1.

In regularized mode every term is wrapped in P J_eps and the products are formed from
J_eps u and J_eps b, as in the mollified approximate system.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from mhd2d import kernels
from mhd2d.diagnostics import DiagnosticsRecord, RecordWeights, write_csv
from mhd2d.snapshot import write_checkpoint, write_snapshot
from mhd2d.spectral import Grid, SpectralField, VectorField, full_from_half, mollifier_symbol
from mhd2d.state import MHDState

log = logging.getLogger(__name__)

SCHEMES = ("IF-RK2", "IF-RK4")
MODES = ("exact", "regularized")


class SolverError(RuntimeError):
    """Integration failure; ``state`` holds the last finite state when available."""

    def __init__(self, msg: str, state: MHDState | None = None, trajectory=None):
        super().__init__(msg)
        self.state = state
        self.trajectory = trajectory


class CFLError(SolverError, ValueError):
    def __init__(self, msg: str, dt_max: float):
        super().__init__(msg)
        self.dt_max = dt_max


@dataclass(frozen=True)
class SolverOptions:
    dt: float = 1e-3
    t_end: float = 0.0
    scheme: str = "IF-RK2"
    mode: str = "exact"
    eps_reg: float | None = None
    dealias: bool = True
    nonlinear: bool = True  # test hook: False integrates the linear system only

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "regularized" and not (self.eps_reg is not None and self.eps_reg > 0):
            raise ValueError("regularized mode needs eps_reg > 0")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if abs(n * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError(f"t_end = {self.t_end} is not a whole number of steps of dt = {self.dt}")
        return n


def cfl_limit(grid: Grid, umax: float, bmax: float) -> float:
    """Largest admissible dt: 0.5 dx / max(1, |u|_inf + |b|_inf + 1)."""
    return 0.5 * grid.dx / max(1.0, umax + bmax + 1.0)


class Integrator:
    """Stepper on stacked half spectra z = (u1, u2, b1, b2), shape (4, n, n//2+1)."""

    def __init__(self, grid: Grid, options: SolverOptions):
        self.grid = grid
        self.options = options
        g = grid
        self.xi1 = np.ascontiguousarray(g.xi1_half)
        self.xi2 = np.ascontiguousarray(g.xi2_half)
        self.inv = np.ascontiguousarray(g.inv_xi_sq_half)
        nyq = ((g.k1_half != -g.n // 2) & (g.k2_half != g.n // 2)).astype(float)
        mask = g.dealias_mask_half.astype(float) if options.dealias else nyq
        self.regularized = options.mode == "regularized"
        if self.regularized:
            self.rho = np.ascontiguousarray(mollifier_symbol(g, options.eps_reg, half=True))
        else:
            self.rho = np.ones_like(self.inv)
        self.filt = np.ascontiguousarray(mask * self.rho)
        self.lap = -g.xi_sq_half * self.rho
        self.d1 = 1j * self.xi1 * nyq * self.rho
        self.Lp = self.lap + self.d1
        self.Lm = self.lap - self.d1
        dt = options.dt
        self.Ep = np.ascontiguousarray(np.exp(self.Lp * dt))
        self.Em = np.ascontiguousarray(np.exp(self.Lm * dt))
        self.Ep2 = np.ascontiguousarray(np.exp(self.Lp * dt / 2))
        self.Em2 = np.ascontiguousarray(np.exp(self.Lm * dt / 2))
        self.last_speeds = (0.0, 0.0)

    # -- right-hand side pieces -------------------------------------------------

    def nonlinear(self, u: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Projected nonlinear terms (nu, nb) for half spectra u, b (each (2, n, nh))."""
        g = self.grid
        if self.regularized:
            u = u * self.rho
            b = b * self.rho
        phys = g.irfft(np.concatenate([u, b]))
        t11, t12, t22, w, umax2, bmax2 = kernels.stress(
            np.ascontiguousarray(phys[:2]), np.ascontiguousarray(phys[2:])
        )
        self.last_speeds = (math.sqrt(umax2), math.sqrt(bmax2))
        th = g.rfft(np.stack([t11, t12, t22, w]))
        return kernels.assemble(
            self.xi1, self.xi2, self.inv, self.filt,
            th[0], th[1], th[2], th[3], self.regularized,
        )

    def linear(self, u: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        du = self.lap * u + self.d1 * b
        db = self.lap * b + self.d1 * u
        if self.regularized:
            du = kernels.project(self.xi1, self.xi2, self.inv, np.ascontiguousarray(du))
            db = kernels.project(self.xi1, self.xi2, self.inv, np.ascontiguousarray(db))
        return du, db

    def rhs(self, z: np.ndarray) -> np.ndarray:
        u, b = np.ascontiguousarray(z[:2]), np.ascontiguousarray(z[2:])
        du, db = self.linear(u, b)
        if self.options.nonlinear:
            nu, nb = self.nonlinear(u, b)
            du = du + nu
            db = db + nb
        return np.concatenate([du, db])

    # -- stepping ---------------------------------------------------------------

    def _n(self, u, b):
        if self.options.nonlinear:
            return self.nonlinear(u, b)
        return np.zeros_like(u), np.zeros_like(b)

    def speeds(self, z: np.ndarray) -> tuple[float, float]:
        phys = self.grid.irfft(z)
        umax = float(np.sqrt(np.max(phys[0] ** 2 + phys[1] ** 2)))
        bmax = float(np.sqrt(np.max(phys[2] ** 2 + phys[3] ** 2)))
        return umax, bmax

    def check_cfl(self, umax: float, bmax: float) -> None:
        if not (math.isfinite(umax) and math.isfinite(bmax)):
            raise SolverError("non-finite field values detected")
        dt_max = cfl_limit(self.grid, umax, bmax)
        if self.options.dt > dt_max:
            raise CFLError(
                f"dt = {self.options.dt:g} violates the CFL bound; admissible dt <= {dt_max:.6g}", dt_max
            )

    def step(self, z: np.ndarray) -> np.ndarray:
        u = np.ascontiguousarray(z[:2])
        b = np.ascontiguousarray(z[2:])
        h = self.options.dt
        if self.options.scheme == "IF-RK2":
            nu1, nb1 = self._n(u, b)
            speeds = self.last_speeds if self.options.nonlinear else self.speeds(z)
            self.check_cfl(*speeds)
            us, bs = kernels.if_rk2_predict(self.Ep, self.Em, u, b, nu1, nb1, h)
            nu2, nb2 = self._n(us, bs)
            un, bn = kernels.if_rk2_correct(self.Ep, self.Em, u, b, nu1, nb1, nu2, nb2, h)
            return np.concatenate([un, bn])
        return self._step_rk4(u, b, h)

    def _step_rk4(self, u, b, h):
        Ep, Em, Ep2, Em2 = self.Ep, self.Em, self.Ep2, self.Em2

        def N(zp, zm):
            nu, nb = self._n(np.ascontiguousarray(0.5 * (zp + zm)), np.ascontiguousarray(0.5 * (zp - zm)))
            return nu + nb, nu - nb

        zp, zm = u + b, u - b
        ap, am = N(zp, zm)
        speeds = self.last_speeds if self.options.nonlinear else self.speeds(np.concatenate([u, b]))
        self.check_cfl(*speeds)
        bp, bm = N(Ep2 * (zp + 0.5 * h * ap), Em2 * (zm + 0.5 * h * am))
        cp, cm = N(Ep2 * zp + 0.5 * h * bp, Em2 * zm + 0.5 * h * bm)
        dp, dm = N(Ep * zp + h * Ep2 * cp, Em * zm + h * Em2 * cm)
        zp = Ep * zp + (h / 6.0) * (Ep * ap + 2.0 * Ep2 * (bp + cp) + dp)
        zm = Em * zm + (h / 6.0) * (Em * am + 2.0 * Em2 * (bm + cm) + dm)
        return np.concatenate([0.5 * (zp + zm), 0.5 * (zp - zm)])


_INTEGRATORS: dict = {}


def integrator(grid: Grid, options: SolverOptions) -> Integrator:
    key = (grid, replace(options, t_end=0.0))
    it = _INTEGRATORS.get(key)
    if it is None:
        if len(_INTEGRATORS) > 16:
            _INTEGRATORS.clear()
        it = _INTEGRATORS[key] = Integrator(grid, options)
    return it


def _to_vector_pair(grid: Grid, z: np.ndarray) -> tuple[VectorField, VectorField]:
    full = full_from_half(z, grid.n)
    return VectorField.from_coeffs(grid, full[:2]), VectorField.from_coeffs(grid, full[2:])


def rhs(state: MHDState, *, dealias: bool = True, nonlinear: bool = True) -> tuple[VectorField, VectorField]:
    """(du/dt, db/dt) of the perturbation system at ``state``."""
    opts = SolverOptions(dt=1.0, dealias=dealias, nonlinear=nonlinear)
    z = integrator(state.grid, opts).rhs(state.to_half())
    return _to_vector_pair(state.grid, z)


def regularized_rhs(state: MHDState, eps_reg: float, *, dealias: bool = True) -> tuple[VectorField, VectorField]:
    """(du/dt, db/dt) of the mollified system with every term wrapped in P J_eps."""
    mollifier_symbol(state.grid, eps_reg)  # validates eps_reg against the box
    opts = SolverOptions(dt=1.0, mode="regularized", eps_reg=eps_reg, dealias=dealias)
    z = integrator(state.grid, opts).rhs(state.to_half())
    return _to_vector_pair(state.grid, z)


def advective_terms(state: MHDState) -> dict[str, VectorField]:
    """u.grad u, b.grad b, u.grad b, b.grad u in advective form, each product dealiased.

    An independent route to the nonlinear terms (no divergence-form identities).
    """
    g = state.grid
    mask = g.dealias_mask
    u = state.u.to_physical()
    b = state.b.to_physical()
    grads = {}
    for name, v in (("u", state.u), ("b", state.b)):
        grads[name] = [[g.ifft(1j * xi * c.coeffs * g.nyquist_free).real for xi in (g.xi1, g.xi2)] for c in v]

    def adv(a, name):
        gr = grads[name]
        comps = [a[0] * gr[i][0] + a[1] * gr[i][1] for i in range(2)]
        return VectorField.from_coeffs(g, np.stack([g.fft(c) * mask for c in comps]))

    return {
        "u.grad u": adv(u, "u"),
        "b.grad b": adv(b, "b"),
        "u.grad b": adv(u, "b"),
        "b.grad u": adv(b, "u"),
    }


def step(state: MHDState, options: SolverOptions) -> MHDState:
    """Advance one step of size options.dt."""
    it = integrator(state.grid, options)
    z = it.step(state.to_half())
    if not np.all(np.isfinite(z)):
        raise SolverError("NaN/Inf produced by the step", state=state)
    return MHDState.from_half(state.grid, z, state.time + options.dt)


def pressure_recover(state: MHDState) -> SpectralField:
    """Zero-mean pressure from -Lap p = div(u.grad u - b.grad b)."""
    g = state.grid
    nu_opts = SolverOptions(dt=1.0)
    it = integrator(g, nu_opts)
    z = state.to_half()
    u, b = np.ascontiguousarray(z[:2]), np.ascontiguousarray(z[2:])
    phys = g.irfft(np.concatenate([u, b]))
    t11, t12, t22, _, _, _ = kernels.stress(np.ascontiguousarray(phys[:2]), np.ascontiguousarray(phys[2:]))
    th = g.rfft(np.stack([t11, t12, t22])) * it.filt
    # G = div(b(x)b - u(x)u); p_hat = -i xi . G_hat / |xi|^2 = (xi_i xi_j T_ij) / |xi|^2
    xi1, xi2 = it.xi1, it.xi2
    p = (xi1 * xi1 * th[0] + 2.0 * xi1 * xi2 * th[1] + xi2 * xi2 * th[2]) * it.inv
    p = p.astype(complex)
    p[0, 0] = 0.0
    return SpectralField(g, full_from_half(p, g.n))


def unprojected_momentum_rhs(state: MHDState) -> VectorField:
    """Lap u + d1 b + b.grad b - u.grad u without the pressure gradient."""
    g = state.grid
    it = integrator(g, SolverOptions(dt=1.0))
    z = state.to_half()
    u, b = np.ascontiguousarray(z[:2]), np.ascontiguousarray(z[2:])
    phys = g.irfft(np.concatenate([u, b]))
    t11, t12, t22, _, _, _ = kernels.stress(np.ascontiguousarray(phys[:2]), np.ascontiguousarray(phys[2:]))
    th = g.rfft(np.stack([t11, t12, t22])) * it.filt
    f1 = 1j * (it.xi1 * th[0] + it.xi2 * th[1])
    f2 = 1j * (it.xi1 * th[1] + it.xi2 * th[2])
    du = it.lap * u + it.d1 * b + np.stack([f1, f2])
    return VectorField.from_coeffs(g, full_from_half(du, g.n))


# -- trajectories ----------------------------------------------------------------


@dataclass
class Trajectory:
    states: list[MHDState] = field(default_factory=list)
    records: list[DiagnosticsRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    @property
    def l2_norms(self) -> np.ndarray:
        """||(u, b)||_{L2} per record."""
        return np.array([math.sqrt(r.energy) for r in self.records])

    @property
    def final(self) -> MHDState:
        return self.states[-1]


def physics_hash(config) -> str:
    """Hash of everything that determines the computed states (not t_end or output)."""
    text = config.serialize(for_hash=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def run(config, *, restart: str | Path | None = None, out_dir: str | Path | None = None,
        callback: Callable[[int, np.ndarray], None] | None = None,
        initial_state: MHDState | None = None) -> Trajectory:
    """Integrate ``config`` (a SimConfig) from its initial condition or from a checkpoint.

    Records are emitted every ``diagnostics.cadence`` steps and at the final step; states
    are kept every ``diagnostics.state_every`` records plus the first and last. With an output
    directory the CSV, a final snapshot and checkpoints are written; on failure the partial
    trajectory is flushed before the error propagates.
    """
    from mhd2d.ic import make_ic
    from mhd2d.snapshot import read_snapshot

    grid = config.grid
    opts = config.solver
    diag = config.diagnostics
    weights = RecordWeights(grid, diag.s, diag.epsilon, diag.C1)
    it = integrator(grid, opts)
    n_total = opts.n_steps
    phash = physics_hash(config)
    out = Path(out_dir) if out_dir is not None else (Path(config.output.directory) if config.output.directory else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if restart is not None:
        snap = read_snapshot(restart)
        if snap.meta is None or snap.spectral is None:
            raise SolverError(f"{restart} is a plain snapshot, not a checkpoint")
        if snap.meta.get("physics_hash") != phash:
            raise SolverError("checkpoint was produced by a different configuration")
        if snap.grid != grid:
            raise SolverError("checkpoint grid does not match the configuration")
        z = snap.spectral.copy()
        k0 = int(snap.meta["step"])
        cum = float(snap.meta["cumulative_dissipation"])
        e0 = float(snap.meta["e0"])
        d_prev = weights.dissipation(z)
    else:
        state0 = initial_state if initial_state is not None else make_ic(config.ic, grid)
        z = state0.to_half()
        k0 = 0
        cum = 0.0
        e0 = weights.energy(z)
        d_prev = weights.dissipation(z)

    traj = Trajectory(meta={
        "config_hash": config.hash(), "physics_hash": phash, "s": diag.s,
        "epsilon": diag.epsilon, "C1": diag.C1, "n": grid.n, "L": grid.box_length,
        "dt": opts.dt, "scheme": opts.scheme, "mode": opts.mode, "kernels": kernels.BACKEND,
    })

    def sample(k: int, z: np.ndarray, keep_state: bool) -> None:
        t = k * opts.dt
        traj.records.append(weights.record(z, t, cum, e0))
        if keep_state:
            traj.states.append(MHDState.from_half(grid, z, t))

    formats = set(getattr(config.output, "formats", ("csv", "snapshot", "checkpoint")))

    def checkpoint(k: int, z: np.ndarray, name: str) -> None:
        if out is None or "checkpoint" not in formats:
            return
        t = k * opts.dt
        meta = {
            "step": k, "time": t, "dt": opts.dt, "scheme": opts.scheme, "mode": opts.mode,
            "eps_reg": opts.eps_reg, "physics_hash": phash, "config_hash": config.hash(),
            "cumulative_dissipation": cum, "e0": e0, "fields": ["u1", "u2", "b1", "b2"],
        }
        write_checkpoint(out / name, grid, t, grid.irfft(z), meta, z)

    def flush() -> None:
        if out is None or "csv" not in formats:
            return
        write_csv(out / "diagnostics.csv", traj.records, config_hash=config.hash(), n=grid.n,
                  L=repr(grid.box_length), C1=repr(diag.C1), s=repr(diag.s), epsilon=repr(diag.epsilon))

    state_every = max(1, diag.state_every)
    n_rec = 0
    sample(k0, z, True)
    n_rec += 1
    last = z
    try:
        for k in range(k0 + 1, n_total + 1):
            znew = it.step(z)
            if not np.all(np.isfinite(znew)):
                raise SolverError(
                    f"NaN/Inf at step {k} (t = {k * opts.dt:g})",
                    state=MHDState.from_half(grid, z, (k - 1) * opts.dt),
                )
            z = znew
            d_new = weights.dissipation(z)
            cum += 0.5 * opts.dt * (d_prev + d_new)
            d_prev = d_new
            if callback is not None:
                callback(k, z)
            final = k == n_total
            if final or k % diag.cadence == 0:
                keep = final or n_rec % state_every == 0
                sample(k, z, keep)
                n_rec += 1
            if config.output.checkpoint_every and k % config.output.checkpoint_every == 0 and not final:
                checkpoint(k, z, f"checkpoint_{k:08d}.mhd2")
            last = z
    except SolverError as exc:
        exc.trajectory = traj
        if out is not None:
            flush()
            if exc.state is not None:
                write_snapshot(out / "abort_state.mhd2", grid, exc.state.time, exc.state.physical())
        raise
    if out is not None:
        flush()
        checkpoint(n_total, last, "checkpoint_final.mhd2")
        if "snapshot" in formats:
            write_snapshot(out / "final.mhd2", grid, n_total * opts.dt, grid.irfft(last))
    return traj
