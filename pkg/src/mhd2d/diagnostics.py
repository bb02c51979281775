"""Norm ledgers, energy balance and low-frequency decay analysis."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Sequence

import numpy as np

from mhd2d import kernels
from mhd2d.spectral import Grid
from mhd2d.state import MHDState

CSV_COLUMNS = (
    "time",
    "l2_u",
    "l2_b",
    "grad_l2_u",
    "grad_l2_b",
    "hs",
    "hdot_neg",
    "low_freq_energy",
    "g_value",
    "energy_residual",
)
CSV_VERSION = 1


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    l2_u: float
    l2_b: float
    grad_l2_u: float
    grad_l2_b: float
    hs_norm: float
    hdot_neg: float
    low_freq_energy: float
    g_value: float
    cumulative_dissipation: float = 0.0
    energy_residual: float = 0.0
    low_freq_modes: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"{f.name} is not finite ({v})")
            if f.name != "energy_residual" and v < 0:
                raise ValueError(f"{f.name} must be nonnegative ({v})")

    @property
    def energy(self) -> float:
        """||u||^2 + ||b||^2."""
        return self.l2_u**2 + self.l2_b**2

    @property
    def dissipation(self) -> float:
        """||grad u||^2 + ||grad b||^2."""
        return self.grad_l2_u**2 + self.grad_l2_b**2

    def csv_row(self) -> list[float]:
        return [
            self.time, self.l2_u, self.l2_b, self.grad_l2_u, self.grad_l2_b,
            self.hs_norm, self.hdot_neg, self.low_freq_energy, self.g_value, self.energy_residual,
        ]


@dataclass(frozen=True)
class DecayFit:
    kappa_hat: float
    window: tuple[float, float]
    residual: float
    saturated: bool
    samples: int = 0
    constant: float = 1.0

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValueError("window must satisfy t0 < t1")
        if not np.isfinite(self.kappa_hat):
            raise ValueError("kappa_hat is not finite")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def g_value(t) -> np.ndarray | float:
    """Splitting radius g(t) with g^2 = 3 / ((e + t) ln(e + t))."""
    t = np.asarray(t, dtype=float)
    out = np.sqrt(3.0 / ((np.e + t) * np.log(np.e + t)))
    return float(out) if out.ndim == 0 else out


def shell_radius(t: float, C1: float = 1.0) -> float:
    if C1 <= 0:
        raise ValueError("C1 must be positive")
    return g_value(t) / math.sqrt(C1)


def _shell_mask(ksq: np.ndarray, grid: Grid, radius: float) -> np.ndarray:
    # membership on exact integer |k|^2; ties (|xi| == radius) are inside
    thr = (radius / grid.dxi) ** 2
    return ksq <= thr * (1.0 + 1e-12)


class LowFreq(NamedTuple):
    energy: float
    modes: int
    saturated: bool


def low_freq_energy(state: MHDState, t: float | None = None, C1: float = 1.0) -> LowFreq:
    """Energy (L2-normalised) of (u, b) over the shell |xi| <= C1^(-1/2) g(t).

    ``modes`` counts nonzero wavevectors in the shell; ``saturated`` is set when there are none.
    """
    g = state.grid
    t = state.time if t is None else t
    inside = _shell_mask(g.ksq, g, shell_radius(t, C1))
    c = np.concatenate([state.u.coeffs, state.b.coeffs])
    e = g.area * float(np.sum(np.abs(c[:, inside]) ** 2))
    modes = int(np.count_nonzero(inside & (g.ksq > 0)))
    return LowFreq(e, modes, modes == 0)


class RecordWeights:
    """Precomputed half-spectrum weights for fast per-step diagnostics."""

    def __init__(self, grid: Grid, s: float = 2.5, eps: float = 0.3, C1: float = 1.0):
        self.grid, self.s, self.eps, self.C1 = grid, s, eps, C1
        w = grid.half_weights * grid.area
        xs = grid.xi_sq_half
        self.l2 = np.ascontiguousarray(w)
        self.grad = np.ascontiguousarray(w * xs)
        self.hs = np.ascontiguousarray(w * (1.0 + xs) ** s)
        hd = np.zeros_like(xs)
        nz = grid.ksq_half > 0
        hd[nz] = xs[nz] ** (-eps)
        self.hdot = np.ascontiguousarray(w * hd)

    def energy(self, z: np.ndarray) -> float:
        return kernels.weighted_sum(self.l2, z)

    def dissipation(self, z: np.ndarray) -> float:
        return kernels.weighted_sum(self.grad, z)

    def record(self, z: np.ndarray, time: float, cumulative: float = 0.0, e0: float | None = None) -> DiagnosticsRecord:
        """Record from stacked half spectra z = (u1, u2, b1, b2)."""
        z = np.ascontiguousarray(z)
        u, b = z[:2], z[2:]
        g = self.grid
        inside = _shell_mask(g.ksq_half, g, shell_radius(time, self.C1))
        lw = np.ascontiguousarray(self.l2 * inside)
        l2u, l2b = self.energy(u), self.energy(b)
        energy = l2u + l2b
        e0 = energy if e0 is None else e0
        return DiagnosticsRecord(
            time=float(time),
            l2_u=math.sqrt(l2u),
            l2_b=math.sqrt(l2b),
            grad_l2_u=math.sqrt(self.dissipation(u)),
            grad_l2_b=math.sqrt(self.dissipation(b)),
            hs_norm=math.sqrt(kernels.weighted_sum(self.hs, z)),
            hdot_neg=math.sqrt(kernels.weighted_sum(self.hdot, z)),
            low_freq_energy=kernels.weighted_sum(lw, z),
            g_value=g_value(time),
            cumulative_dissipation=float(cumulative),
            energy_residual=float(energy + 2.0 * cumulative - e0),
            low_freq_modes=int(np.count_nonzero(inside & (g.ksq_half > 0) & (g.k2_half > 0)) * 2
                               + np.count_nonzero(inside & (g.ksq_half > 0) & (g.k2_half == 0))),
        )


def record_for_state(state: MHDState, s: float = 2.5, eps: float = 0.3, C1: float = 1.0) -> DiagnosticsRecord:
    return RecordWeights(state.grid, s, eps, C1).record(state.to_half(), state.time)


def _records(traj) -> Sequence[DiagnosticsRecord]:
    return traj.records if hasattr(traj, "records") else traj


def energy_report(traj, quadrature: str = "samples") -> np.ndarray:
    """Residual E(t) + 2 int_0^t D - E(0) per sample, with E = ||u||^2 + ||b||^2 and
    D = ||grad u||^2 + ||grad b||^2.

    ``quadrature="samples"`` integrates D by the trapezoidal rule over the recorded samples;
    ``"steps"`` returns the ledger accumulated by the run at every time step.
    """
    recs = _records(traj)
    if not recs:
        return np.zeros(0)
    if quadrature == "steps":
        return np.array([r.energy_residual for r in recs])
    if quadrature != "samples":
        raise ValueError(f"quadrature must be 'samples' or 'steps', got {quadrature!r}")
    t = np.array([r.time for r in recs])
    e = np.array([r.energy for r in recs])
    d = np.array([r.dissipation for r in recs])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (d[1:] + d[:-1]))])
    return e + 2.0 * integral - e[0]


def _slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), float(coef[1]), rms


def fit_decay_exponent(times, norms, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares slope of log ||(u,b)|| against log(e + t) over ``window``.

    The default window is [t_end/4, 3 t_end/4]. ``saturated`` is set when the slopes of the
    two half-windows differ by more than 50% of the full-window slope.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and norms must be 1-D arrays of equal length")
    if window is None:
        window = (t[-1] / 4.0, 3.0 * t[-1] / 4.0)
    t0, t1 = float(window[0]), float(window[1])
    if not t0 < t1:
        raise ValueError("window must satisfy t0 < t1")
    if t0 < t[0] - 1e-12 or t1 > t[-1] + 1e-12:
        raise ValueError(f"window [{t0}, {t1}] outside the series range [{t[0]}, {t[-1]}]")
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    if np.count_nonzero(sel) < 8:
        raise ValueError(f"degenerate window: {np.count_nonzero(sel)} samples (< 8)")
    if np.any(y[sel] <= 0):
        raise ValueError("norms must be positive inside the window")
    x, ly = np.log(np.e + t[sel]), np.log(y[sel])
    slope, icpt, rms = _slope(x, ly)
    mid = 0.5 * (t0 + t1)
    ts = t[sel]
    lo, hi = ts <= mid, ts >= mid
    saturated = False
    if np.count_nonzero(lo) >= 2 and np.count_nonzero(hi) >= 2 and slope != 0:
        s_lo, _, _ = _slope(x[lo], ly[lo])
        s_hi, _, _ = _slope(x[hi], ly[hi])
        saturated = abs(s_hi - s_lo) > 0.5 * abs(slope)
    return DecayFit(-slope, (t0, t1), rms, bool(saturated), int(np.count_nonzero(sel)), float(np.exp(icpt)))


@dataclass(frozen=True)
class HsMonitor:
    s: float
    initial: float
    maximum: float
    series: np.ndarray

    @property
    def ratio(self) -> float:
        return self.maximum / self.initial if self.initial > 0 else 0.0

    @property
    def monotone_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.series) <= 1e-14 * max(self.initial, 1e-300)))


def hs_monitor(traj, s: float) -> HsMonitor:
    """Running maximum of ||(u, b)||_{H^s}; warns when it exceeds 10x its initial value."""
    if not s > 2:
        raise ValueError(f"s must exceed 2 for the H^s well-posedness setting, got {s}")
    meta = getattr(traj, "meta", {}) or {}
    recs = _records(traj)
    if recs and math.isclose(meta.get("s", float("nan")), s):
        series = np.array([r.hs_norm for r in recs])
    else:
        series = np.array([record_for_state(st, s=s).hs_norm for st in traj.states])
    if series.size == 0:
        return HsMonitor(s, 0.0, 0.0, series)
    h0, hmax = float(series[0]), float(np.max(series))
    if h0 > 0 and hmax > 10.0 * h0:
        warnings.warn(f"H^{s} norm grew to {hmax / h0:.2f}x its initial value", RuntimeWarning, stacklevel=2)
    return HsMonitor(s, h0, hmax, series)


def envelope_fit(times, values, exponent: float) -> tuple[float, float]:
    """Best constant C for values ~ C (1 + t)^(-exponent) in log space, and the rms log misfit."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    r = np.log(v) + exponent * np.log1p(t)
    c = float(np.mean(r))
    return math.exp(c), float(np.sqrt(np.mean((r - c) ** 2)))


@dataclass(frozen=True)
class LowFreqBound:
    times: np.ndarray
    lhs: np.ndarray
    data_term: np.ndarray
    nonlinear_term: np.ndarray
    ratio: np.ndarray
    included: np.ndarray
    max_ratio: float
    envelope_constant: float
    envelope_misfit: float

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "envelope_constant": self.envelope_constant,
            "envelope_misfit": self.envelope_misfit,
            "samples": int(np.count_nonzero(self.included)),
        }


def duhamel_lowfreq_bound(traj, eps: float, C1: float = 1.0, window: tuple[float, float] | None = None) -> LowFreqBound:
    """Compare the shell energy with (1+t)^(-2 kappa) + g^4(t) [int_0^t ||(u,b)||^2]^2.

    kappa = min(eps, 1/2). ``max_ratio`` is the largest LHS/RHS over unsaturated samples in the
    window; the envelope fit uses the data term alone with one constant.
    """
    recs = _records(traj)
    t = np.array([r.time for r in recs])
    meta = getattr(traj, "meta", {}) or {}
    if recs and math.isclose(meta.get("C1", float("nan")), C1):
        lhs = np.array([r.low_freq_energy for r in recs])
        modes = np.array([r.low_freq_modes for r in recs])
    else:
        lf = [low_freq_energy(st, st.time, C1) for st in traj.states]
        if len(lf) != len(recs):
            raise ValueError("trajectory states do not match its records; pass C1 used at run time")
        lhs = np.array([x.energy for x in lf])
        modes = np.array([x.modes for x in lf])
    kappa = min(eps, 0.5)
    energy = np.array([r.energy for r in recs])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (energy[1:] + energy[:-1]))])
    data = (1.0 + t) ** (-2.0 * kappa)
    nonlin = g_value(t) ** 4 * cum**2
    ratio = lhs / (data + nonlin)
    if window is None:
        window = (t[-1] / 4.0, 3.0 * t[-1] / 4.0) if t.size else (0.0, 0.0)
    included = (modes > 0) & (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    max_ratio = float(np.max(ratio[included])) if np.any(included) else 0.0
    pos = included & (lhs > 0)
    if np.count_nonzero(pos) >= 2:
        c, misfit = envelope_fit(t[pos], lhs[pos], 2.0 * kappa)
    else:
        c, misfit = 0.0, 0.0
    return LowFreqBound(t, lhs, data, nonlin, ratio, included, max_ratio, c, misfit)


def write_csv(path, records: Sequence[DiagnosticsRecord], **meta) -> None:
    """Write records in the fixed column order; ``meta`` (config hash, n, L, C1 ...) goes in a
    leading ``#`` comment line as key=value tokens."""
    tokens = " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w", newline="") as fh:
        fh.write(f"# mhd2d diagnostics v{CSV_VERSION} {tokens}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(float(x)) for x in r.csv_row()])


def read_csv(path) -> tuple[list[DiagnosticsRecord], dict]:
    """Read a diagnostics CSV; returns the records and the header metadata.

    Shell mode counts are rebuilt from ``n``, ``L`` and ``C1`` when the header carries them.
    """
    meta: dict = {}
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {header}")
    grid = None
    if "n" in meta and "L" in meta:
        grid = Grid(int(meta["n"]), float(meta["L"]))
    C1 = float(meta.get("C1", 1.0))
    rows = []
    for row in reader:
        if not row:
            continue
        v = [float(x) for x in row]
        if grid is not None:
            inside = _shell_mask(grid.ksq, grid, shell_radius(v[0], C1))
            modes = int(np.count_nonzero(inside & (grid.ksq > 0)))
        else:
            modes = 1 if v[7] > 0 else 0
        rows.append(
            DiagnosticsRecord(
                time=v[0], l2_u=v[1], l2_b=v[2], grad_l2_u=v[3], grad_l2_b=v[4], hs_norm=v[5],
                hdot_neg=v[6], low_freq_energy=v[7], g_value=v[8], energy_residual=v[9],
                low_freq_modes=modes,
            )
        )
    return rows, meta
