"""Experiment configuration: an INI-style key-value grammar parsed into ``SimConfig``.

Grammar (sections and keys; every key is optional except where noted)::

    [mhd2d]
    version = 1                       ; schema version (required)

    [grid]
    n = 128                           ; even, >= 8
    L = 2*pi                          ; box side; a number, "pi" or "<number>*pi"

    [ic]
    kind = random_spectrum            ; zero | shear | elsasser_aligned | single_mode | random_spectrum
    amplitude = 0.01
    seed = 0
    alpha_low = auto                  ; number, or auto = slope matched to diagnostics.epsilon
    r_high = 3
    k_cross = 1
    mode = 1, 1                       ; integer wavevector for shear / single_mode

    [solver]
    dt = 0.001
    t_end = 1
    scheme = IF-RK2                   ; IF-RK2 | IF-RK4
    mode = exact                      ; exact | regularized
    eps_reg = none
    dealias = true
    nonlinear = true

    [diagnostics]
    cadence = 10                      ; steps between records
    state_every = 1                   ; records between retained states
    s = 2.5                           ; Sobolev order, must exceed 2
    epsilon = 0.3                     ; negative Sobolev order, in (0, 1)
    C1 = 1
    fit_window = auto                 ; auto = [t_end/4, 3 t_end/4], or "t0, t1"

    [output]
    directory =                       ; empty = no files
    checkpoint_every = 0              ; steps; 0 disables intermediate checkpoints
    formats = csv, snapshot, checkpoint

    [assertions]                      ; checked by the run command; omitted = not checked
    energy_residual_max = 1e-6        ; max |residual| / E(0)
    hs_growth_max = 2                 ; max H^s norm over initial
    exact_error_max = 1e-8            ; Linf error against the closed form (shear, elsasser_aligned)
    kappa = 0.3                       ; expected decay exponent ...
    kappa_tol = 0.05                  ; ... and absolute tolerance

Inline comments start with ";" or "#".
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field, fields, replace

from mhd2d.ic import KINDS, ICSpec, alpha_for_epsilon
from mhd2d.solver import MODES, SCHEMES, SolverOptions
from mhd2d.spectral import Grid

SCHEMA_VERSION = 1
FORMATS = ("csv", "snapshot", "checkpoint")


class ConfigError(ValueError):
    """Every violation found in a configuration, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class DiagnosticsConfig:
    cadence: int = 10
    state_every: int = 1
    s: float = 2.5
    epsilon: float = 0.3
    C1: float = 1.0
    fit_window: tuple[float, float] | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = ""
    checkpoint_every: int = 0
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class AssertionsConfig:
    energy_residual_max: float | None = None
    hs_growth_max: float | None = None
    exact_error_max: float | None = None
    kappa: float | None = None
    kappa_tol: float | None = None

    def active(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}


@dataclass(frozen=True)
class SimConfig:
    grid: Grid
    ic: ICSpec
    solver: SolverOptions
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    assertions: AssertionsConfig = field(default_factory=AssertionsConfig)
    alpha_auto: bool = False

    def serialize(self, for_hash: bool = False) -> str:
        """Canonical text; ``parse_config(serialize())`` reproduces this config.

        ``for_hash`` keeps only what determines the computed states (grid, ic, solver
        without t_end), so runs of different length share a physics hash.
        """
        g, ic, so, d, o, a = self.grid, self.ic, self.solver, self.diagnostics, self.output, self.assertions
        lines = ["[mhd2d]", f"version = {SCHEMA_VERSION}", "", "[grid]", f"n = {g.n}", f"L = {g.box_length!r}", ""]
        alpha = "auto" if self.alpha_auto and not for_hash else repr(float(ic.alpha_low))
        lines += [
            "[ic]", f"kind = {ic.kind}", f"amplitude = {ic.amplitude!r}", f"seed = {ic.seed}",
            f"alpha_low = {alpha}", f"r_high = {ic.r_high!r}", f"k_cross = {ic.k_cross!r}",
            f"mode = {ic.mode[0]}, {ic.mode[1]}", "",
            "[solver]", f"dt = {so.dt!r}",
        ]
        if not for_hash:
            lines.append(f"t_end = {so.t_end!r}")
        lines += [
            f"scheme = {so.scheme}", f"mode = {so.mode}",
            f"eps_reg = {'none' if so.eps_reg is None else repr(so.eps_reg)}",
            f"dealias = {str(so.dealias).lower()}", f"nonlinear = {str(so.nonlinear).lower()}", "",
        ]
        if for_hash:
            return "\n".join(lines)
        window = "auto" if d.fit_window is None else f"{d.fit_window[0]!r}, {d.fit_window[1]!r}"
        lines += [
            "[diagnostics]", f"cadence = {d.cadence}", f"state_every = {d.state_every}", f"s = {d.s!r}",
            f"epsilon = {d.epsilon!r}", f"C1 = {d.C1!r}", f"fit_window = {window}", "",
            "[output]", f"directory = {o.directory}", f"checkpoint_every = {o.checkpoint_every}",
            f"formats = {', '.join(o.formats)}", "",
            "[assertions]",
        ]
        lines += [f"{k} = {v!r}" for k, v in a.active().items()]
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()[:16]

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, ic=replace(self.ic, seed=int(seed)))

    def with_output(self, directory: str) -> "SimConfig":
        return replace(self, output=replace(self.output, directory=str(directory)))

    def fit_window(self) -> tuple[float, float]:
        if self.diagnostics.fit_window is not None:
            return self.diagnostics.fit_window
        t = self.solver.t_end
        return (t / 4, 3 * t / 4)


# -- parsing --------------------------------------------------------------------------

_PI = re.compile(r"^\s*(?:([-+0-9.eE]+)\s*\*?\s*)?pi\s*$", re.IGNORECASE)

SCHEMA = {
    "mhd2d": {"version"},
    "grid": {"n", "L"},
    "ic": {"kind", "amplitude", "seed", "alpha_low", "r_high", "k_cross", "mode"},
    "solver": {"dt", "t_end", "scheme", "mode", "eps_reg", "dealias", "nonlinear"},
    "diagnostics": {"cadence", "state_every", "s", "epsilon", "C1", "fit_window"},
    "output": {"directory", "checkpoint_every", "formats"},
    "assertions": {f.name for f in fields(AssertionsConfig)},
}


def _number(text: str) -> float:
    m = _PI.match(text)
    if m:
        return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
    return float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp
        self.errors: list[str] = []

    def get(self, section, key, conv, default):
        if not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.errors.append(f"[{section}] {key} = {raw!r}: {exc}")
            return default

    def check(self, ok: bool, msg: str) -> None:
        if not ok:
            self.errors.append(msg)


def parse_config(text: str) -> SimConfig:
    """Validate ``text`` into a SimConfig; raise ConfigError listing every problem."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (C1)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    r = _Reader(cp)

    for sec in cp.sections():
        if sec not in SCHEMA:
            r.errors.append(f"unknown section [{sec}]")
            continue
        for key in cp.options(sec):
            if key not in SCHEMA[sec]:
                r.errors.append(f"unknown key {key!r} in [{sec}]")
    version = r.get("mhd2d", "version", int, None)
    if version is None and not any("mhd2d" in e for e in r.errors):
        r.errors.append("missing [mhd2d] version")
    elif version is not None and version != SCHEMA_VERSION:
        r.errors.append(f"unsupported config version {version} (expected {SCHEMA_VERSION})")

    # grid
    n = r.get("grid", "n", int, 128)
    L = r.get("grid", "L", _number, 2 * math.pi)
    r.check(n >= 8 and n % 2 == 0, f"[grid] n = {n}: must be even and >= 8")
    r.check(L > 0 and math.isfinite(L), f"[grid] L = {L}: must be positive")

    # diagnostics (epsilon feeds alpha_low = auto)
    d = DiagnosticsConfig()
    cadence = r.get("diagnostics", "cadence", int, d.cadence)
    state_every = r.get("diagnostics", "state_every", int, d.state_every)
    s = r.get("diagnostics", "s", float, d.s)
    eps = r.get("diagnostics", "epsilon", float, d.epsilon)
    C1 = r.get("diagnostics", "C1", float, d.C1)
    window_raw = r.get("diagnostics", "fit_window", str, "auto").strip()
    window = None
    if window_raw.lower() != "auto":
        try:
            parts = [float(p) for p in _list(window_raw)]
            if len(parts) != 2 or not 0 <= parts[0] < parts[1]:
                raise ValueError
            window = (parts[0], parts[1])
        except ValueError:
            r.errors.append(f"[diagnostics] fit_window = {window_raw!r}: expected 'auto' or 't0, t1' with 0 <= t0 < t1")
    r.check(cadence >= 1, f"[diagnostics] cadence = {cadence}: must be >= 1")
    r.check(state_every >= 1, f"[diagnostics] state_every = {state_every}: must be >= 1")
    r.check(s > 2, f"[diagnostics] s = {s}: the global well-posedness theorem assumes s > 2")
    r.check(0 < eps < 1, f"[diagnostics] epsilon = {eps}: the decay theorem assumes H^-eps data with 0 < epsilon < 1")
    r.check(C1 > 0, f"[diagnostics] C1 = {C1}: must be positive")

    # ic
    kind = r.get("ic", "kind", str, "random_spectrum").strip()
    r.check(kind in KINDS, f"[ic] kind = {kind!r}: expected one of {', '.join(KINDS)}")
    alpha_raw = r.get("ic", "alpha_low", str, "0").strip()
    alpha_auto = alpha_raw.lower() == "auto"
    alpha = 0.0
    if alpha_auto:
        alpha = alpha_for_epsilon(eps) if 0 < eps < 1 else 0.0
    else:
        try:
            alpha = float(alpha_raw)
        except ValueError:
            r.errors.append(f"[ic] alpha_low = {alpha_raw!r}: expected a number or 'auto'")
    mode_raw = r.get("ic", "mode", str, "1, 1")
    mode = (1, 1)
    try:
        parts = [int(p) for p in _list(mode_raw)]
        if len(parts) != 2:
            raise ValueError
        mode = (parts[0], parts[1])
    except ValueError:
        r.errors.append(f"[ic] mode = {mode_raw!r}: expected two integers 'k1, k2'")
    ic_kw = dict(
        kind=kind,
        amplitude=r.get("ic", "amplitude", float, 1e-2),
        seed=r.get("ic", "seed", int, 0),
        alpha_low=alpha,
        r_high=r.get("ic", "r_high", float, 3.0),
        k_cross=r.get("ic", "k_cross", float, 1.0),
        mode=mode,
    )

    # solver
    eps_reg_raw = r.get("solver", "eps_reg", str, "none").strip()
    eps_reg = None
    if eps_reg_raw.lower() not in ("none", ""):
        try:
            eps_reg = _number(eps_reg_raw)
        except ValueError:
            r.errors.append(f"[solver] eps_reg = {eps_reg_raw!r}: expected a number or 'none'")
    so_kw = dict(
        dt=r.get("solver", "dt", float, 1e-3),
        t_end=r.get("solver", "t_end", float, 1.0),
        scheme=r.get("solver", "scheme", str, "IF-RK2").strip(),
        mode=r.get("solver", "mode", str, "exact").strip(),
        eps_reg=eps_reg,
        dealias=r.get("solver", "dealias", _bool, True),
        nonlinear=r.get("solver", "nonlinear", _bool, True),
    )
    r.check(so_kw["scheme"] in SCHEMES, f"[solver] scheme = {so_kw['scheme']!r}: expected one of {', '.join(SCHEMES)}")
    r.check(so_kw["mode"] in MODES, f"[solver] mode = {so_kw['mode']!r}: expected one of {', '.join(MODES)}")
    if eps_reg is not None and L > 0:
        r.check(0 < eps_reg < L / 4, f"[solver] eps_reg = {eps_reg}: must lie in (0, L/4)")

    # output and assertions
    out_kw = dict(
        directory=r.get("output", "directory", str, "").strip(),
        checkpoint_every=r.get("output", "checkpoint_every", int, 0),
        formats=tuple(r.get("output", "formats", _list, list(FORMATS))),
    )
    r.check(out_kw["checkpoint_every"] >= 0, "[output] checkpoint_every must be >= 0")
    for fmt in out_kw["formats"]:
        r.check(fmt in FORMATS, f"[output] formats: unknown format {fmt!r} (expected {', '.join(FORMATS)})")
    as_kw = {}
    for f in fields(AssertionsConfig):
        v = r.get("assertions", f.name, float, None)
        if v is not None:
            r.check(v >= 0 if f.name == "kappa" else v > 0, f"[assertions] {f.name} = {v}: out of range")
        as_kw[f.name] = v
    r.check((as_kw["kappa"] is None) == (as_kw["kappa_tol"] is None),
            "[assertions] kappa and kappa_tol must be given together")

    # cross-object validation; constructors raise on violations we have not caught above
    objs = {}
    for name, build in (
        ("grid", lambda: Grid(n, L)),
        ("ic", lambda: ICSpec(**ic_kw)),
        ("solver", lambda: SolverOptions(**so_kw)),
    ):
        try:
            objs[name] = build()
        except (TypeError, ValueError) as exc:
            msg = f"[{name}] {exc}"
            if not any(str(exc) in e for e in r.errors):
                r.errors.append(msg)
    if "solver" in objs:
        try:
            objs["solver"].n_steps
        except ValueError as exc:
            r.errors.append(f"[solver] {exc}")
    if r.errors:
        raise ConfigError(r.errors)
    return SimConfig(
        grid=objs["grid"],
        ic=objs["ic"],
        solver=objs["solver"],
        diagnostics=DiagnosticsConfig(cadence, state_every, s, eps, C1, window),
        output=OutputConfig(**out_kw),
        assertions=AssertionsConfig(**as_kw),
        alpha_auto=alpha_auto,
    )


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


MINIMAL = "[mhd2d]\nversion = 1\n"
