"""Command-line front end: ``mhd2d {run, diag, ineq, ic, convergence}``.

Every command prints a JSON report on stdout (suppressed by ``--quiet``) and, with
``--out``, also writes it to ``<out>/<command>_report.json``. The exit status is 0 only
when every configured check passes; failures also return a JSON report listing them.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from functools import partial
from pathlib import Path

import numpy as np

from mhd2d import __version__

REPORT_SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

log = logging.getLogger("mhd2d")


class _Failure(Exception):
    def __init__(self, kind: str, message: str, **details):
        super().__init__(message)
        self.kind = kind
        self.details = details


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _load(args):
    from mhd2d.config import MINIMAL, load_config, parse_config

    cfg = load_config(args.config) if args.config else parse_config(MINIMAL)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = cfg.with_output(args.out)
    return cfg


def _check(checks: list, name: str, value, ok: bool, limit=None) -> None:
    checks.append({"name": name, "value": value, "limit": limit, "passed": bool(ok)})


# -- commands ---------------------------------------------------------------------------


def cmd_run(args) -> dict:
    from mhd2d.diagnostics import energy_report, fit_decay_exponent, hs_monitor
    from mhd2d.solver import run
    from mhd2d.studies import exact_error

    cfg = _load(args)
    traj = run(cfg, restart=args.restart)
    a = cfg.assertions
    recs = traj.records
    e0 = recs[0].energy if recs else 0.0
    checks: list = []
    _check(checks, "finite", True, all(math.isfinite(r.energy) for r in recs))
    if a.energy_residual_max is not None:
        res = energy_report(traj, quadrature="steps")
        rel = float(np.max(np.abs(res))) / e0 if e0 > 0 else 0.0
        _check(checks, "energy_residual", rel, rel < a.energy_residual_max, a.energy_residual_max)
    if a.hs_growth_max is not None:
        mon = hs_monitor(traj, cfg.diagnostics.s)
        _check(checks, "hs_growth", mon.ratio, mon.ratio < a.hs_growth_max, a.hs_growth_max)
    if a.exact_error_max is not None:
        err = exact_error(cfg.ic.kind, traj.final, cfg.ic.amplitude, cfg.ic.mode)
        if err is None:
            raise _Failure("config", f"no closed-form solution for ic kind {cfg.ic.kind!r}")
        _check(checks, "exact_error", err, err < a.exact_error_max, a.exact_error_max)
    if a.kappa is not None:
        fit = fit_decay_exponent(traj.times, traj.l2_norms, cfg.fit_window())
        _check(checks, "kappa", fit.kappa_hat, abs(fit.kappa_hat - a.kappa) <= a.kappa_tol,
               [a.kappa - a.kappa_tol, a.kappa + a.kappa_tol])
    last = recs[-1]
    return {
        "command": "run",
        "config_hash": cfg.hash(),
        "seed": cfg.ic.seed,
        "out": cfg.output.directory or None,
        "records": len(recs),
        "final": {"time": last.time, "l2_u": last.l2_u, "l2_b": last.l2_b, "hs": last.hs_norm,
                  "energy_residual": last.energy_residual},
        "checks": checks,
    }


def cmd_diag(args) -> dict:
    from mhd2d.diagnostics import duhamel_lowfreq_bound, fit_decay_exponent, read_csv

    path = Path(args.csv)
    if path.is_dir():
        path = path / "diagnostics.csv"
    records, meta = read_csv(path)
    times = np.array([r.time for r in records])
    norms = np.sqrt(np.array([r.l2_u**2 + r.l2_b**2 for r in records]))
    window = tuple(args.window) if args.window else None
    fit = fit_decay_exponent(times, norms, window)
    eps = args.epsilon if args.epsilon is not None else float(meta.get("epsilon", 0.3))
    C1 = float(meta.get("C1", 1.0))
    checks: list = []
    report = {"command": "diag", "csv": str(path), "config_hash": meta.get("config_hash"),
              "decay_fit": fit.to_dict()}
    if "n" in meta and "L" in meta:
        lf = duhamel_lowfreq_bound(_RecordSeries(records, meta), eps, C1, fit.window)
        report["low_frequency"] = lf.to_dict()
    if args.kappa is not None:
        _check(checks, "kappa", fit.kappa_hat, abs(fit.kappa_hat - args.kappa) <= args.tol,
               [args.kappa - args.tol, args.kappa + args.tol])
    report["checks"] = checks
    return report


class _RecordSeries:
    """Minimal trajectory view over records read back from CSV."""

    def __init__(self, records, meta):
        self.records = records
        self.states = []
        self.meta = {"C1": float(meta.get("C1", "nan"))}


def cmd_ineq(args) -> dict:
    from mhd2d.ineq import SUITES, CorpusSpec, resolution_stability, run_suite

    suites = SUITES if args.suite == "all" else (args.suite,)
    seed = args.seed if args.seed is not None else 0
    spec = CorpusSpec(size=args.size, seed=seed, n=args.n, zero_every=10)
    reports, checks = [], []
    for name in suites:
        fn = partial(run_suite, name, s=args.s, p=args.p, q=args.q, scales=tuple(args.scales))
        if args.stability:
            resolutions = (args.n, 2 * args.n)
            stab = resolution_stability(fn, spec, resolutions)
            for st in stab:
                _check(checks, f"{st.name}_resolution_stable", st.growth, st.stable, [0.5, 2.0])
            reports.extend(r.to_dict() for r in fn(spec))
        else:
            for r in fn(spec):
                reports.append(r.to_dict())
                _check(checks, f"{r.name}_finite", r.max_ratio, math.isfinite(r.max_ratio))
        if name == "gn" and args.q == 2:
            top = reports[-1]["max_ratio"]
            _check(checks, "gn_q2_equality", top, abs(top - 1.0) <= 1e-10, [1 - 1e-10, 1 + 1e-10])
    return {"command": "ineq", "corpus": {"size": spec.size, "seed": spec.seed, "n": spec.n,
                                          "bandlimit": spec.bandlimit},
            "reports": reports, "checks": checks}


def cmd_ic(args) -> dict:
    from mhd2d.ic import ic_report, make_ic
    from mhd2d.snapshot import write_state

    cfg = _load(args)
    state = make_ic(cfg.ic, cfg.grid)
    rep = ic_report(state, cfg.diagnostics.epsilon, cfg.diagnostics.s)
    out = None
    if cfg.output.directory:
        d = Path(cfg.output.directory)
        d.mkdir(parents=True, exist_ok=True)
        out = str(write_state(d / "ic.mhd2", state))
    checks: list = []
    _check(checks, "finite_norms", rep, all(math.isfinite(v) for v in rep.values()))
    return {"command": "ic", "config_hash": cfg.hash(), "seed": cfg.ic.seed, "kind": cfg.ic.kind,
            "alpha_low": cfg.ic.alpha_low, "norms": rep, "snapshot": out, "checks": checks}


def cmd_convergence(args) -> dict:
    from mhd2d.ic import make_ic
    from mhd2d.studies import dt_refinement, regularization_convergence

    cfg = _load(args)
    state = make_ic(cfg.ic, cfg.grid)
    report: dict = {"command": "convergence", "config_hash": cfg.hash(), "seed": cfg.ic.seed}
    checks: list = []
    if args.study in ("eps", "all"):
        reg = regularization_convergence(state, args.t, tuple(args.eps), cfg.solver.dt)
        report["regularization"] = {"eps": reg.eps, "errors": reg.errors, "order": reg.order,
                                    "monotone": reg.monotone}
        _check(checks, "regularization_order", reg.order, reg.order >= 1.0 and reg.monotone, 1.0)
    if args.study in ("dt", "all"):
        dts = tuple(args.dts) if args.dts else tuple(cfg.solver.dt * 2.0**-k for k in range(-1, 2))
        st = dt_refinement(state, args.t_energy, dts, cfg.solver.scheme)
        report["energy"] = {"dts": st.dts, "residuals": st.residuals, "order": st.order}
        _check(checks, "energy_order", st.order, abs(st.order - 2.0) <= 0.3, [1.7, 2.3])
    report["checks"] = checks
    return report


# -- entry point --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--quiet", action="store_true", help="suppress the report on stdout")

    p = argparse.ArgumentParser(prog="mhd2d", description="2-D MHD perturbation solver and verification suite")
    p.add_argument("--version", action="version", version=f"mhd2d {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="integrate a configuration")
    r.add_argument("--restart", metavar="CHECKPOINT", help="resume from a checkpoint file")

    d = sub.add_parser("diag", parents=[common], help="analyse a diagnostics CSV")
    d.add_argument("csv", help="diagnostics.csv or a run directory")
    d.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"), help="fit window (default: middle half of the series)")
    d.add_argument("--epsilon", type=float, help="negative Sobolev order of the data")
    d.add_argument("--kappa", type=float, help="expected decay exponent")
    d.add_argument("--tol", type=float, default=0.05, help="allowed |kappa_hat - kappa|")

    i = sub.add_parser("ineq", parents=[common], help="run inequality suites")
    i.add_argument("--suite", default="all", choices=("all", "calculus", "log_sobolev", "gn", "gn_sup"),
                   help="which estimates to sample")
    i.add_argument("--n", type=int, default=128, help="grid resolution")
    i.add_argument("--size", type=int, default=120, help="corpus size")
    i.add_argument("--s", type=float, default=2.5, help="Sobolev order for the calculus suite")
    i.add_argument("--p", type=float, default=4.0, help="Lebesgue exponent for the log-Sobolev suite")
    i.add_argument("--q", type=float, default=4.0, help="Lebesgue exponent for the GN suite")
    i.add_argument("--scales", type=float, nargs="+", default=[1.0], help="amplitude scales for the log-Sobolev suite")
    i.add_argument("--stability", action="store_true", help="also compare against resolution 2n")

    sub.add_parser("ic", parents=[common], help="generate and inspect an initial condition")

    c = sub.add_parser("convergence", parents=[common], help="eps_reg and dt refinement studies")
    c.add_argument("--study", default="all", choices=("all", "eps", "dt"), help="which refinement to run")
    c.add_argument("--t", type=float, default=0.5, help="comparison time for the eps study")
    c.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05], help="regularization scales")
    c.add_argument("--t-energy", dest="t_energy", type=float, default=1.0, help="end time for the dt study")
    c.add_argument("--dts", type=float, nargs="+", help="time steps (default: 2 dt, dt, dt/2 from the config)")
    return p


COMMANDS = {"run": cmd_run, "diag": cmd_diag, "ineq": cmd_ineq, "ic": cmd_ic, "convergence": cmd_convergence}


def dispatch(command: str, args: argparse.Namespace) -> tuple[int, dict]:
    """Run ``command``; returns (exit status, report)."""
    from mhd2d.config import ConfigError
    from mhd2d.solver import SolverError

    try:
        report = COMMANDS[command](args)
    except ConfigError as exc:
        return EXIT_ERROR, {"command": command, "error": {"kind": "config", "messages": exc.errors}}
    except SolverError as exc:
        return EXIT_FAIL, {"command": command, "error": {"kind": "solver", "messages": [str(exc)]}}
    except _Failure as exc:
        return EXIT_ERROR, {"command": command, "error": {"kind": exc.kind, "messages": [str(exc)], **exc.details}}
    except (OSError, ValueError) as exc:
        return EXIT_ERROR, {"command": command, "error": {"kind": type(exc).__name__, "messages": [str(exc)]}}
    failed = [c["name"] for c in report.get("checks", []) if not c["passed"]]
    report["passed"] = not failed
    if failed:
        report["failed"] = failed
    return (EXIT_OK if not failed else EXIT_FAIL), report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    status, report = dispatch(args.command, args)
    report = {"schema_version": REPORT_SCHEMA, **_jsonable(report)}
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}_report.json").write_text(text + "\n")
    if not args.quiet:
        print(text)
    elif status != EXIT_OK:
        print(text, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
