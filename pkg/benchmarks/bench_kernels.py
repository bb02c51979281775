"""Compare the Cython and numpy kernel backends, per kernel and for a full IF-RK2 step.

    python3 benchmarks/bench_kernels.py --n 64 128 256 --repeat 50

Reports the best-of-repeat time per call in milliseconds and the speedup of the compiled
backend. Both backends are checked to agree before timing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from mhd2d import Grid, kernels, solver
from mhd2d.ic import ICSpec, make_ic
from mhd2d.solver import SolverOptions


def _inputs(n: int):
    grid = Grid(n)
    state = make_ic(ICSpec("random_spectrum", amplitude=1.0, seed=1), grid)
    it = solver.Integrator(grid, SolverOptions(dt=1e-3))
    z = state.to_half()
    u, b = np.ascontiguousarray(z[:2]), np.ascontiguousarray(z[2:])
    phys = grid.irfft(z)
    pu, pb = np.ascontiguousarray(phys[:2]), np.ascontiguousarray(phys[2:])
    nu, nb = it.nonlinear(u, b)
    t11, t12, t22, w, _, _ = kernels.stress(pu, pb)
    th = grid.rfft(np.stack([t11, t12, t22, w]))
    return grid, it, z, u, b, pu, pb, nu, nb, th


def _cases(mod, grid, it, u, b, pu, pb, nu, nb, th):
    h = it.options.dt
    return {
        "project": lambda: mod.project(it.xi1, it.xi2, it.inv, u),
        "stress": lambda: mod.stress(pu, pb),
        "assemble": lambda: mod.assemble(it.xi1, it.xi2, it.inv, it.filt, th[0], th[1], th[2], th[3], False),
        "if_rk2_predict": lambda: mod.if_rk2_predict(it.Ep, it.Em, u, b, nu, nb, h),
        "if_rk2_correct": lambda: mod.if_rk2_correct(it.Ep, it.Em, u, b, nu, nb, nu, nb, h),
        "weighted_sum": lambda: mod.weighted_sum(grid.half_weights, u),
    }


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def _step_time(mod, it, z, repeat: int) -> float:
    """Full step with the solver's kernel module temporarily bound to ``mod``."""
    saved = {name: getattr(kernels, name) for name in ("stress", "assemble", "if_rk2_predict", "if_rk2_correct")}
    try:
        for name in saved:
            setattr(kernels, name, getattr(mod, name))
        return _best(lambda: it.step(z), repeat)
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=30)
    args = ap.parse_args(argv)

    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled kernels unavailable; timing the numpy backend only")
    names = list(mods)
    print(f"{'n':>5} {'kernel':<16}" + "".join(f"{m + ' ms':>14}" for m in names) + ("   speedup" if len(names) > 1 else ""))
    for n in args.n:
        grid, it, z, u, b, pu, pb, nu, nb, th = _inputs(n)
        cases = {m: _cases(mods[m], grid, it, u, b, pu, pb, nu, nb, th) for m in names}
        for key in cases[names[0]]:
            outs = [cases[m][key]() for m in names]
            ref = outs[0] if isinstance(outs[0], tuple) else (outs[0],)
            for o in outs[1:]:
                for x, y in zip(ref, o if isinstance(o, tuple) else (o,)):
                    np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-14)
            times = [_best(cases[m][key], args.repeat) for m in names]
            speed = f"{times[0] / times[-1]:9.2f}x" if len(times) > 1 else ""
            print(f"{n:>5} {key:<16}" + "".join(f"{t:14.4f}" for t in times) + "  " + speed)
        times = [_step_time(mods[m], it, z, max(3, args.repeat // 5)) for m in names]
        speed = f"{times[0] / times[-1]:9.2f}x" if len(times) > 1 else ""
        print(f"{n:>5} {'full step':<16}" + "".join(f"{t:14.4f}" for t in times) + "  " + speed)


if __name__ == "__main__":
    main()
