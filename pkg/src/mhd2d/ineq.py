"""Empirical checks of the product, commutator, logarithmic Sobolev and Gagliardo-Nirenberg
inequalities on seeded corpora of band-limited random fields.

Each check evaluates LHS/RHS for every corpus entry and summarizes the ratios in an
``InequalityReport``. The constants in these inequalities are unspecified, so a check passes
when its largest ratio is finite and stays within a factor 2 when the grid is refined at
fixed corpus seeds (``resolution_stability``).

Corpus fields are drawn on a fixed auxiliary lattice and band-limited to |k_i| <= bandlimit,
so the same seed yields the same continuum field on every grid that resolves it.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from mhd2d.spectral import Grid, SpectralField, VectorField, fft_workers, lambda_s, norm

REPORT_SCHEMA_VERSION = 1
MIN_SAMPLES = 100
RESOLVED_TOL = 1e-8
QUANTILES = (0.5, 0.9, 0.99)
_LATTICE = 64  # auxiliary sampling lattice; must exceed 2 * bandlimit + 1


class UnresolvedFieldError(ValueError):
    """Input carries energy in the top third of the spectrum."""


@dataclass(frozen=True)
class InequalityReport:
    name: str
    samples: int
    max_ratio: float
    ratio_quantiles: tuple[float, ...]
    worst_case_seed: int | None
    trivial: int = 0
    quantile_levels: tuple[float, ...] = QUANTILES
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples < MIN_SAMPLES:
            raise ValueError(f"a report needs at least {MIN_SAMPLES} samples, got {self.samples}")
        if not math.isfinite(self.max_ratio):
            raise ValueError(f"{self.name}: max_ratio is not finite ({self.max_ratio})")

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "name": self.name,
            "samples": self.samples,
            "max_ratio": self.max_ratio,
            "quantiles": list(self.ratio_quantiles),
            "quantile_levels": list(self.quantile_levels),
            "worst_case_seed": self.worst_case_seed,
            "trivial": self.trivial,
            "params": dict(self.params),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "InequalityReport":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            name=d["name"],
            samples=int(d["samples"]),
            max_ratio=float(d["max_ratio"]),
            ratio_quantiles=tuple(float(q) for q in d["quantiles"]),
            worst_case_seed=d["worst_case_seed"],
            trivial=int(d.get("trivial", 0)),
            quantile_levels=tuple(d.get("quantile_levels", QUANTILES)),
            params=dict(d.get("params", {})),
        )


@dataclass(frozen=True)
class CorpusSpec:
    """Seeded corpus of band-limited random scalar fields.

    Entry i uses seed ``seed + i``. Smooth entries have Gaussian coefficients with
    |f_hat| ~ (1 + |xi|^2)^(-r/2), r cycling through ``orders``; every ``spiky_every``-th
    entry (0 disables) adds a single high mode of amplitude 10..1000 times the background.
    Fields are zero-mean with unit rms.
    """

    size: int = 120
    seed: int = 0
    n: int = 128
    box_length: float = 2 * math.pi
    bandlimit: int = 21
    orders: tuple[float, ...] = (2.0, 3.0, 4.0)
    spiky_every: int = 0
    zero_every: int = 0  # every k-th pair gets v = 0 (trivial entries)

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("corpus size must be positive")
        if not 1 <= self.bandlimit < min(self.n / 3, _LATTICE / 2 - 1):
            raise ValueError(
                f"bandlimit {self.bandlimit} must be below n/3 = {self.n / 3:.1f} and {_LATTICE // 2 - 1}"
            )
        object.__setattr__(self, "orders", tuple(float(r) for r in self.orders))

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.box_length)

    def entry_seed(self, i: int) -> int:
        return self.seed + i


def _lattice_coeffs(rng: np.random.Generator, r: float, box_length: float, K: int) -> np.ndarray:
    m = _LATTICE
    c = np.fft.fft2(rng.standard_normal((m, m))) / m**2
    k = np.fft.fftfreq(m, 1.0 / m)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    xi_sq = (2 * np.pi / box_length) ** 2 * (k1**2 + k2**2)
    c *= (1.0 + xi_sq) ** (-r / 2) * ((np.abs(k1) <= K) & (np.abs(k2) <= K))
    c[0, 0] = 0.0
    return c


def _embed(c: np.ndarray, grid: Grid, K: int) -> np.ndarray:
    m = c.shape[0]
    out = np.zeros((grid.n, grid.n), dtype=complex)
    idx = np.arange(-K, K + 1)
    out[np.ix_(idx % grid.n, idx % grid.n)] = c[np.ix_(idx % m, idx % m)]
    return out


def _normalized(grid: Grid, coeffs: np.ndarray) -> SpectralField:
    f = SpectralField(grid, coeffs)
    rms = norm(f) / grid.box_length
    if rms == 0:
        return f
    return f * (1.0 / rms)


def corpus_field(spec: CorpusSpec, i: int, stream: int = 0) -> SpectralField:
    """Entry ``i`` of the corpus; ``stream`` selects independent fields for the same entry."""
    rng = np.random.default_rng([spec.entry_seed(i), stream])
    r = spec.orders[i % len(spec.orders)]
    grid = spec.grid
    K = spec.bandlimit
    c = _lattice_coeffs(rng, r, spec.box_length, K)
    f = _normalized(grid, _embed(c, grid, K))
    if spec.spiky_every and i % spec.spiky_every == spec.spiky_every - 1:
        amp = 10.0 ** rng.uniform(1.0, 3.0)
        while True:
            k1, k2 = rng.integers(-K, K + 1, size=2)
            if max(abs(k1), abs(k2)) >= K // 2:
                break
        x1, x2 = grid.x
        ph = grid.dxi * (k1 * x1 + k2 * x2) + rng.uniform(0, 2 * np.pi)
        spike = SpectralField.from_physical(grid, math.sqrt(2) * np.cos(ph))
        f = f + spike * amp
    return f


def corpus_pairs(spec: CorpusSpec):
    """Yield (seed, u, v); v is the zero field on trivial entries."""
    for i in range(spec.size):
        u = corpus_field(spec, i, 0)
        if spec.zero_every and i % spec.zero_every == spec.zero_every - 1:
            v = SpectralField.zeros(spec.grid)
        else:
            v = corpus_field(spec, i, 1)
        yield spec.entry_seed(i), u, v


# -- field-level helpers --------------------------------------------------------


def top_third_fraction(f: SpectralField) -> float:
    """Fraction of the L2 energy outside the dealiasing mask."""
    e = np.abs(f.coeffs) ** 2
    total = float(np.sum(e))
    if total == 0:
        return 0.0
    return float(np.sum(e[~f.grid.dealias_mask])) / total


def require_resolved(*fields: SpectralField) -> None:
    for f in fields:
        frac = top_third_fraction(f)
        if frac >= RESOLVED_TOL:
            raise UnresolvedFieldError(
                f"field has {frac:.2e} of its energy in the top third of the spectrum (limit {RESOLVED_TOL:g})"
            )


def product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Dealiased pointwise product: inputs truncated to the 2/3 mask, output masked again."""
    g = u.grid
    mask = g.dealias_mask
    pu = g.ifft(u.coeffs * mask).real
    pv = g.ifft(v.coeffs * mask).real
    return SpectralField(g, g.fft(pu * pv) * mask)


def commutator_field(s: float, u: SpectralField, v: SpectralField) -> SpectralField:
    """[Lambda^s, u] v = Lambda^s(u v) - u Lambda^s(v) with dealiased products."""
    if u.grid != v.grid:
        raise ValueError("u and v must share one Grid")
    require_resolved(u, v)
    if s == 0:
        return SpectralField.zeros(u.grid)
    return lambda_s(product(u, v), s) - product(u, lambda_s(v, s))


def gradient(f: SpectralField) -> VectorField:
    g = f.grid
    c = f.coeffs * g.nyquist_free
    return VectorField.from_coeffs(g, np.stack([1j * g.xi1 * c, 1j * g.xi2 * c]))


def riesz_sup_sum(f: SpectralField) -> float:
    """sum over i, j of ||Delta^{-1} d_i d_j f||_Linf (the mean mode is dropped)."""
    g = f.grid
    inv = np.zeros_like(g.xi_sq)
    nz = g.ksq > 0
    inv[nz] = 1.0 / g.xi_sq[nz]
    xi = (g.xi1 * g.nyquist_free, g.xi2 * g.nyquist_free)
    total = 0.0
    for i in range(2):
        for j in range(2):
            sym = xi[i] * xi[j] * inv  # (i xi_i)(i xi_j) / (-|xi|^2)
            total += float(np.max(np.abs(g.ifft(sym * f.coeffs).real)))
    return total


# -- ratio functions ----------------------------------------------------------------
# Each returns (lhs, rhs); ratio = lhs / rhs.


def product_tame(u, v, s):
    lhs = norm(product(u, v), "Hs", s=s)
    rhs = norm(u, "Linf") * norm(v, "Hs", s=s) + norm(u, "Hs", s=s) * norm(v, "Linf")
    return lhs, rhs


def product_algebra(u, v, s):
    return norm(product(u, v), "Hs", s=s), norm(u, "Hs", s=s) * norm(v, "Hs", s=s)


def commutator_bound(u, v, s):
    lhs = norm(commutator_field(s, u, v), "L2")
    rhs = norm(u, "Hs", s=s) * norm(v, "Linf") + norm(gradient(u), "Linf") * norm(v, "Hs", s=s - 1)
    return lhs, rhs


def log_sobolev(f, p):
    lhs = riesz_sup_sum(f)
    rhs = norm(f, "L2") + norm(f, "Linf") * math.log(math.e + norm(gradient(f), "Lp", p=p))
    return lhs, rhs


def gn_lq(f, q):
    lhs = norm(f, "Lp", p=q) ** q
    rhs = norm(f, "L2") ** 2 * norm(gradient(f), "L2") ** (q - 2)
    return lhs, rhs


def gn_sup(f, s_exp, r):
    """||f||_Linf against ||f||_{L^s}^a ||grad f||_{L^r}^(1-a), a = s(r-2)/(2r + s(r-2))."""
    a = s_exp * (r - 2) / (2 * r + s_exp * (r - 2))
    lhs = norm(f, "Linf")
    rhs = norm(f, "Lp", p=s_exp) ** a * norm(gradient(f), "Lp", p=r) ** (1 - a)
    return lhs, rhs


# -- reduction ------------------------------------------------------------------------


def summarize(name: str, seeds: Sequence[int], pairs: Sequence[tuple[float, float]], params=None) -> InequalityReport:
    """Reduce per-entry (lhs, rhs) in corpus order; entries with lhs == 0 count as trivial."""
    ratios, kept_seeds, trivial = [], [], 0
    for seed, (lhs, rhs) in zip(seeds, pairs):
        if lhs == 0:
            trivial += 1
            continue
        ratios.append(lhs / rhs if rhs > 0 else math.inf)
        kept_seeds.append(seed)
    if ratios:
        arr = np.asarray(ratios)
        k = int(np.argmax(arr))
        max_ratio, worst = float(arr[k]), int(kept_seeds[k])
        quant = tuple(float(q) for q in np.quantile(arr, QUANTILES))
    else:
        max_ratio, worst, quant = 0.0, None, tuple(0.0 for _ in QUANTILES)
    return InequalityReport(name, len(pairs), max_ratio, quant, worst, trivial, QUANTILES, dict(params or {}))


def _evaluate(items, fn: Callable, workers: int | None):
    workers = workers or fft_workers()
    if workers <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))  # map preserves order


def check_calculus(spec: CorpusSpec, s: float, *, workers: int | None = None) -> tuple[InequalityReport, ...]:
    """Reports for the tame product, algebra and commutator estimates at order s (s > 1)."""
    if not s > 1:
        raise ValueError(f"the calculus checks need s > 1 (the algebra bound needs s > N/2), got {s}")
    entries = list(corpus_pairs(spec))
    seeds = [e[0] for e in entries]
    params = {"s": s, "n": spec.n, "seed": spec.seed, "size": spec.size}
    out = []
    for name, fn in (
        ("calculus_product_tame", product_tame),
        ("calculus_product_algebra", product_algebra),
        ("calculus_commutator", commutator_bound),
    ):
        res = _evaluate([(u, v, s) for _, u, v in entries], fn, workers)
        out.append(summarize(name, seeds, res, params))
    return tuple(out)


def check_log_sobolev(spec: CorpusSpec, p: float, *, scales: Sequence[float] = (1.0,),
                      workers: int | None = None) -> InequalityReport:
    """Riesz-transform sup bound with logarithmic gradient term; one report over all scales."""
    if not 2 < p < math.inf:
        raise ValueError(f"p must satisfy 2 < p < inf, got {p}")
    if spec.spiky_every == 0:
        spec = replace(spec, spiky_every=4)
    fields = [(spec.entry_seed(i), corpus_field(spec, i)) for i in range(spec.size)]
    items, seeds = [], []
    for lam in scales:
        for seed, f in fields:
            items.append((f * lam, p))
            seeds.append(seed)
    res = _evaluate(items, log_sobolev, workers)
    params = {"p": p, "n": spec.n, "seed": spec.seed, "size": spec.size, "scales": list(scales)}
    return summarize("log_sobolev", seeds, res, params)


def check_gn(spec: CorpusSpec, q: float, *, workers: int | None = None) -> InequalityReport:
    """||f||_{L^q}^q <= C ||f||_{L^2}^2 ||grad f||_{L^2}^(q-2); at q = 2 the ratio is exactly 1."""
    if not 2 <= q < math.inf:
        raise ValueError(f"q must lie in [2, inf), got {q}")
    fields = [(spec.entry_seed(i), corpus_field(spec, i)) for i in range(spec.size)]
    res = _evaluate([(f, q) for _, f in fields], gn_lq, workers)
    params = {"q": q, "n": spec.n, "seed": spec.seed, "size": spec.size}
    return summarize("gagliardo_nirenberg", [s for s, _ in fields], res, params)


def check_gn_sup(spec: CorpusSpec, s_exp: float = 2.0, r: float = 4.0, *,
                 workers: int | None = None) -> InequalityReport:
    """Sup bound ||f||_Linf <= C ||f||_{L^s}^a ||grad f||_{L^r}^(1-a) for s > 1, r > 2."""
    if not (s_exp > 1 and 2 < r < math.inf):
        raise ValueError(f"need s > 1 and 2 < r < inf, got s={s_exp}, r={r}")
    fields = [(spec.entry_seed(i), corpus_field(spec, i)) for i in range(spec.size)]
    res = _evaluate([(f, s_exp, r) for _, f in fields], gn_sup, workers)
    params = {"s": s_exp, "r": r, "n": spec.n, "seed": spec.seed, "size": spec.size}
    return summarize("gagliardo_nirenberg_sup", [s for s, _ in fields], res, params)


@dataclass(frozen=True)
class StabilityResult:
    name: str
    resolutions: tuple[int, ...]
    max_ratios: tuple[float, ...]

    @property
    def growth(self) -> float:
        lo, hi = self.max_ratios[0], self.max_ratios[-1]
        if lo == 0 and hi == 0:
            return 1.0
        return hi / lo if lo > 0 else math.inf

    @property
    def stable(self) -> bool:
        return all(math.isfinite(m) for m in self.max_ratios) and 0.5 <= self.growth <= 2.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(growth=self.growth, stable=self.stable)
        return d


def resolution_stability(check: Callable[[CorpusSpec], InequalityReport | tuple],
                         spec: CorpusSpec, resolutions: Sequence[int] = (128, 256)) -> list[StabilityResult]:
    """Run ``check`` on matched corpora at each resolution and compare max ratios."""
    runs = []
    for n in resolutions:
        rep = check(replace(spec, n=n))
        runs.append(rep if isinstance(rep, tuple) else (rep,))
    out = []
    for j, first in enumerate(runs[0]):
        out.append(StabilityResult(first.name, tuple(resolutions), tuple(r[j].max_ratio for r in runs)))
    return out


SUITES = ("calculus", "log_sobolev", "gn", "gn_sup")


def run_suite(name: str, spec: CorpusSpec, *, s: float = 2.5, p: float = 4.0, q: float = 4.0,
              scales: Sequence[float] = (1.0,)) -> tuple[InequalityReport, ...]:
    if name == "calculus":
        return check_calculus(spec, s)
    if name == "log_sobolev":
        return (check_log_sobolev(spec, p, scales=scales),)
    if name == "gn":
        return (check_gn(spec, q),)
    if name == "gn_sup":
        return (check_gn_sup(spec),)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
