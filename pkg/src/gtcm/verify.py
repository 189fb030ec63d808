"""Property suites backing ``gtcm verify`` and the acceptance tests.

Every check measures a number and compares it with a named tolerance, so a
failure always names the invariant that broke.  Two levels exist: ``fast``
runs the whole suite at 16^3 in well under a minute; ``full`` uses the
desk-scale 32^3 settings (energy-residual convergence over T=1 included).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

from . import diagnostics as dg
from . import inequalities as iq
from . import io
from . import spectral as sp
from .model import ModelParams, State, Switches, random_band_state, taylor_green
from .spectral import Field, Grid, MultiplierSpec, VectorField
from .timestepper import StepperConfig, integrate, step


@dataclass(frozen=True)
class Tolerance:
    limit: float
    kind: str  # "max": measured <= limit; "min": measured >= limit

    def accepts(self, measured: float) -> bool:
        if not math.isfinite(measured):
            return False
        return measured <= self.limit if self.kind == "max" else measured >= self.limit


TOLERANCES: dict[str, Tolerance] = {
    "energy_residual": Tolerance(1e-5, "max"),
    "energy_residual_refinement": Tolerance(4.0, "min"),
    "cancellation_residual": Tolerance(1e-11, "max"),
    "cancellation_control": Tolerance(1e-3, "min"),
    "damping_monotonicity": Tolerance(-1e-12, "min"),
    "fractional_symbol": Tolerance(1e-13, "max"),
    "linear_mode_decay": Tolerance(1e-13, "max"),
    "leray_idempotence": Tolerance(1e-13, "max"),
    "leray_gradient_annihilation": Tolerance(1e-13, "max"),
    "divergence_after_step": Tolerance(1e-10, "max"),
    "energy_monotone_samples": Tolerance(1e-12, "max"),
    "monitored_norm_growth": Tolerance(10.0, "max"),
    "twin_initial_distance": Tolerance(1e-10, "max"),
    "twin_curve_agreement": Tolerance(0.10, "max"),
    "bench_finite_positive": Tolerance(1.0, "min"),
    "bench_reproducible": Tolerance(0.0, "max"),
    "bench_scale_invariance": Tolerance(1e-12, "max"),
    "convergence_order_low": Tolerance(2.7, "min"),
    "convergence_order_high": Tolerance(3.3, "max"),
    "csv_reproducible": Tolerance(1.0, "min"),
    "checkpoint_roundtrip": Tolerance(1.0, "min"),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    group: str
    measured: float
    tolerance: Tolerance

    @property
    def passed(self) -> bool:
        return self.tolerance.accepts(self.measured)

    def line(self) -> str:
        op = "<=" if self.tolerance.kind == "max" else ">="
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.group:<14} {self.name:<28} {self.measured!r:>24} {op} {self.tolerance.limit!r}"


@dataclass(frozen=True)
class LevelConfig:
    n: int
    energy_t_end: float
    energy_dt: float
    energy_cadence: int
    cancellation_samples: int
    damping_pairs: int
    twin_t_end: float
    twin_dt: float
    twin_epsilon: float
    bench_size: int
    order_n: int
    order_t_end: float
    order_dt: float
    repro_t_end: float = 0.05


LEVELS = {
    "fast": LevelConfig(
        n=16, energy_t_end=0.2, energy_dt=2e-3, energy_cadence=5,
        cancellation_samples=20, damping_pairs=200,
        twin_t_end=0.2, twin_dt=4e-3, twin_epsilon=1e-3,
        bench_size=200, order_n=16, order_t_end=0.5, order_dt=0.01,
    ),
    "full": LevelConfig(
        n=32, energy_t_end=1.0, energy_dt=1e-3, energy_cadence=10,
        cancellation_samples=100, damping_pairs=1000,
        twin_t_end=0.5, twin_dt=2e-3, twin_epsilon=1e-3,
        bench_size=1000, order_n=32, order_t_end=0.25, order_dt=0.005,
    ),
}

GROUPS = (
    "energy", "cancellation", "damping", "operators", "leray",
    "boundedness", "twin-run", "bench", "convergence", "reproducibility",
)


class _Checks:
    """Collects CheckResults against a (possibly overridden) tolerance table."""

    def __init__(self, tolerances: Mapping[str, Tolerance]):
        self.tol = tolerances
        self.results: list[CheckResult] = []

    def add(self, group: str, name: str, measured: float) -> CheckResult:
        res = CheckResult(name, group, float(measured), self.tol[name])
        self.results.append(res)
        return res


# ---------------------------------------------------------------------------
# Measurements (each returns plain numbers; the tests reuse them directly)

@dataclass
class EnergyRun:
    """Criterion-style energy run: residual, per-step divergence and energy."""

    dt: float
    residual: float
    e0: float
    max_divergence: float
    max_step_energy_increase: float
    records: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def normalised_residual(self) -> float:
        return self.residual / self.e0


def energy_run(grid: Grid, t_end: float, dt: float, cadence: int = 10,
               params: Optional[ModelParams] = None) -> EnergyRun:
    params = params or ModelParams(alpha=1.5, beta=4.0)
    s0 = taylor_green(grid, 1.0)
    e0 = dg.energy(s0)
    worst = {"div": dg.divergence_ratio(s0), "rise": -math.inf, "E": e0}

    def per_step(s: State, n: int):
        worst["div"] = max(worst["div"], dg.divergence_ratio(s))
        e = dg.energy(s)
        worst["rise"] = max(worst["rise"], (e - worst["E"]) / e0)
        worst["E"] = e

    t0 = time.perf_counter()
    final, records = dg.run_with_diagnostics(
        s0, params, StepperConfig(dt=dt, t_end=t_end, cadence=cadence),
        step_callbacks=[per_step],
    )
    return EnergyRun(
        dt=dt,
        residual=records[-1].energy_residual,
        e0=e0,
        max_divergence=worst["div"],
        max_step_energy_increase=worst["rise"],
        records=records,
        seconds=time.perf_counter() - t0,
    )


def compressive_control(state: State) -> State:
    """Break incompressibility: u + grad(psi) with psi ~ -|u|^2, scaled to ||u||.

    div u then correlates with |u|^2, so int (u.grad u).u = -1/2 int div(u)|u|^2
    is far from zero; random unprojected fields cancel too often to serve
    as a control.
    """
    g = state.grid
    up = sp.as_physical(state.u).data
    q = sp.dealias(sp.to_spectral(Field(g, np.sum(up**2, axis=0))))
    gq = sp.gradient(q)
    return replace(state, u=state.u - gq * (sp.l2_norm(state.u) / sp.l2_norm(gq)))


def cancellation_measure(grid: Grid, samples: int, seed: int = 0) -> tuple[float, float]:
    """(worst residual over projected states, smallest residual of the broken control)."""
    worst, control = 0.0, math.inf
    for ss in np.random.SeedSequence(seed).spawn(samples):
        s = random_band_state(grid, 1.0, ss)
        worst = max(worst, dg.cancellation_suite(s).worst)
        control = min(control, dg.cancellation_suite(compressive_control(s)).a)
    return worst, control


def damping_measure(grid: Grid, pairs: int, betas=(4.0, 5.0), seed: int = 1) -> float:
    """Smallest quadrature / scale over random pairs (b rescaled by a random factor)."""
    lowest = math.inf
    max_mode = min(grid.dealias_cutoff)
    for beta in betas:
        for ss in np.random.SeedSequence([seed, int(beta * 1000)]).spawn(pairs):
            sa, sb, sc = ss.spawn(3)
            a = sp.random_band_limited_field(grid, max_mode, sa, vector=True)
            b = sp.random_band_limited_field(grid, max_mode, sb, vector=True)
            b = b * float(np.exp(np.random.default_rng(sc).normal()))
            q = dg.monotone_damping_check(a, b, beta)
            lowest = min(lowest, q / dg.damping_check_scale(a, b, beta))
    return lowest


_TEST_MODES = ((1, 0, 0), (0, 0, 3), (2, -1, 1), (3, 4, -2), (-5, 2, 7))


def _mode_field(grid: Grid, k: tuple, phase: float = 0.3) -> Field:
    x1, x2, x3 = grid.coordinates()
    arg = sum(2 * math.pi * ki * xi / li for ki, xi, li in zip(k, (x1, x2, x3), grid.lengths))
    return Field(grid, np.cos(arg + phase))


def _mode_index(grid: Grid, k: tuple) -> tuple:
    """Half-spectrum index holding the coefficient of k (or of -k when k3 < 0)."""
    if k[2] < 0:
        k = tuple(-ki for ki in k)
    return tuple(ki % n for ki, n in zip(k[:2], grid.shape[:2])) + (k[2],)


def _modes_within(grid: Grid, factor: int):
    return [k for k in _TEST_MODES if all(factor * abs(ki) < n for ki, n in zip(k, grid.shape))]


def _wavevector(grid: Grid, k: tuple) -> list[float]:
    return [2 * math.pi * ki / li for ki, li in zip(k, grid.lengths)]


def fractional_symbol_measure(grid: Grid, alphas=(0.75, 1.5, 2.0, 2.5)) -> float:
    """Worst relative error of (-Delta)^alpha on single-mode coefficients.

    The expected factor |k|^(2 alpha) is computed from the integer mode
    numbers, independently of the grid tables.
    """
    worst = 0.0
    for alpha in alphas:
        spec = MultiplierSpec.fractional_laplacian(alpha)
        for k in _modes_within(grid, 2):
            f = sp.to_spectral(_mode_field(grid, k))
            idx = _mode_index(grid, k)
            want = sum(c * c for c in _wavevector(grid, k)) ** alpha
            got = sp.apply_multiplier(f, spec).data[idx] / f.data[idx]
            worst = max(worst, abs(got - want) / want)
    return worst


def linear_mode_measure(grid: Grid, steps: int = 10, dt: float = 0.01, alpha: float = 1.5) -> float:
    """Linear-only single-mode runs: per-step coefficient ratio against exp(lambda dt)."""
    params = ModelParams(alpha=alpha, beta=4.0, switches=Switches.linear_only())
    cfg = StepperConfig(dt=dt, t_end=steps * dt)
    worst = 0.0
    for k in _modes_within(grid, 3):
        kv = _wavevector(grid, k)
        ksq = sum(c * c for c in kv)
        rates = (-(kv[0] ** 2 + kv[1] ** 2), -(ksq**alpha), -ksq)
        f = _mode_field(grid, k)
        # any amplitude orthogonal to k is solenoidal
        a = np.cross(kv, [0.3, -0.7, 1.1])
        a = a / np.linalg.norm(a)
        u = VectorField(grid, np.stack([ai * f.data for ai in a]))
        s = State(u, u * 0.5, f * -2.0).spectral()
        idx = _mode_index(grid, k)
        for _ in range(steps):
            nxt = step(s, params, cfg, dt)
            pairs = (
                (s.u.data[0][idx], nxt.u.data[0][idx], rates[0]),
                (s.v.data[0][idx], nxt.v.data[0][idx], rates[1]),
                (s.theta.data[idx], nxt.theta.data[idx], rates[2]),
            )
            for before, after, rate in pairs:
                want = before * math.exp(rate * dt)
                if want != 0:
                    worst = max(worst, abs(after - want) / abs(want))
            s = nxt
    return worst


def leray_measure(grid: Grid, seed: int = 7) -> tuple[float, float]:
    """(|P P w - P w| / |P w|, |P grad phi| / |grad phi|) for random w and phi."""
    m = min(grid.dealias_cutoff)
    w = sp.random_band_limited_field(grid, m, np.random.SeedSequence([seed, 0]), vector=True)
    pw = sp.leray_project(w)
    idem = sp.l2_norm(sp.leray_project(pw) - pw) / sp.l2_norm(pw)
    phi = sp.random_band_limited_field(grid, m, np.random.SeedSequence([seed, 1]))
    g = sp.gradient(phi)
    grad = sp.l2_norm(sp.leray_project(g)) / sp.l2_norm(g)
    return idem, grad


MONITORED = ("d3_u", "grad_v", "grad_theta", "lap_theta", "lap_u", "lap_v",
             "lambda_s_u", "lambda_s_v", "lambda_s_theta")


def norm_growth(records) -> float:
    """Largest max/initial over the monitored norms (squared columns are rooted)."""
    worst = 0.0
    for name in MONITORED:
        vals = np.sqrt(np.array([getattr(r, name) for r in records]))
        if not np.all(np.isfinite(vals)):
            return math.inf
        if vals[0] > 0:
            worst = max(worst, float(vals.max() / vals[0]))
        elif vals.max() > 0:
            return math.inf
    return worst


def sample_energy_increase(records) -> float:
    e0 = records[0].E
    return max((b.E - a.E) / e0 for a, b in zip(records, records[1:]))


def twin_measure(grid: Grid, t_end: float, dt: float, epsilon: float) -> tuple[float, float]:
    """(|delta(0)/eps^2 - 1|, worst relative gap between the eps and eps/2 curves)."""
    s0 = taylor_green(grid, 1.0)
    cfg = StepperConfig(dt=dt, t_end=t_end, cadence=5)
    a, b = dg.twin_run_curves(s0, [epsilon, epsilon / 2], ModelParams(1.5, 4.0), cfg)
    initial = max(abs(a.normalised[0] - 1), abs(b.normalised[0] - 1))
    gap = float(np.max(np.abs(a.normalised - b.normalised) / np.abs(b.normalised)))
    return initial, gap


def bench_measure(grid: Grid, size: int, scale_samples: int = 50) -> dict:
    """Per bench: max ratio, rerun difference, finiteness and scale invariance."""
    out = {}
    for bench_id in iq.BENCH_IDS:
        cfg = iq.EnsembleConfig(grid=grid, size=size, max_mode=min(5, min(grid.dealias_cutoff)))
        first = iq.run_bench(bench_id, cfg)
        again = iq.run_bench(bench_id, replace(cfg, workers=2))
        valid = first.ratios[~np.isnan(first.ratios)]
        finite = bool(valid.size and np.all(np.isfinite(valid)) and np.all(valid > 0))
        same = np.array_equal(first.ratios, again.ratios, equal_nan=True) and first.argmax_seed == again.argmax_seed
        fn = iq._ratio_fn(bench_id, cfg.alpha)
        worst = 0.0
        for i in range(min(scale_samples, size)):
            psi = iq.ensemble_sample(cfg, i, bench_id)
            r = fn(psi)
            if r is None:
                continue
            for lam in (-3.7, 1e-3, 250.0):
                worst = max(worst, abs(fn(psi * lam) / r - 1))
        out[bench_id] = {
            "max_ratio": first.max_ratio,
            "finite_positive": finite,
            "reproducible": bool(same),
            "scale_invariance": worst,
            "report": first,
        }
    return out


def richardson_order(grid: Grid, t_end: float, dt: float, amplitude: float = 1.0) -> float:
    """log2(|y_dt - y_dt/2| / |y_dt/2 - y_dt/4|) on the terminal state."""
    s0 = taylor_green(grid, amplitude)
    params = ModelParams(1.5, 4.0)
    finals = []
    for h in (dt, dt / 2, dt / 4):
        final, _ = integrate(s0, params, StepperConfig(dt=h, t_end=t_end))
        finals.append(final.pack())
    d1 = math.sqrt(sp.spectral_sq_sum(grid, finals[0] - finals[1]))
    d2 = math.sqrt(sp.spectral_sq_sum(grid, finals[1] - finals[2]))
    return math.log2(d1 / d2)


def reproducibility_measure(grid: Grid, t_end: float) -> tuple[bool, bool]:
    """(two identical runs give identical CSV bytes, checkpoint round-trips bit-exactly)."""
    params = ModelParams(1.5, 4.0)
    cfg = StepperConfig(dt=1e-2, t_end=t_end)
    texts = []
    for _ in range(2):
        s0 = random_band_state(grid, 1.0, 3)
        final, records = dg.run_with_diagnostics(s0, params, cfg)
        texts.append(io.diagnostics_csv_text(records, dg.CSV_COLUMNS))
    blob = io.checkpoint_bytes(final, params)
    loaded, _ = io.parse_checkpoint(blob)
    phys = final.physical()
    same = all(
        np.array_equal(a.data, b.data)
        for a, b in zip((phys.u, phys.v, phys.theta), (loaded.u, loaded.v, loaded.theta))
    ) and loaded.time == final.time and io.checkpoint_bytes(loaded, params) == blob
    return texts[0] == texts[1], same


# ---------------------------------------------------------------------------
# Suite driver

def run_suite(
    level: str = "fast",
    tolerances: Optional[Mapping[str, float]] = None,
    groups: Optional[tuple] = None,
    progress: Optional[Callable[[CheckResult], None]] = None,
) -> list[CheckResult]:
    """Run the property suites; ``tolerances`` overrides limits by name."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {tuple(LEVELS)}")
    table = dict(TOLERANCES)
    for name, limit in (tolerances or {}).items():
        if name not in table:
            raise KeyError(f"unknown tolerance {name!r}")
        table[name] = Tolerance(float(limit), table[name].kind)
    lv = LEVELS[level]
    grid = Grid.cube(lv.n)
    chk = _Checks(table)
    wanted = set(groups or GROUPS)

    def add(group, name, value):
        res = chk.add(group, name, value)
        if progress:
            progress(res)

    if "energy" in wanted or "boundedness" in wanted:
        coarse = energy_run(grid, lv.energy_t_end, lv.energy_dt, lv.energy_cadence)
        fine = energy_run(grid, lv.energy_t_end, lv.energy_dt / 2, 2 * lv.energy_cadence)
        if "energy" in wanted:
            add("energy", "energy_residual", coarse.normalised_residual)
            add("energy", "energy_residual_refinement", coarse.residual / max(fine.residual, 1e-300))
        if "boundedness" in wanted:
            add("boundedness", "energy_monotone_samples", sample_energy_increase(coarse.records))
            add("boundedness", "monitored_norm_growth", norm_growth(coarse.records))
            add("leray", "divergence_after_step", coarse.max_divergence)
    if "cancellation" in wanted:
        worst, control = cancellation_measure(grid, lv.cancellation_samples)
        add("cancellation", "cancellation_residual", worst)
        add("cancellation", "cancellation_control", control)
    if "damping" in wanted:
        add("damping", "damping_monotonicity", damping_measure(grid, lv.damping_pairs))
    if "operators" in wanted:
        add("operators", "fractional_symbol", fractional_symbol_measure(grid))
        add("operators", "linear_mode_decay", linear_mode_measure(grid))
    if "leray" in wanted:
        idem, grad = leray_measure(grid)
        add("leray", "leray_idempotence", idem)
        add("leray", "leray_gradient_annihilation", grad)
    if "twin-run" in wanted:
        initial, gap = twin_measure(grid, lv.twin_t_end, lv.twin_dt, lv.twin_epsilon)
        add("twin-run", "twin_initial_distance", initial)
        add("twin-run", "twin_curve_agreement", gap)
    if "bench" in wanted:
        res = bench_measure(grid, lv.bench_size)
        add("bench", "bench_finite_positive", float(all(r["finite_positive"] for r in res.values())))
        add("bench", "bench_reproducible", float(sum(not r["reproducible"] for r in res.values())))
        add("bench", "bench_scale_invariance", max(r["scale_invariance"] for r in res.values()))
    if "convergence" in wanted:
        order = richardson_order(Grid.cube(lv.order_n), lv.order_t_end, lv.order_dt)
        add("convergence", "convergence_order_low", order)
        add("convergence", "convergence_order_high", order)
    if "reproducibility" in wanted:
        csv_same, ckpt_same = reproducibility_measure(grid, lv.repro_t_end)
        add("reproducibility", "csv_reproducible", float(csv_same))
        add("reproducibility", "checkpoint_roundtrip", float(ckpt_same))
    return chk.results
