"""Norm monitoring, energy budget and cancellation checks.

Every squared norm is an exact quadrature of a trigonometric polynomial
(Parseval on the stored coefficients), except the L^(beta+1) term, which is a
grid Riemann sum; the fine-grid comparison column records how far that sum
is from its 2x-resolved value.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import spectral as sp
from .model import (
    ModelParams,
    State,
    advect,
    damping_values,
    fine_grid,
    pad_coef,
    tensor_divergence,
)
from .spectral import SPECTRAL, MultiplierSpec, VectorField
from .timestepper import StepperConfig, _Stepper, fixed_step_count, fixed_step_size, integrate
from .timestepper import step as _step

DEFAULT_LAMBDA_S = 2.5


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of monitored quantities.

    ``l2_*`` are L2 norms; the remaining norm columns are squared norms.
    ``D_cum`` is the integrated budget 2 * int_0^t (dissipation) ds and
    ``energy_residual`` is |2E(t) + D(t) - 2E(0)|.
    """

    time: float
    E: float
    D_cum: float
    energy_residual: float
    l2_u: float
    l2_v: float
    l2_theta: float
    gradh_u: float
    lambda_alpha_v: float
    grad_theta: float
    lbeta1_u: float
    d3_u: float
    grad_u: float
    grad_v: float
    lap_theta: float
    lap_u: float
    lap_v: float
    lambda_s_u: float
    lambda_s_v: float
    lambda_s_theta: float
    damping_alias_defect: float
    cancel_a: float
    cancel_b: float
    cancel_c: float
    cancel_d: float
    cancel_e: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list[float]:
        return [getattr(self, name) for name in self.columns()]


CSV_COLUMNS = DiagnosticsRecord.columns()


def _sq(grid, coef, sym=None) -> float:
    w = grid.parseval_weight
    a = np.abs(coef) ** 2
    if sym is not None:
        a = a * sym
    return grid.volume * float(np.sum(w * a))


def lbeta1(grid, u_phys: np.ndarray, beta: float) -> float:
    """||u||_{L^(beta+1)}^(beta+1) by grid Riemann sum."""
    mag_sq = np.sum(u_phys * u_phys, axis=0)
    return float(np.sum(mag_sq ** ((beta + 1) / 2))) * grid.cell_volume


def damping_alias_defect(grid, u_coef: np.ndarray, beta: float, u_phys=None) -> float:
    fg = fine_grid(grid)
    if u_phys is None:
        u_phys = sp.inverse(grid, u_coef)
    coarse = lbeta1(grid, u_phys, beta)
    fine = lbeta1(fg, sp.inverse(fg, pad_coef(grid, u_coef, fg)), beta)
    return abs(coarse - fine)


# ---------------------------------------------------------------------------
# Cancellation suite

@dataclass(frozen=True)
class CancellationReport:
    """Normalised residuals of the integrals that vanish by integration by parts.

    a: int (u.grad)u . u       b: int (u.grad)v . v       c: int (u.grad)theta theta
    d: int div(v (x) v) . u + int (v.grad)u . v
    e: int grad(theta) . v + int div(v) theta
    """

    a: float
    b: float
    c: float
    d: float
    e: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @property
    def worst(self) -> float:
        return max(self.as_dict().values())


def _normalised(value: float, scale: float) -> float:
    return abs(value) / scale if scale > 0 else abs(value)


def cancellation_suite(state: State) -> CancellationReport:
    """Each integral is divided by the product of the participating L2-type norms.

    Trilinear terms use ||w||_{L^inf-free} scale ||w|| ||grad f|| ||g|| so the
    residual is dimensionless; the bilinear term (e) uses ||grad theta|| ||v||.
    """
    s = state.spectral()
    grid = s.grid
    u_phys = VectorField(grid, sp.inverse(grid, s.u.data))
    v_phys = VectorField(grid, sp.inverse(grid, s.v.data))
    inner = lambda a, b: sp.spectral_inner(grid, a, b)  # noqa: E731
    norm = lambda c: math.sqrt(_sq(grid, c))  # noqa: E731
    grad_norm = lambda c: math.sqrt(_sq(grid, c, grid.ksq))  # noqa: E731
    nu, nv, nt = norm(s.u.data), norm(s.v.data), norm(s.theta.data)
    gu, gv, gt = grad_norm(s.u.data), grad_norm(s.v.data), grad_norm(s.theta.data)

    a = inner(advect(u_phys, s.u).data, s.u.data)
    b = inner(advect(u_phys, s.v).data, s.v.data)
    c = inner(advect(u_phys, s.theta).data, s.theta.data)
    d1 = inner(tensor_divergence(v_phys).data, s.u.data)
    d2 = inner(advect(v_phys, s.u).data, s.v.data)
    kd = grid.k_deriv
    grad_t = np.stack([1j * kd[j] * s.theta.data for j in range(3)])
    e1 = inner(grad_t, s.v.data)
    e2 = inner(sp.divergence_coef(grid, s.v.data), s.theta.data)
    return CancellationReport(
        a=_normalised(a, nu * gu * nu),
        b=_normalised(b, nu * gv * nv),
        c=_normalised(c, nu * gt * nt),
        d=_normalised(d1 + d2, nv * nv * gu),
        e=_normalised(e1 + e2, gt * nv + nt * gv),
    )


def monotone_damping_check(a: VectorField, b: VectorField, beta: float) -> float:
    """int (|a|^(beta-1) a - |b|^(beta-1) b) . (a - b) dx by grid quadrature.

    Nonnegative up to round-off; the contract allows
    -1e-12 * (||a|| + ||b||)^(beta+1).
    """
    if a.grid != b.grid:
        raise sp.GridMismatchError("a and b live on different grids")
    ap = sp.as_physical(a).data
    bp = sp.as_physical(b).data
    integrand = (damping_values(ap, beta) - damping_values(bp, beta)) * (ap - bp)
    return float(np.sum(integrand)) * a.grid.cell_volume


def damping_check_scale(a: VectorField, b: VectorField, beta: float) -> float:
    return (sp.l2_norm(a) + sp.l2_norm(b)) ** (beta + 1)


# ---------------------------------------------------------------------------
# Records

def energy(state: State) -> float:
    s = state.spectral()
    g = s.grid
    return 0.5 * (_sq(g, s.u.data) + _sq(g, s.v.data) + _sq(g, s.theta.data))


def divergence_ratio(state: State) -> float:
    """||div u|| / ||u|| (0 for u = 0)."""
    s = state.spectral()
    nu = math.sqrt(_sq(s.grid, s.u.data))
    if nu == 0:
        return 0.0
    return math.sqrt(_sq(s.grid, sp.divergence_coef(s.grid, s.u.data))) / nu


def record(
    state: State,
    params: ModelParams,
    previous: Optional[DiagnosticsRecord] = None,
    *,
    initial_energy: Optional[float] = None,
    budget: Optional[float] = None,
    lambda_s: float = DEFAULT_LAMBDA_S,
    cancellations: bool = True,
    alias_defect: bool = True,
) -> DiagnosticsRecord:
    """Compute one DiagnosticsRecord.

    The cumulative budget is taken from ``budget`` when given (the stepper
    carries it at the integrator's order); otherwise it is accumulated from
    ``previous`` by the trapezoid rule, which is only second order in the
    sampling interval.  ``initial_energy`` is E(0) of the run and is required
    together with ``previous``; without either, this state is the start.
    """
    s = state.spectral()
    g = s.grid
    u, v, th = s.u.data, s.v.data, s.theta.data
    u_phys = sp.inverse(g, u)
    ksq = g.ksq
    kh = g.kh_sq
    frac = sp.symbol(g, MultiplierSpec.fractional_laplacian(params.alpha))
    lam = sp.symbol(g, MultiplierSpec.lambda_power(lambda_s))
    k3sq = g.k[2] ** 2

    l2u, l2v, l2t = _sq(g, u), _sq(g, v), _sq(g, th)
    e = 0.5 * (l2u + l2v + l2t)
    gradh_u = _sq(g, u, kh)
    lav = _sq(g, v, frac)
    gt = _sq(g, th, ksq)
    lb = lbeta1(g, u_phys, params.beta)

    rate = 0.0
    sw = params.switches
    rate += gradh_u if sw.horizontal_viscosity else 0.0
    rate += lav if sw.fractional_dissipation else 0.0
    rate += gt if sw.thermal_diffusion else 0.0
    rate += lb if sw.damping else 0.0

    if budget is None:
        budget = 0.0
        if previous is not None:
            prev_rate = _record_rate(previous, params)
            budget = previous.D_cum + (state.time - previous.time) * (prev_rate + rate)
    if initial_energy is None:
        if previous is not None:
            raise ValueError("initial_energy is required when accumulating from a previous record")
        initial_energy = e
    residual = abs(2 * e + budget - 2 * initial_energy)

    if cancellations:
        canc = cancellation_suite(s)
    else:
        canc = CancellationReport(0.0, 0.0, 0.0, 0.0, 0.0)
    rec = DiagnosticsRecord(
        time=float(state.time),
        E=e,
        D_cum=float(budget),
        energy_residual=residual,
        l2_u=math.sqrt(l2u),
        l2_v=math.sqrt(l2v),
        l2_theta=math.sqrt(l2t),
        gradh_u=gradh_u,
        lambda_alpha_v=lav,
        grad_theta=gt,
        lbeta1_u=lb,
        d3_u=_sq(g, u, k3sq),
        grad_u=_sq(g, u, ksq),
        grad_v=_sq(g, v, ksq),
        lap_theta=_sq(g, th, ksq**2),
        lap_u=_sq(g, u, ksq**2),
        lap_v=_sq(g, v, ksq**2),
        lambda_s_u=_sq(g, u, lam**2),
        lambda_s_v=_sq(g, v, lam**2),
        lambda_s_theta=_sq(g, th, lam**2),
        damping_alias_defect=damping_alias_defect(g, u, params.beta, u_phys) if alias_defect else 0.0,
        cancel_a=canc.a,
        cancel_b=canc.b,
        cancel_c=canc.c,
        cancel_d=canc.d,
        cancel_e=canc.e,
    )
    return rec


def _record_rate(rec: DiagnosticsRecord, params: ModelParams) -> float:
    sw = params.switches
    return (
        (rec.gradh_u if sw.horizontal_viscosity else 0.0)
        + (rec.lambda_alpha_v if sw.fractional_dissipation else 0.0)
        + (rec.grad_theta if sw.thermal_diffusion else 0.0)
        + (rec.lbeta1_u if sw.damping else 0.0)
    )


class Recorder:
    """Callable diagnostics hook for :func:`integrate` bound to one run."""

    def __init__(self, params: ModelParams, lambda_s: float = DEFAULT_LAMBDA_S,
                 cancellations: bool = True, alias_defect: bool = True):
        self.params = params
        self.lambda_s = lambda_s
        self.cancellations = cancellations
        self.alias_defect = alias_defect
        self.initial_energy: Optional[float] = None
        self.initial_budget = 0.0

    def __call__(self, state: State, previous: Optional[DiagnosticsRecord]) -> DiagnosticsRecord:
        if self.initial_energy is None:
            self.initial_energy = energy(state)
            self.initial_budget = state.dissipated
        return record(
            state,
            self.params,
            previous,
            initial_energy=self.initial_energy,
            budget=state.dissipated - self.initial_budget,
            lambda_s=self.lambda_s,
            cancellations=self.cancellations,
            alias_defect=self.alias_defect,
        )


def run_with_diagnostics(state0: State, params: ModelParams, cfg: StepperConfig, **kw):
    """integrate() with a fresh Recorder; returns (final_state, records)."""
    recorder = Recorder(
        params,
        lambda_s=kw.pop("lambda_s", DEFAULT_LAMBDA_S),
        cancellations=kw.pop("cancellations", True),
        alias_defect=kw.pop("alias_defect", True),
    )
    return integrate(state0, params, cfg, diagnostics=recorder, **kw)


# ---------------------------------------------------------------------------
# Bound monitoring

# columns monitored per regime (squared norms; compared after a square root)
GLOBAL_REGIME_COLUMNS = ("l2_u", "l2_v", "l2_theta", "d3_u", "grad_v", "grad_theta")
SMOOTH_REGIME_COLUMNS = GLOBAL_REGIME_COLUMNS + (
    "grad_u", "lap_theta", "lap_u", "lap_v", "lambda_s_u", "lambda_s_v", "lambda_s_theta",
)
_NORM_COLUMNS = ("l2_u", "l2_v", "l2_theta")


@dataclass(frozen=True)
class QuantityVerdict:
    name: str
    initial: float
    maximum: float
    ceiling: float
    bounded: bool
    first_exceedance_time: Optional[float]


@dataclass(frozen=True)
class BoundVerdict:
    regime: str
    regime_applies: bool
    verdict: str  # "bounded" | "unbounded"
    energy_nonincreasing: bool
    blowup_time: Optional[float]
    quantities: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.verdict == "bounded":
            return f"consistent with a priori bounds ({self.regime} regime)"
        return f"unbounded ({self.regime} regime)"


def _norm_value(rec: DiagnosticsRecord, name: str) -> float:
    value = getattr(rec, name)
    return value if name in _NORM_COLUMNS else math.sqrt(max(value, 0.0))


def bound_monitor(
    records: Sequence[DiagnosticsRecord],
    params: ModelParams,
    regime: str = "global",
    ceiling_factor: float = 10.0,
    absolute_ceiling: float = 1e8,
    blowup_time: Optional[float] = None,
    energy_tol: float = 1e-12,
) -> BoundVerdict:
    """Boundedness verdict for a finished (or aborted) run.

    A quantity is bounded when every sample is finite and stays at or below
    ``ceiling_factor`` times its initial norm (``absolute_ceiling`` when it
    starts at zero).  The total energy must not increase between samples by
    more than ``energy_tol * E(0)``.
    """
    if regime not in ("global", "smooth"):
        raise ValueError(f"unknown regime {regime!r}")
    columns = GLOBAL_REGIME_COLUMNS if regime == "global" else SMOOTH_REGIME_COLUMNS
    applies = params.in_global_regime if regime == "global" else params.in_smooth_regime
    quantities = {}
    all_bounded = blowup_time is None
    for name in columns:
        vals = [_norm_value(r, name) for r in records]
        initial = vals[0] if vals else 0.0
        ceiling = ceiling_factor * initial if initial > 0 else absolute_ceiling
        first = None
        for r, x in zip(records, vals):
            if not math.isfinite(x) or x > ceiling:
                first = r.time
                break
        if first is None and blowup_time is not None:
            first = blowup_time
        ok = first is None
        all_bounded &= ok
        quantities[name] = QuantityVerdict(
            name, initial, max(vals) if vals else 0.0, ceiling, ok, first
        )
    e0 = records[0].E if records else 0.0
    mono = all(
        b.E <= a.E + energy_tol * e0 for a, b in zip(records, records[1:])
    )
    return BoundVerdict(
        regime=regime,
        regime_applies=applies,
        verdict="bounded" if all_bounded else "unbounded",
        energy_nonincreasing=mono,
        blowup_time=blowup_time,
        quantities=quantities,
    )


# ---------------------------------------------------------------------------
# Continuous dependence on the data

@dataclass(frozen=True)
class TwinRunResult:
    epsilon: float
    times: np.ndarray
    delta: np.ndarray

    @property
    def normalised(self) -> np.ndarray:
        """delta(t) / epsilon^2 (zeros when epsilon = 0)."""
        if self.epsilon == 0:
            return np.zeros_like(self.delta)
        return self.delta / self.epsilon**2


def unit_solenoidal_perturbation(grid, seed=12345, max_mode: Optional[int] = None) -> VectorField:
    if max_mode is None:
        max_mode = max(1, min(grid.dealias_cutoff) // 2)
    w = sp.random_band_limited_field(grid, max_mode, seed, solenoidal=True)
    return w * (1.0 / sp.l2_norm(w))


def state_distance_sq(a: State, b: State) -> float:
    g = a.grid
    pa, pb = a.pack(), b.pack()
    return _sq(g, pa - pb)


def twin_run_probe(
    state0: State,
    epsilon: float,
    params: ModelParams,
    cfg: StepperConfig,
    perturbation: Optional[VectorField] = None,
) -> TwinRunResult:
    """Run the reference state and one with u0 shifted by ``epsilon * perturbation``.

    The perturbation defaults to a unit-L2 random solenoidal field.  Both runs
    take the same step sequence (the reference run's), and delta(t) =
    ||du||^2 + ||dv||^2 + ||dtheta||^2 is sampled at ``cfg.cadence``.
    """
    return twin_run_curves(state0, [epsilon], params, cfg, perturbation)[0]


def twin_run_curves(
    state0: State,
    epsilons: Sequence[float],
    params: ModelParams,
    cfg: StepperConfig,
    perturbation: Optional[VectorField] = None,
) -> list[TwinRunResult]:
    """Several perturbed twins against one shared reference run."""
    if any(e < 0 for e in epsilons):
        raise ValueError("epsilon must be >= 0")
    grid = state0.grid
    a = state0.spectral()
    if perturbation is None:
        perturbation = unit_solenoidal_perturbation(grid)
    pert = sp.leray_project(sp.as_spectral(perturbation))
    twins = [replace(a, u=a.u + pert * e) for e in epsilons]
    times = [a.time]
    deltas = [[state_distance_sq(a, b)] for b in twins]

    def finish():
        return [TwinRunResult(e, np.array(times), np.array(ds)) for e, ds in zip(epsilons, deltas)]

    if cfg.t_end <= a.time:
        return finish()

    stepper = _Stepper(grid, params, cfg.scheme)
    clock = {"t_prev": a.time, "last": None}
    nsteps = None if cfg.adaptive else fixed_step_count(cfg, a.time)

    def advance_twins(s: State, n: int):
        # the same step sizes as the reference run, bit for bit
        if nsteps is None:
            h = s.time - clock["t_prev"]
        else:
            h = fixed_step_size(cfg, a.time, n, nsteps)
        clock["t_prev"] = s.time
        for i, b in enumerate(twins):
            twins[i] = replace(_step(b, params, cfg, h, _stepper=stepper), time=s.time)
        if n % cfg.cadence == 0:
            times.append(s.time)
            for ds, b in zip(deltas, twins):
                ds.append(state_distance_sq(s, b))
        clock["last"] = s

    integrate(a, params, cfg, step_callbacks=[advance_twins])
    final = clock["last"]
    if final is not None and times[-1] != final.time:
        times.append(final.time)
        for ds, b in zip(deltas, twins):
            ds.append(state_distance_sq(final, b))
    return finish()
