"""Empirical constants for anisotropic and interpolation inequalities.

Each bench draws an ensemble of random band-limited fields, evaluates the
ratio of the left side to the right side of one inequality, and reports the
worst case.  On the torus two adaptations are needed and are stated in every
report:

* horizontal-l4: |psi|^2_{L^2_v(L^4_h)} <= C |psi| |grad_h psi| fails for
  fields constant in (x1, x2), so samples have their horizontal mean removed.
* vertical-trace: the fundamental theorem of calculus no longer starts from a
  vanishing value at -infinity, so the vertical mean |psi|^2 / l3 is
  subtracted from the left side before the ratio is taken.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import spectral as sp
from .spectral import SPECTRAL, Field, Grid, MultiplierSpec

BENCH_IDS = ("horizontal-l4", "vertical-trace", "interpolation")
INTERPOLATION_ALPHA_RANGE = (1.25, 2.5)
DEGENERATE_RTOL = 1e-13

TORUS_NOTES = {
    "horizontal-l4": "torus adaptation: samples have zero horizontal mean",
    "vertical-trace": "torus adaptation: ratio = (max_x3 |psi(.,x3)|^2_{L2_h} - |psi|^2/l3) / (|psi| |d3 psi|)",
    "interpolation": "torus adaptation: samples have zero mean",
}


@dataclass(frozen=True)
class EnsembleConfig:
    grid: Grid = field(default_factory=lambda: Grid.cube(32))
    size: int = 1000
    max_mode: int = 5
    base_seed: int = 0
    alpha: float = 1.5
    workers: int = 1

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("ensemble size must be >= 0")


@dataclass(frozen=True)
class BenchReport:
    bench_id: str
    ensemble_size: int
    evaluated: int
    skipped: int
    max_ratio: float
    argmax_seed: Optional[int]
    grid: tuple
    box: tuple
    note: str
    ratios: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    alpha: Optional[float] = None

    def summary(self) -> str:
        lines = [
            f"bench            : {self.bench_id}",
            f"ensemble size    : {self.ensemble_size} ({self.evaluated} evaluated, {self.skipped} degenerate skipped)",
            f"max ratio (C_emp): {self.max_ratio!r}",
            f"argmax sample    : {self.argmax_seed}",
            f"grid             : {self.grid[0]}x{self.grid[1]}x{self.grid[2]}",
            f"box              : {self.box[0]!r} x {self.box[1]!r} x {self.box[2]!r}",
        ]
        if self.alpha is not None:
            lines.append(f"alpha            : {self.alpha!r}")
        lines.append(f"note             : {self.note}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Per-field ratios; None marks a degenerate sample (right side vanishes)

def _rhs_degenerate(rhs: float, psi_norm: float) -> bool:
    return rhs <= DEGENERATE_RTOL * psi_norm**2 or psi_norm == 0


def horizontal_l4_ratio(psi: Field) -> Optional[float]:
    psi_s = sp.as_spectral(psi)
    psi_p = sp.as_physical(psi)
    n = sp.l2_norm(psi_s)
    gh = math.sqrt(sp.spectral_sq_sum(psi_s.grid, psi_s.data * np.sqrt(psi_s.grid.kh_sq)))
    rhs = n * gh
    if _rhs_degenerate(rhs, n):
        return None
    lhs = sp.anisotropic_mixed_norm(psi_p, 4, 2, transposed=True) ** 2
    return lhs / rhs


def vertical_trace_ratio(psi: Field) -> Optional[float]:
    psi_s = sp.as_spectral(psi)
    psi_p = sp.as_physical(psi)
    g = psi_s.grid
    n = sp.l2_norm(psi_s)
    d3 = sp.l2_norm(sp.derivative(psi_s, 3))
    rhs = n * d3
    if _rhs_degenerate(rhs, n):
        return None
    trace = sp.anisotropic_mixed_norm(psi_p, 2, math.inf, transposed=True) ** 2
    return (trace - n * n / g.l3) / rhs


def interpolation_exponents(alpha: float) -> tuple[float, float]:
    """(q, theta) with |psi|_{L^q} <= C |psi|^(1-theta) |Lambda^alpha psi|^theta.

    q = 3/(alpha-1) and theta = (5-2alpha)/(2alpha), from the embedding
    H^((5-2alpha)/2) in L^q interpolated between L^2 and H^alpha.
    """
    lo, hi = INTERPOLATION_ALPHA_RANGE
    if not (lo <= alpha < hi):
        raise ValueError(f"interpolation bench needs {lo} <= alpha < {hi}, got {alpha!r}")
    return 3.0 / (alpha - 1.0), (5.0 - 2.0 * alpha) / (2.0 * alpha)


def interpolation_ratio(psi: Field, alpha: float) -> Optional[float]:
    q, theta = interpolation_exponents(alpha)
    psi_s = sp.as_spectral(psi)
    n = sp.l2_norm(psi_s)
    la = sp.l2_norm(sp.apply_multiplier(psi_s, MultiplierSpec.lambda_power(alpha)))
    rhs = n ** (1 - theta) * la**theta if n > 0 else 0.0
    if n == 0 or la <= DEGENERATE_RTOL * n:
        return None
    return sp.lp_norm(sp.as_physical(psi), q) / rhs


# ---------------------------------------------------------------------------
# Ensembles

def sample_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, index])


def ensemble_sample(cfg: EnsembleConfig, index: int, bench_id: str) -> Field:
    psi = sp.random_band_limited_field(cfg.grid, cfg.max_mode, sample_seed(cfg.base_seed, index))
    data = psi.data.copy()
    if bench_id == "horizontal-l4":
        data[0, 0, :] = 0.0
    elif bench_id == "interpolation":
        data[0, 0, 0] = 0.0
    return Field(cfg.grid, data, SPECTRAL)


def _ratio_fn(bench_id: str, alpha: float) -> Callable[[Field], Optional[float]]:
    if bench_id == "horizontal-l4":
        return horizontal_l4_ratio
    if bench_id == "vertical-trace":
        return vertical_trace_ratio
    if bench_id == "interpolation":
        interpolation_exponents(alpha)
        return lambda psi: interpolation_ratio(psi, alpha)
    raise ValueError(f"unknown bench id {bench_id!r}; expected one of {BENCH_IDS}")


def _evaluate(args) -> float:
    bench_id, cfg, index = args
    r = _ratio_fn(bench_id, cfg.alpha)(ensemble_sample(cfg, index, bench_id))
    return math.nan if r is None else r


def run_bench(bench_id: str, cfg: EnsembleConfig) -> BenchReport:
    """Evaluate the ensemble; NaN entries in ``ratios`` are degenerate samples."""
    _ratio_fn(bench_id, cfg.alpha)
    jobs = [(bench_id, cfg, i) for i in range(cfg.size)]
    if cfg.workers > 1 and cfg.size > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            ratios = np.array(list(pool.map(_evaluate, jobs, chunksize=32)))
    else:
        ratios = np.array([_evaluate(j) for j in jobs], dtype=float)
    valid = ~np.isnan(ratios)
    if valid.any():
        # first index attaining the max, independent of evaluation order
        best = int(np.nanargmax(ratios))
        max_ratio = float(ratios[best])
    else:
        best, max_ratio = None, 0.0
    g = cfg.grid
    return BenchReport(
        bench_id=bench_id,
        ensemble_size=cfg.size,
        evaluated=int(valid.sum()),
        skipped=int((~valid).sum()),
        max_ratio=max_ratio,
        argmax_seed=best,
        grid=g.shape,
        box=g.lengths,
        note=TORUS_NOTES[bench_id],
        ratios=ratios,
        alpha=cfg.alpha if bench_id == "interpolation" else None,
    )


def bench_horizontal_l4(cfg: EnsembleConfig) -> BenchReport:
    return run_bench("horizontal-l4", cfg)


def bench_vertical_trace(cfg: EnsembleConfig) -> BenchReport:
    return run_bench("vertical-trace", cfg)


def bench_interpolation(cfg: EnsembleConfig) -> BenchReport:
    return run_bench("interpolation", cfg)
