"""Integrating-factor Runge-Kutta time stepping.

For y' = L y + N(y) with L diagonal in Fourier space, the stiff decay is
absorbed exactly through exp(L h) and only N is treated explicitly.  The
default scheme is Kutta's third-order method (nodes 0, 1/2, 1), whose
integrating-factor form only ever needs exp(L h) for h >= 0, so no stage
amplifies the high modes.

The cumulative dissipation budget D(t) is integrated alongside the state with
the same stage weights, which keeps 2E(t) + D(t) - 2E(0) at the order of the
scheme.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

import numpy as np

from . import spectral as sp
from .model import ModelParams, State, dissipation_rate, linear_symbols, nonlinear_packed

log = logging.getLogger(__name__)

SCHEMES = ("if_rk3", "if_euler")
BLOWUP_GRAD_U = 1e8


class BlowUpError(RuntimeError):
    """Non-finite values or runaway gradients; carries the detection time."""

    def __init__(self, time: float, reason: str, records: Optional[list] = None):
        super().__init__(f"blow-up detected at t={time:.6g}: {reason}")
        self.time = time
        self.reason = reason
        self.records = records if records is not None else []


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "if_rk3"
    dt: Optional[float] = 1e-3
    cfl_safety: float = 0.5
    dt_max: float = 1e-2
    t_end: float = 1.0
    cadence: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety!r}")
        if not (self.dt_max > 0):
            raise ValueError(f"dt_max must be positive, got {self.dt_max!r}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end!r}")
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise ValueError(f"cadence must be a positive integer, got {self.cadence!r}")

    @property
    def adaptive(self) -> bool:
        return self.dt is None


def cfl_dt(state: State, params: ModelParams, cfg: StepperConfig) -> float:
    """Advective CFL step capped by the explicit damping stability bound.

    Both velocities (u advects, v advects u in the coupling) enter the
    advective limit.  Returns ``cfg.dt_max`` for a state at rest.
    """
    grid = state.grid
    s = state.physical()
    dt = math.inf
    for vel in (s.u.data, s.v.data):
        for axis, h in enumerate(grid.spacing):
            vmax = float(np.max(np.abs(vel[axis])))
            if vmax > 0:
                dt = min(dt, cfg.cfl_safety * h / vmax)
    if params.switches.damping:
        umax = float(np.max(np.sqrt(np.sum(s.u.data**2, axis=0))))
        rate = umax ** (params.beta - 1) if umax > 0 else 0.0
        if rate > 0:
            dt = min(dt, cfg.cfl_safety / rate)
    return cfg.dt_max if math.isinf(dt) else min(dt, cfg.dt_max)


class _Stepper:
    """Caches the packed decay rates and exponentials for one (grid, params)."""

    def __init__(self, grid: sp.Grid, params: ModelParams, scheme: str):
        self.grid = grid
        self.params = params
        self.scheme = scheme
        lu, lv, lt = linear_symbols(grid, params)
        self.rates = np.stack([lu, lu, lu, lv, lv, lv, lt])
        self._exp_cache: dict[float, np.ndarray] = {}

    def expo(self, h: float) -> np.ndarray:
        e = self._exp_cache.get(h)
        if e is None:
            if len(self._exp_cache) > 8:
                self._exp_cache.clear()
            e = np.exp(self.rates * h)
            self._exp_cache[h] = e
        return e

    def _n(self, y):
        return nonlinear_packed(self.grid, y, self.params, want_dissipation=True)

    def _project(self, y):
        y[0:3] = sp.leray_coef(self.grid, y[0:3])
        return y

    def advance(self, y0: np.ndarray, h: float) -> tuple[np.ndarray, float]:
        """One step of size h; returns (new packed state, budget increment)."""
        e1 = self.expo(h)
        k1, f1 = self._n(y0)
        if self.scheme == "if_euler":
            y = self._project(e1 * (y0 + h * k1))
            return y, 2 * h * f1
        e_half = self.expo(h / 2)
        y2 = self._project(e_half * (y0 + (h / 2) * k1))
        k2, f2 = self._n(y2)
        e1k1 = e1 * k1
        ehk2 = e_half * k2
        y3 = self._project(e1 * y0 - h * e1k1 + 2 * h * ehk2)
        k3, f3 = self._n(y3)
        y = self._project(e1 * y0 + h * (e1k1 / 6 + (2.0 / 3.0) * ehk2 + k3 / 6))
        return y, 2 * h * (f1 / 6 + (2.0 / 3.0) * f2 + f3 / 6)


def _blowup_check(grid: sp.Grid, y: np.ndarray, time: float) -> None:
    if not np.all(np.isfinite(y)):
        raise BlowUpError(time, "non-finite values")
    grad_u_sq = grid.volume * float(np.sum(grid.parseval_weight * grid.ksq * np.abs(y[0:3]) ** 2))
    if not math.isfinite(grad_u_sq) or math.sqrt(grad_u_sq) > BLOWUP_GRAD_U:
        raise BlowUpError(time, f"|grad u| exceeded {BLOWUP_GRAD_U:g}")


def step(state: State, params: ModelParams, cfg: StepperConfig, dt: Optional[float] = None,
         _stepper: Optional[_Stepper] = None) -> State:
    """Advance one step of size ``dt`` (default: cfg.dt, or the CFL step when adaptive)."""
    if dt is None:
        dt = cfg.dt if cfg.dt is not None else cfl_dt(state, params, cfg)
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    stepper = _stepper or _Stepper(state.grid, params, cfg.scheme)
    y, dd = stepper.advance(state.pack(), dt)
    t = state.time + dt
    _blowup_check(state.grid, y, t)
    if not math.isfinite(dd):
        raise BlowUpError(t, "non-finite dissipation")
    return State.unpack(state.grid, y, t, state.dissipated + dd)


Callback = Callable[[State, int], None]


def fixed_step_count(cfg: StepperConfig, t_start: float) -> int:
    return max(1, math.ceil((cfg.t_end - t_start) / cfg.dt - 1e-9))


def fixed_step_size(cfg: StepperConfig, t_start: float, n: int, nsteps: int) -> float:
    """Size of step n (1-based) of a fixed-dt run; the last one lands on t_end."""
    return cfg.dt if n < nsteps else (cfg.t_end - t_start) - cfg.dt * (nsteps - 1)


def integrate(
    state0: State,
    params: ModelParams,
    cfg: StepperConfig,
    callbacks: Iterable[Callback] = (),
    diagnostics=None,
    step_callbacks: Iterable[Callback] = (),
):
    """Step from state0.time to cfg.t_end.

    ``callbacks`` run at the configured cadence (including the initial and
    final states) with a snapshot and the step index; ``step_callbacks`` run
    after every step.  ``diagnostics``, if given, is a callable
    ``(state, previous_record) -> record`` whose results are collected.

    Returns ``(final_state, records)``.  On blow-up a BlowUpError is raised
    carrying the records gathered so far.
    """
    callbacks = list(callbacks)
    step_callbacks = list(step_callbacks)
    grid = state0.grid
    state = state0.spectral()
    stepper = _Stepper(grid, params, cfg.scheme)
    records: list = []
    t_end = cfg.t_end
    t_start = state.time

    def emit(s: State, n: int):
        if diagnostics is not None:
            records.append(diagnostics(s, records[-1] if records else None))
        for cb in callbacks:
            cb(s, n)

    emit(state, 0)
    if t_end <= t_start:
        return state, records

    if not cfg.adaptive:
        nsteps = fixed_step_count(cfg, t_start)
    n = 0
    emitted_last = True
    try:
        while True:
            if cfg.adaptive:
                remaining = t_end - state.time
                if remaining <= 1e-14 * max(1.0, abs(t_end)):
                    break
                h = min(cfl_dt(state, params, cfg), remaining)
            else:
                if n >= nsteps:
                    break
                h = fixed_step_size(cfg, t_start, n + 1, nsteps)
            state = step(state, params, cfg, h, _stepper=stepper)
            n += 1
            if not cfg.adaptive and n == nsteps:
                state = replace(state, time=t_end)
            for cb in step_callbacks:
                cb(state, n)
            emitted_last = n % cfg.cadence == 0
            if emitted_last:
                emit(state, n)
    except BlowUpError as err:
        log.info("%s", err)
        err.records = records
        raise
    if not emitted_last:
        emit(state, n)
    return state, records
