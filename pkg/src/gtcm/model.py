"""Right-hand side of the generalised tropical climate system.

    u_t + (u.grad)u - Lap_h u + |u|^(beta-1) u + div(v (x) v) + grad p = 0
    v_t + (u.grad)v + (-Lap)^alpha v + (v.grad)u + grad theta       = 0
    theta_t + (u.grad)theta - Lap theta + div v                     = 0
    div u = 0

on a periodic box.  The pressure is removed with the Leray projector.  The
diagonal dissipative terms (Lap_h u, -(-Lap)^alpha v, Lap theta) are kept
apart from the rest so that the time stepper can integrate them exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import spectral as sp
from .spectral import (
    PHYSICAL,
    SPECTRAL,
    Field,
    Grid,
    GridMismatchError,
    MultiplierSpec,
    VectorField,
)

SWITCH_NAMES = (
    "horizontal_viscosity",
    "fractional_dissipation",
    "thermal_diffusion",
    "damping",
    "advection",
    "coupling",
)


@dataclass(frozen=True)
class Switches:
    """Enable flags for each group of terms.

    ``advection`` covers the three (u.grad) transport terms and ``coupling``
    the four u-v-theta exchange terms; each group conserves energy on its own,
    so any combination keeps the energy balance closed.
    """

    horizontal_viscosity: bool = True
    fractional_dissipation: bool = True
    thermal_diffusion: bool = True
    damping: bool = True
    advection: bool = True
    coupling: bool = True

    @classmethod
    def linear_only(cls) -> "Switches":
        return cls(damping=False, advection=False, coupling=False)

    def as_dict(self) -> dict[str, bool]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.5
    beta: float = 4.0
    switches: Switches = field(default_factory=Switches)
    damping_fine_grid: bool = False

    def __post_init__(self):
        if not (self.alpha >= 1 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be >= 1, got {self.alpha!r}")
        if not (self.beta >= 1 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be >= 1, got {self.beta!r}")

    @property
    def in_global_regime(self) -> bool:
        """alpha >= 3/2 and beta >= 4: global solutions are known to exist."""
        return self.alpha >= 1.5 and self.beta >= 4

    @property
    def in_smooth_regime(self) -> bool:
        """Additionally beta <= 5: global smooth solutions in H^s, s > 2."""
        return self.in_global_regime and self.beta <= 5

    def with_switches(self, **kw) -> "ModelParams":
        return replace(self, switches=replace(self.switches, **kw))


@dataclass(frozen=True, eq=False)
class State:
    """(u, v, theta) at one instant.

    ``dissipated`` carries the time-integrated dissipation budget D(t) along
    with the solution; it starts at zero for a fresh run.
    """

    u: VectorField
    v: VectorField
    theta: Field
    time: float = 0.0
    dissipated: float = 0.0

    def __post_init__(self):
        grid = self.u.grid
        if self.v.grid != grid or self.theta.grid != grid:
            raise GridMismatchError("u, v and theta must share one grid")
        if not isinstance(self.u, VectorField) or not isinstance(self.v, VectorField):
            raise TypeError("u and v must be VectorFields")
        if isinstance(self.theta, VectorField):
            raise TypeError("theta must be a scalar Field")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def spectral(self) -> "State":
        return replace(self, u=sp.as_spectral(self.u), v=sp.as_spectral(self.v),
                       theta=sp.as_spectral(self.theta))

    def physical(self) -> "State":
        return replace(self, u=sp.as_physical(self.u), v=sp.as_physical(self.v),
                       theta=sp.as_physical(self.theta))

    def pack(self) -> np.ndarray:
        """Spectral coefficients stacked as (u1, u2, u3, v1, v2, v3, theta)."""
        s = self.spectral()
        return np.concatenate([s.u.data, s.v.data, s.theta.data[None]])

    @classmethod
    def unpack(cls, grid: Grid, packed: np.ndarray, time: float = 0.0,
               dissipated: float = 0.0) -> "State":
        return cls(
            VectorField(grid, packed[0:3], SPECTRAL),
            VectorField(grid, packed[3:6], SPECTRAL),
            Field(grid, packed[6], SPECTRAL),
            time,
            dissipated,
        )

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        return cls.unpack(grid, np.zeros((7,) + grid.spectral_shape, dtype=complex))


@dataclass(frozen=True, eq=False)
class Tendency:
    """Time derivatives split into the diagonal linear part and the rest."""

    linear: State
    nonlinear: State

    @property
    def du(self) -> VectorField:
        return self.linear.u + self.nonlinear.u

    @property
    def dv(self) -> VectorField:
        return self.linear.v + self.nonlinear.v

    @property
    def dtheta(self) -> Field:
        return self.linear.theta + self.nonlinear.theta


# ---------------------------------------------------------------------------
# Pointwise and transport terms

def damping_values(u: np.ndarray, beta: float) -> np.ndarray:
    """|u|^(beta-1) u for a physical (3, ...) array; zero where u vanishes."""
    if beta < 1:
        raise ValueError(f"beta must be >= 1, got {beta!r}")
    mag_sq = np.sum(u * u, axis=0)
    if beta == 1:
        return u.copy()
    if beta == 3:
        return mag_sq * u
    if beta == 5:
        return mag_sq * mag_sq * u
    factor = np.zeros_like(mag_sq)
    np.power(mag_sq, (beta - 1) / 2, out=factor, where=mag_sq > 0)
    return factor * u


def damping_term(u: VectorField, beta: float) -> VectorField:
    if u.representation != PHYSICAL:
        raise sp.RepresentationError("damping_term requires a physical field")
    return u.with_data(damping_values(u.data, beta))


def pad_coef(grid: Grid, coef: np.ndarray, fine: Grid) -> np.ndarray:
    """Zero-pad half-spectrum coefficients onto a finer grid (Nyquist dropped)."""
    out = np.zeros(coef.shape[:-3] + fine.spectral_shape, dtype=complex)
    h1, h2, h3 = grid.n1 // 2, grid.n2 // 2, grid.n3 // 2
    lo1, lo2 = slice(0, h1), slice(0, h2)
    hi1s, hi2s = slice(grid.n1 - h1 + 1, grid.n1), slice(grid.n2 - h2 + 1, grid.n2)
    hi1f, hi2f = slice(fine.n1 - h1 + 1, fine.n1), slice(fine.n2 - h2 + 1, fine.n2)
    k3 = slice(0, h3)
    for a_src, a_dst in ((lo1, lo1), (hi1s, hi1f)):
        for b_src, b_dst in ((lo2, lo2), (hi2s, hi2f)):
            out[..., a_dst, b_dst, k3] = coef[..., a_src, b_src, k3]
    return out


def fine_grid(grid: Grid, factor: int = 2) -> Grid:
    return Grid(grid.n1 * factor, grid.n2 * factor, grid.n3 * factor, grid.l1, grid.l2, grid.l3)


def damping_coef_fine(grid: Grid, u_coef: np.ndarray, beta: float) -> np.ndarray:
    """Damping evaluated on a 2x grid and truncated back; reduces aliasing."""
    fg = fine_grid(grid)
    u_fine = sp.inverse(fg, pad_coef(grid, u_coef, fg))
    d_fine = sp.forward(fg, damping_values(u_fine, beta))
    return truncate_coef(fg, d_fine, grid)


def truncate_coef(fine: Grid, coef: np.ndarray, grid: Grid) -> np.ndarray:
    out = np.zeros(coef.shape[:-3] + grid.spectral_shape, dtype=complex)
    h1, h2, h3 = grid.n1 // 2, grid.n2 // 2, grid.n3 // 2
    for a_src, a_dst in ((slice(0, h1), slice(0, h1)),
                         (slice(fine.n1 - h1 + 1, fine.n1), slice(grid.n1 - h1 + 1, grid.n1))):
        for b_src, b_dst in ((slice(0, h2), slice(0, h2)),
                             (slice(fine.n2 - h2 + 1, fine.n2), slice(grid.n2 - h2 + 1, grid.n2))):
            out[..., a_dst, b_dst, :h3] = coef[..., a_src, b_src, :h3]
    return out


def _grad_physical(grid: Grid, coef: np.ndarray) -> np.ndarray:
    """Physical derivatives, shape (3_axes, *lead, n1, n2, n3)."""
    kd = grid.k_deriv
    return sp.inverse(grid, np.stack([1j * kd[j] * coef for j in range(3)]))


def _advect_values(w: np.ndarray, grad_f: np.ndarray) -> np.ndarray:
    # grad_f is (axis, *lead, ...); contract the axis with w
    out = w[0] * grad_f[0]
    out += w[1] * grad_f[1]
    out += w[2] * grad_f[2]
    return out


def advect(w: VectorField, f):
    """(w . grad) f in convective form, dealiased; returned spectral.

    ``w`` must be physical; ``f`` may be scalar or vector in either
    representation.  ``w`` need not be divergence free.
    """
    if w.grid != f.grid:
        raise GridMismatchError("advecting field and advected field live on different grids")
    if w.representation != PHYSICAL:
        raise sp.RepresentationError("advect requires a physical velocity")
    grid = w.grid
    f_coef = sp.as_spectral(f).data
    wd = w.data if f.ncomp == 0 else w.data[:, None]
    vals = _advect_values(wd, _grad_physical(grid, f_coef))
    return type(f)(grid, sp.forward(grid, vals) * grid.dealias_mask, SPECTRAL)


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _tensor_divergence_coef(grid: Grid, v_phys: np.ndarray) -> np.ndarray:
    prods = np.stack([v_phys[i] * v_phys[j] for i, j in _PAIRS])
    pc = sp.forward(grid, prods) * grid.dealias_mask
    sym = {}
    for n, (i, j) in enumerate(_PAIRS):
        sym[i, j] = sym[j, i] = pc[n]
    kd = grid.k_deriv
    return np.stack([1j * (kd[0] * sym[0, i] + kd[1] * sym[1, i] + kd[2] * sym[2, i])
                     for i in range(3)])


def tensor_divergence(v: VectorField) -> VectorField:
    """div(v (x) v): component i is sum_j d_j (v_j v_i), products dealiased."""
    v_phys = sp.as_physical(v).data
    return VectorField(v.grid, _tensor_divergence_coef(v.grid, v_phys), SPECTRAL)


# ---------------------------------------------------------------------------
# Right-hand side

def linear_symbols(grid: Grid, params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonal decay rates L_u, L_v, L_theta (the linear tendency is L * coef)."""
    sw = params.switches
    zero = np.zeros(grid.spectral_shape)
    lu = -sp.symbol(grid, MultiplierSpec.horizontal_laplacian()) if sw.horizontal_viscosity else zero
    lv = (-sp.symbol(grid, MultiplierSpec.fractional_laplacian(params.alpha))
          if sw.fractional_dissipation else zero)
    lt = -sp.symbol(grid, MultiplierSpec.full_laplacian()) if sw.thermal_diffusion else zero
    return lu, lv, lt


def dissipation_rate(grid: Grid, packed: np.ndarray, params: ModelParams,
                     u_phys: Optional[np.ndarray] = None) -> float:
    """|grad_h u|^2 + |Lambda^alpha v|^2 + |grad theta|^2 + |u|_{L^(beta+1)}^(beta+1).

    Only enabled terms contribute.  The last term is a grid Riemann sum.
    """
    sw = params.switches
    w = grid.parseval_weight
    total = 0.0
    if sw.horizontal_viscosity:
        total += float(np.sum(w * grid.kh_sq * np.abs(packed[0:3]) ** 2))
    if sw.fractional_dissipation:
        frac = sp.symbol(grid, MultiplierSpec.fractional_laplacian(params.alpha))
        total += float(np.sum(w * frac * np.abs(packed[3:6]) ** 2))
    if sw.thermal_diffusion:
        total += float(np.sum(w * grid.ksq * np.abs(packed[6]) ** 2))
    total *= grid.volume
    if sw.damping:
        if u_phys is None:
            u_phys = sp.inverse(grid, packed[0:3])
        mag_sq = np.sum(u_phys * u_phys, axis=0)
        total += float(np.sum(mag_sq ** ((params.beta + 1) / 2))) * grid.cell_volume
    return total


def nonlinear_packed(grid: Grid, packed: np.ndarray, params: ModelParams,
                     want_dissipation: bool = False):
    """Explicit part of the tendency on packed coefficients.

    Returns the packed tendency (and the dissipation rate when requested).
    Everything but the diagonal dissipation lives here, including the linear
    coupling terms grad(theta) and div(v).
    """
    sw = params.switches
    out = np.zeros_like(packed)
    u_c, v_c, t_c = packed[0:3], packed[3:6], packed[6]
    mask = grid.dealias_mask
    kd = grid.k_deriv
    need_u = sw.advection or sw.damping or want_dissipation

    # one batched inverse transform: [u, v, d_j u, d_j v, d_j theta]
    to_phys = []
    if need_u:
        to_phys.append(u_c)
    if sw.coupling:
        to_phys.append(v_c)
    if sw.advection or sw.coupling:
        to_phys += [1j * kd[j] * u_c for j in range(3)]
    if sw.advection:
        to_phys += [1j * kd[j] * v_c for j in range(3)]
        to_phys += [(1j * kd[j] * t_c)[None] for j in range(3)]
    phys = sp.inverse(grid, np.concatenate(to_phys)) if to_phys else None
    pos = 0

    def take(n):
        nonlocal pos
        block = phys[pos:pos + n]
        pos += n
        return block

    u_phys = take(3) if need_u else None
    v_phys = take(3) if sw.coupling else None
    grad_u = take(9).reshape(3, 3, *grid.shape) if (sw.advection or sw.coupling) else None

    # physical products, one batched forward transform:
    # [F_u (3), F_v (3), F_theta (1), v_i v_j (6)]
    fu = np.zeros((3,) + grid.shape)
    fv = np.zeros((3,) + grid.shape)
    ft = np.zeros(grid.shape)
    if sw.advection:
        grad_v = take(9).reshape(3, 3, *grid.shape)
        grad_t = take(3)
        fu += _advect_values(u_phys[:, None], grad_u)
        fv += _advect_values(u_phys[:, None], grad_v)
        ft += _advect_values(u_phys, grad_t)
    if sw.damping and not params.damping_fine_grid:
        fu += damping_values(u_phys, params.beta)
    if sw.coupling:
        # (v.grad)u belongs to the v equation
        fv += _advect_values(v_phys[:, None], grad_u)
        prods = np.stack([v_phys[i] * v_phys[j] for i, j in _PAIRS])
        batch = np.concatenate([fu, fv, ft[None], prods])
    else:
        batch = np.concatenate([fu, fv, ft[None]])
    spec = sp.forward(grid, batch) * mask
    fu_c, fv_c, ft_c = spec[0:3], spec[3:6], spec[6]

    if sw.damping and params.damping_fine_grid:
        fu_c += damping_coef_fine(grid, u_c, params.beta) * mask
    if sw.coupling:
        sym = {}
        for n, (i, j) in enumerate(_PAIRS):
            sym[i, j] = sym[j, i] = spec[7 + n]
        for i in range(3):
            fu_c[i] += 1j * (kd[0] * sym[0, i] + kd[1] * sym[1, i] + kd[2] * sym[2, i])
            fv_c[i] += 1j * kd[i] * t_c
        ft_c = ft_c + sp.divergence_coef(grid, v_c)
    out[0:3] = -sp.leray_coef(grid, fu_c)
    out[3:6] = -fv_c
    out[6] = -ft_c

    if want_dissipation:
        return out, dissipation_rate(grid, packed, params, u_phys)
    return out


def _check_state(state: State) -> None:
    if not isinstance(state, State):
        raise TypeError("expected a State")


def rhs(state: State, params: ModelParams) -> Tendency:
    """Full tendency, with the diagonal dissipation reported separately."""
    _check_state(state)
    grid = state.grid
    packed = state.pack()
    lu, lv, lt = linear_symbols(grid, params)
    lin = np.concatenate([lu * packed[0:3], lv * packed[3:6], (lt * packed[6])[None]])
    nl = nonlinear_packed(grid, packed, params)
    return Tendency(State.unpack(grid, lin, state.time), State.unpack(grid, nl, state.time))


def u_forcing(state: State, params: ModelParams) -> VectorField:
    """(u.grad)u + |u|^(beta-1)u + div(v (x) v) before projection (enabled terms only)."""
    grid = state.grid
    s = state.spectral()
    sw = params.switches
    u_phys = sp.inverse(grid, s.u.data)
    total = np.zeros_like(s.u.data)
    if sw.advection:
        total += advect(VectorField(grid, u_phys), s.u).data
    if sw.damping:
        if params.damping_fine_grid:
            total += damping_coef_fine(grid, s.u.data, params.beta) * grid.dealias_mask
        else:
            total += sp.forward(grid, damping_values(u_phys, params.beta)) * grid.dealias_mask
    if sw.coupling:
        total += tensor_divergence(s.v).data * grid.dealias_mask
    return VectorField(grid, total, SPECTRAL)


def pressure_recover(state: State, params: ModelParams) -> Field:
    """Zero-mean pressure p = (-Lap)^-1 div F, F the unprojected u forcing.

    Then grad p = -(I - P) F, so u_t = -F - grad p + Lap_h u is the projected
    equation.
    """
    forcing = u_forcing(state, params)
    grid = state.grid
    div = sp.divergence_coef(grid, forcing.data)
    p = div * sp.symbol(grid, MultiplierSpec.inverse_laplacian())
    return Field(grid, p, SPECTRAL)


# ---------------------------------------------------------------------------
# Initial conditions

IC_KINDS = ("taylor_green", "random_band", "from_checkpoint")


def _trig_coef(grid: Grid, amplitude: float, factors) -> np.ndarray:
    """Exact half-spectrum coefficients of amplitude * f1(x1) f2(x2) f3(x3).

    Each factor is ("sin" | "cos", mode number) with mode number >= 1.
    Coefficients are +-1/2 and +-i/2 products, so they carry no transform
    round-off.
    """
    vecs = []
    for (kind, m), n in zip(factors, grid.shape):
        c = np.zeros(n, dtype=complex)
        if kind == "cos":
            c[m % n] += 0.5
            c[-m % n] += 0.5
        else:
            c[m % n] += -0.5j
            c[-m % n] += 0.5j
        vecs.append(c)
    full = amplitude * np.einsum("i,j,k->ijk", *vecs)
    return full[:, :, : grid.n3 // 2 + 1]


def taylor_green(grid: Grid, amplitude: float = 1.0) -> State:
    """Classical Taylor-Green velocity, a shifted copy for v, one vertical mode for theta.

    u = A (sin x1 cos x2 cos x3, -cos x1 sin x2 cos x3, 0); v is u shifted by a
    quarter period in x1 and x3, i.e. A (-cos x1 cos x2 sin x3,
    -sin x1 sin x2 sin x3, 0); theta = A sin x3 (angles scaled to the box).
    """
    zero = np.zeros(grid.spectral_shape, dtype=complex)
    u = np.stack([
        _trig_coef(grid, amplitude, (("sin", 1), ("cos", 1), ("cos", 1))),
        _trig_coef(grid, -amplitude, (("cos", 1), ("sin", 1), ("cos", 1))),
        zero,
    ])
    v = np.stack([
        _trig_coef(grid, -amplitude, (("cos", 1), ("cos", 1), ("sin", 1))),
        _trig_coef(grid, -amplitude, (("sin", 1), ("sin", 1), ("sin", 1))),
        zero,
    ])
    theta = np.zeros(grid.spectral_shape, dtype=complex)
    theta[0, 0, 1] = -0.5j * amplitude
    return State(
        VectorField(grid, u, SPECTRAL),
        VectorField(grid, v, SPECTRAL),
        Field(grid, theta, SPECTRAL),
    )


def random_band_state(grid: Grid, amplitude: float, seed, max_mode: Optional[int] = None) -> State:
    """Random band-limited state; each field scaled to L2 norm ``amplitude``."""
    if max_mode is None:
        max_mode = max(1, min(grid.dealias_cutoff) // 2)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    su, sv, st = ss.spawn(3)
    u = sp.random_band_limited_field(grid, max_mode, su, solenoidal=True)
    v = sp.random_band_limited_field(grid, max_mode, sv, vector=True)
    theta = sp.random_band_limited_field(grid, max_mode, st)

    def scaled(f):
        n = sp.l2_norm(f)
        return f * (amplitude / n) if n > 0 else f

    return State(scaled(u), scaled(v), scaled(theta))


def initial_condition(kind: str, grid: Grid, amplitude: float = 1.0, seed=0,
                      path=None, max_mode: Optional[int] = None) -> State:
    if not (amplitude >= 0):
        raise ValueError(f"amplitude must be >= 0, got {amplitude!r}")
    if kind == "taylor_green":
        return taylor_green(grid, amplitude)
    if kind == "random_band":
        return random_band_state(grid, amplitude, seed, max_mode)
    if kind == "from_checkpoint":
        from .io import load_checkpoint

        if path is None:
            raise ValueError("from_checkpoint needs a checkpoint path")
        state, _ = load_checkpoint(path)
        if state.grid != grid:
            raise GridMismatchError("checkpoint grid differs from the configured grid")
        return state
    raise ValueError(f"unknown initial condition kind {kind!r}; expected one of {IC_KINDS}")
