"""Periodic-box spectral substrate.

Fields live on a uniform grid over [0, l1) x [0, l2) x [0, l3).  The spectral
representation stores the real-to-complex half spectrum (last axis halved)
with coefficients normalised so that

    f(x) = sum_k c_k exp(i k . x),

i.e. ``c = rfftn(f) / N``.  With this convention the Parseval weight of a
stored coefficient is ``V * w_k`` where ``w_k`` is 2 for interior columns of
the halved axis and 1 for its zero and Nyquist columns.
"""
from __future__ import annotations

import functools
import math
import os
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
SPECTRAL = "spectral"

HERMITIAN_RTOL = 1e-10


class RepresentationError(ValueError):
    """Raised when a field is in the wrong representation for an operation."""


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    n1: int
    n2: int
    n3: int
    l1: float = 2 * math.pi
    l2: float = 2 * math.pi
    l3: float = 2 * math.pi

    def __post_init__(self):
        for name in ("n1", "n2", "n3"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("l1", "l2", "l3"):
            length = float(getattr(self, name))
            if not (length > 0 and math.isfinite(length)):
                raise ValueError(f"{name} must be a positive finite length, got {length!r}")
            object.__setattr__(self, name, length)

    @classmethod
    def cube(cls, n: int, length: float = 2 * math.pi) -> "Grid":
        return cls(n, n, n, length, length, length)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3 // 2 + 1)

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (self.l1, self.l2, self.l3)

    @property
    def npoints(self) -> int:
        return self.n1 * self.n2 * self.n3

    @property
    def volume(self) -> float:
        return self.l1 * self.l2 * self.l3

    @property
    def cell_volume(self) -> float:
        return self.volume / self.npoints

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.l1 / self.n1, self.l2 / self.n2, self.l3 / self.n3)

    @property
    def dealias_cutoff(self) -> tuple[int, int, int]:
        """Largest retained |index| per axis under the 2/3 rule.

        This is the largest m with 3m < n, so that quadratic products of
        retained modes never alias back onto a retained mode.
        """
        return tuple((n - 1) // 3 for n in self.shape)

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Signed wavenumber table 2*pi*m/l for axis 0, 1 or 2 (full length n)."""
        n = self.shape[axis]
        return 2 * math.pi * np.fft.fftfreq(n, 1.0 / n) / self.lengths[axis]

    def indices(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return np.fft.fftfreq(n, 1.0 / n).astype(int)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates (x1, x2, x3)."""
        x1 = np.arange(self.n1) * (self.l1 / self.n1)
        x2 = np.arange(self.n2) * (self.l2 / self.n2)
        x3 = np.arange(self.n3) * (self.l3 / self.n3)
        return x1[:, None, None], x2[None, :, None], x3[None, None, :]

    # Spectral tables on the half-spectrum layout.  Shapes broadcast against
    # spectral_shape.

    @cached_property
    def index_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m1 = self.indices(0)[:, None, None]
        m2 = self.indices(1)[None, :, None]
        m3 = np.arange(self.n3 // 2 + 1)[None, None, :]
        return m1, m2, m3

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k1 = self.wavenumbers(0)[:, None, None]
        k2 = self.wavenumbers(1)[None, :, None]
        k3 = (2 * math.pi / self.l3) * np.arange(self.n3 // 2 + 1, dtype=float)[None, None, :]
        return k1, k2, k3

    @cached_property
    def k_deriv(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers for odd symbols: the Nyquist entry is zeroed."""
        out = []
        for axis, (kk, mm) in enumerate(zip(self.k, self.index_tables)):
            kd = kk.copy()
            kd[np.abs(mm) == self.shape[axis] // 2] = 0.0
            out.append(kd)
        return tuple(out)

    @cached_property
    def ksq(self) -> np.ndarray:
        k1, k2, k3 = self.k
        return k1**2 + k2**2 + k3**2

    @cached_property
    def kh_sq(self) -> np.ndarray:
        k1, k2, _ = self.k
        return np.broadcast_to(k1**2 + k2**2, (self.n1, self.n2, 1))

    @cached_property
    def parseval_weight(self) -> np.ndarray:
        w = np.full(self.n3 // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        c1, c2, c3 = self.dealias_cutoff
        m1, m2, m3 = self.index_tables
        return (np.abs(m1) <= c1) & (np.abs(m2) <= c2) & (np.abs(m3) <= c3)

    @cached_property
    def leray_tensor(self) -> np.ndarray:
        """Per-mode projector I - k k^T/|k|^2 built on derivative wavenumbers."""
        kd = np.broadcast_arrays(*self.k_deriv)
        kd_sq = kd[0] ** 2 + kd[1] ** 2 + kd[2] ** 2
        inv = np.divide(1.0, kd_sq, out=np.zeros_like(kd_sq), where=kd_sq > 0)
        proj = np.empty((3, 3) + self.spectral_shape)
        for i in range(3):
            for j in range(3):
                proj[i, j] = (1.0 if i == j else 0.0) - kd[i] * kd[j] * inv
        return proj


@dataclass(frozen=True, eq=False)
class Field:
    """A scalar field in physical or spectral representation.

    ``data`` has shape ``grid.shape`` (physical, real) or
    ``grid.spectral_shape`` (spectral, complex).  Fields are treated as
    immutable values; operations return new fields.
    """

    grid: Grid
    data: np.ndarray
    representation: str = PHYSICAL

    ncomp = 0

    def __post_init__(self):
        if self.representation not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"unknown representation {self.representation!r}")
        expected = self.grid.shape if self.representation == PHYSICAL else self.grid.spectral_shape
        lead = (self.ncomp,) if self.ncomp else ()
        if self.data.shape != lead + expected:
            raise ValueError(
                f"data shape {self.data.shape} does not match {lead + expected} "
                f"for a {self.representation} {type(self).__name__}"
            )

    @property
    def is_spectral(self) -> bool:
        return self.representation == SPECTRAL

    def with_data(self, data: np.ndarray, representation: Optional[str] = None):
        return type(self)(self.grid, data, representation or self.representation)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_data(self.data - other.data)

    def __mul__(self, scalar):
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_data(-self.data)


@dataclass(frozen=True, eq=False)
class VectorField(Field):
    """Three components sharing one grid and representation; data is (3, ...)."""

    ncomp = 3

    @classmethod
    def from_components(cls, components) -> "VectorField":
        components = list(components)
        if len(components) != 3:
            raise ValueError("a VectorField needs exactly three components")
        grid = components[0].grid
        rep = components[0].representation
        for c in components[1:]:
            if c.grid != grid:
                raise GridMismatchError("components live on different grids")
            if c.representation != rep:
                raise RepresentationError("components have different representations")
        return cls(grid, np.stack([c.data for c in components]), rep)

    def component(self, i: int) -> Field:
        """Component i in 1..3."""
        return Field(self.grid, self.data[i - 1], self.representation)

    @property
    def components(self) -> tuple[Field, Field, Field]:
        return tuple(self.component(i) for i in (1, 2, 3))


AnyField = Union[Field, VectorField]


def _check_compatible(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    if a.representation != b.representation:
        raise RepresentationError("fields are in different representations")
    if a.ncomp != b.ncomp:
        raise ValueError("cannot combine scalar and vector fields")


def _require(f: Field, representation: str, op: str) -> None:
    if f.representation != representation:
        raise RepresentationError(f"{op} requires a {representation} field, got {f.representation}")


# ---------------------------------------------------------------------------
# Raw-array transforms (used directly by the hot paths)

_AXES = (-3, -2, -1)

try:  # FFTW is ~3x faster than pocketfft on these sizes; optional
    import pyfftw as _pyfftw
except ImportError:  # pragma: no cover - depends on the environment
    _pyfftw = None

FFT_BACKEND = os.environ.get("GTCM_FFT", "fftw" if _pyfftw is not None else "scipy")
if FFT_BACKEND not in ("fftw", "scipy"):
    raise ImportError(f"GTCM_FFT must be 'fftw' or 'scipy', got {FFT_BACKEND!r}")
if FFT_BACKEND == "fftw" and _pyfftw is None:
    raise ImportError("GTCM_FFT=fftw requested but pyfftw is not installed")

# plans own their buffers, so keep them per thread
_plans = threading.local()


def _plan(kind: str, shape: tuple, real_shape: tuple):
    cache = getattr(_plans, "cache", None)
    if cache is None:
        cache = _plans.cache = {}
    key = (kind, shape, real_shape)
    plan = cache.get(key)
    if plan is None:
        if kind == "r2c":
            buf = _pyfftw.empty_aligned(shape, dtype=float)
            plan = _pyfftw.builders.rfftn(buf, axes=_AXES, planner_effort="FFTW_ESTIMATE", threads=1)
        else:
            buf = _pyfftw.empty_aligned(shape, dtype=complex)
            plan = _pyfftw.builders.irfftn(buf, s=real_shape, axes=_AXES,
                                           planner_effort="FFTW_ESTIMATE", threads=1)
        cache[key] = plan
    return plan


def forward(grid: Grid, data: np.ndarray) -> np.ndarray:
    """Physical -> half-spectrum coefficients over the last three axes."""
    if FFT_BACKEND == "scipy":
        return sfft.rfftn(data, axes=_AXES, norm="forward")
    plan = _plan("r2c", data.shape, grid.shape)
    plan.input_array[...] = data
    return plan() * (1.0 / grid.npoints)


def inverse(grid: Grid, coef: np.ndarray) -> np.ndarray:
    if FFT_BACKEND == "scipy":
        return sfft.irfftn(coef, s=grid.shape, axes=_AXES, norm="forward")
    plan = _plan("c2r", coef.shape, grid.shape)
    # c2r transforms overwrite their input, which is why the plan owns it
    plan.input_array[...] = coef
    return plan(normalise_idft=False).copy()


def hermitian_defect(grid: Grid, coef: np.ndarray) -> float:
    """Largest violation of c(-k) = conj(c(k)) on the self-paired planes.

    Only the zero and Nyquist planes of the halved axis carry a constraint;
    every other stored coefficient has its partner implied by the layout.
    """
    worst = 0.0
    for plane in (0, grid.n3 // 2):
        c = coef[..., plane]
        flipped = np.roll(np.flip(c, axis=(-2, -1)), shift=(1, 1), axis=(-2, -1))
        worst = max(worst, float(np.max(np.abs(c - np.conj(flipped)), initial=0.0)))
    return worst


def to_spectral(f: AnyField) -> AnyField:
    _require(f, PHYSICAL, "to_spectral")
    if np.iscomplexobj(f.data):
        raise RepresentationError("physical data must be real")
    return f.with_data(forward(f.grid, f.data), SPECTRAL)


def to_physical(f: AnyField) -> AnyField:
    _require(f, SPECTRAL, "to_physical")
    scale = float(np.max(np.abs(f.data), initial=0.0))
    defect = hermitian_defect(f.grid, f.data)
    if defect > HERMITIAN_RTOL * scale + 1e-300:
        raise RepresentationError(
            f"spectral data is not Hermitian symmetric (defect {defect:.3e}, scale {scale:.3e})"
        )
    return f.with_data(inverse(f.grid, f.data), PHYSICAL)


def as_spectral(f: AnyField) -> AnyField:
    return f if f.is_spectral else to_spectral(f)


def as_physical(f: AnyField) -> AnyField:
    return f if not f.is_spectral else to_physical(f)


# ---------------------------------------------------------------------------
# Fourier multipliers

MULTIPLIER_KINDS = (
    "fractional_laplacian",
    "horizontal_laplacian",
    "full_laplacian",
    "derivative",
    "inverse_laplacian_zero_mean",
    "lambda_power",
    "bessel_power",
    "anisotropic_weight",
    "homogeneous_anisotropic_weight",
)


@dataclass(frozen=True)
class MultiplierSpec:
    """A diagonal Fourier-space operator.

    ``derivative`` takes ``axis`` in 1..3; ``fractional_laplacian`` takes
    ``alpha``; the power and weight kinds take ``s`` (and ``s_prime``).
    ``bessel_power(s)`` is (1 + |k|^2)^(s/2).
    """

    kind: str
    alpha: Optional[float] = None
    s: Optional[float] = None
    s_prime: Optional[float] = None
    axis: Optional[int] = None

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind == "fractional_laplacian":
            if self.alpha is None or not (self.alpha >= 0):
                raise ValueError("fractional_laplacian needs alpha >= 0")
        if self.kind == "derivative" and self.axis not in (1, 2, 3):
            raise ValueError("derivative axis must be 1, 2 or 3")
        if self.kind in ("lambda_power", "bessel_power", "anisotropic_weight",
                         "homogeneous_anisotropic_weight"):
            if self.s is None or not math.isfinite(self.s):
                raise ValueError(f"{self.kind} needs a finite s")
        if self.kind in ("anisotropic_weight", "homogeneous_anisotropic_weight"):
            if self.s_prime is None or not math.isfinite(self.s_prime):
                raise ValueError(f"{self.kind} needs a finite s_prime")

    @classmethod
    def fractional_laplacian(cls, alpha: float) -> "MultiplierSpec":
        return cls("fractional_laplacian", alpha=float(alpha))

    @classmethod
    def horizontal_laplacian(cls) -> "MultiplierSpec":
        return cls("horizontal_laplacian")

    @classmethod
    def full_laplacian(cls) -> "MultiplierSpec":
        return cls("full_laplacian")

    @classmethod
    def derivative(cls, axis: int) -> "MultiplierSpec":
        return cls("derivative", axis=axis)

    @classmethod
    def inverse_laplacian(cls) -> "MultiplierSpec":
        return cls("inverse_laplacian_zero_mean")

    @classmethod
    def lambda_power(cls, s: float) -> "MultiplierSpec":
        return cls("lambda_power", s=float(s))

    @classmethod
    def bessel_power(cls, s: float) -> "MultiplierSpec":
        return cls("bessel_power", s=float(s))

    @classmethod
    def anisotropic_weight(cls, s: float, s_prime: float, homogeneous: bool = False) -> "MultiplierSpec":
        kind = "homogeneous_anisotropic_weight" if homogeneous else "anisotropic_weight"
        return cls(kind, s=float(s), s_prime=float(s_prime))


def _power(base: np.ndarray, exponent: float) -> np.ndarray:
    # |k|^p with the zero mode mapped to 0 for p != 0 (pseudo-inverse for p < 0)
    if exponent == 0:
        return np.ones_like(base)
    out = np.zeros_like(base)
    np.power(base, exponent, out=out, where=base > 0)
    return out


@functools.lru_cache(maxsize=128)
def symbol(grid: Grid, spec: MultiplierSpec) -> np.ndarray:
    """The multiplier array for ``spec`` on ``grid`` (read-only, cached)."""
    k1, k2, k3 = grid.k
    kind = spec.kind
    if kind == "fractional_laplacian":
        out = _power(np.sqrt(grid.ksq), 2 * spec.alpha)
    elif kind == "horizontal_laplacian":
        out = np.broadcast_to(grid.kh_sq, grid.spectral_shape).copy()
    elif kind == "full_laplacian":
        out = grid.ksq.copy()
    elif kind == "derivative":
        kd = grid.k_deriv[spec.axis - 1]
        out = np.broadcast_to(1j * kd, grid.spectral_shape).copy()
    elif kind == "inverse_laplacian_zero_mean":
        out = _power(grid.ksq, -1.0)
    elif kind == "lambda_power":
        out = _power(np.sqrt(grid.ksq), spec.s)
    elif kind == "bessel_power":
        out = (1.0 + grid.ksq) ** (spec.s / 2)
    elif kind == "anisotropic_weight":
        out = (1.0 + grid.kh_sq) ** (spec.s / 2) * (1.0 + k3**2) ** (spec.s_prime / 2)
    else:  # homogeneous_anisotropic_weight
        out = _power(np.sqrt(grid.kh_sq), spec.s) * _power(np.abs(k3), spec.s_prime)
    out = np.broadcast_to(out, grid.spectral_shape).copy()
    out.flags.writeable = False
    return out


def apply_multiplier(f: AnyField, m: MultiplierSpec) -> AnyField:
    _require(f, SPECTRAL, "apply_multiplier")
    return f.with_data(f.data * symbol(f.grid, m))


def derivative(f: AnyField, axis: int) -> AnyField:
    return apply_multiplier(f, MultiplierSpec.derivative(axis))


def gradient(f: Field) -> VectorField:
    """Spectral gradient of a scalar field (spectral in, spectral out)."""
    _require(f, SPECTRAL, "gradient")
    kd = f.grid.k_deriv
    return VectorField(f.grid, np.stack([1j * kd[i] * f.data for i in range(3)]), SPECTRAL)


def divergence(w: VectorField) -> Field:
    _require(w, SPECTRAL, "divergence")
    return Field(w.grid, divergence_coef(w.grid, w.data), SPECTRAL)


def divergence_coef(grid: Grid, coef: np.ndarray) -> np.ndarray:
    kd = grid.k_deriv
    return 1j * (kd[0] * coef[0] + kd[1] * coef[1] + kd[2] * coef[2])


def leray_coef(grid: Grid, coef: np.ndarray) -> np.ndarray:
    p = grid.leray_tensor
    return np.stack([p[i, 0] * coef[0] + p[i, 1] * coef[1] + p[i, 2] * coef[2] for i in range(3)])


def leray_project(w: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields; the mean passes through."""
    _require(w, SPECTRAL, "leray_project")
    return w.with_data(leray_coef(w.grid, w.data))


def dealias(f: AnyField, rule: str = "two_thirds") -> AnyField:
    _require(f, SPECTRAL, "dealias")
    if rule != "two_thirds":
        raise ValueError(f"unknown dealiasing rule {rule!r}")
    return f.with_data(f.data * f.grid.dealias_mask)


# ---------------------------------------------------------------------------
# Norms

def spectral_sq_sum(grid: Grid, coef: np.ndarray) -> float:
    """Squared L2 norm from coefficients (any leading component axes)."""
    return grid.volume * float(np.sum(grid.parseval_weight * (coef.real**2 + coef.imag**2)))


def spectral_inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Real L2 inner product of two real fields given by their coefficients."""
    return grid.volume * float(np.sum(grid.parseval_weight * (a.real * b.real + a.imag * b.imag)))


def l2_norm(f: AnyField) -> float:
    if f.is_spectral:
        return math.sqrt(spectral_sq_sum(f.grid, f.data))
    return math.sqrt(float(np.sum(f.data**2)) * f.grid.cell_volume)


def _magnitude(f: Field) -> np.ndarray:
    data = as_physical(f).data
    if f.ncomp:
        return np.sqrt(np.sum(data**2, axis=0))
    return np.abs(data)


def lp_norm(f: AnyField, p: float) -> float:
    """L^p norm by uniform Riemann sum; vector fields use the pointwise Euclidean magnitude."""
    if not (p >= 1):
        raise ValueError(f"p must be >= 1, got {p!r}")
    mag = _magnitude(f)
    if math.isinf(p):
        return float(np.max(mag))
    if p == 2:
        return math.sqrt(float(np.sum(mag * mag)) * f.grid.cell_volume)
    return (float(np.sum(mag**p)) * f.grid.cell_volume) ** (1.0 / p)


def _axis_norm(values: np.ndarray, p: float, axes, dvol: float) -> np.ndarray:
    if math.isinf(p):
        return np.max(values, axis=axes)
    return (np.sum(values**p, axis=axes) * dvol) ** (1.0 / p)


def anisotropic_mixed_norm(f: AnyField, p_h: float, q_v: float, transposed: bool = False) -> float:
    """Iterated norm: L^q in x3 inside and L^p in (x1, x2) outside.

    With ``transposed=True`` the order is swapped, giving L^q_v(L^p_h):
    L^p over the horizontal plane inside and L^q in x3 outside.  Either
    exponent may be ``math.inf``.
    """
    for e in (p_h, q_v):
        if not (e >= 1):
            raise ValueError(f"exponents must be >= 1 or inf, got {e!r}")
    _require(f, PHYSICAL, "anisotropic_mixed_norm")
    g = f.grid
    mag = _magnitude(f)
    dh = g.l1 / g.n1 * g.l2 / g.n2
    dv = g.l3 / g.n3
    if transposed:
        inner = _axis_norm(mag, p_h, (0, 1), dh)
        return float(_axis_norm(inner, q_v, 0, dv))
    inner = _axis_norm(mag, q_v, 2, dv)
    return float(_axis_norm(inner, p_h, (0, 1), dh))


def sobolev_norm(f: AnyField, s: float, homogeneous: bool = False) -> float:
    """H^s norm via (1 + |k|^2)^(s/2), or the Lambda^s seminorm when homogeneous."""
    f = as_spectral(f)
    m = MultiplierSpec.lambda_power(s) if homogeneous else MultiplierSpec.bessel_power(s)
    return l2_norm(apply_multiplier(f, m))


def anisotropic_sobolev_norm(f: AnyField, s: float, s_prime: float, homogeneous: bool = False) -> float:
    f = as_spectral(f)
    return l2_norm(apply_multiplier(f, MultiplierSpec.anisotropic_weight(s, s_prime, homogeneous)))


# ---------------------------------------------------------------------------
# Test-input generator

def random_band_limited_field(
    grid: Grid,
    max_mode: int,
    seed,
    solenoidal: bool = False,
    vector: bool = False,
) -> AnyField:
    """A real random field with Gaussian coefficients on |index_j| <= max_mode.

    Each coefficient has unit variance (E|c|^2 = 1) after Hermitian
    symmetrisation.  ``solenoidal`` implies a vector field and applies the
    Leray projection.  Returned in spectral representation.
    """
    if max_mode < 0 or any(max_mode > c for c in grid.dealias_cutoff):
        raise ValueError(
            f"max_mode={max_mode} exceeds the dealiasing cutoff {grid.dealias_cutoff} of the grid"
        )
    vector = vector or solenoidal
    ncomp = 3 if vector else 1
    rng = np.random.default_rng(seed)
    m1 = grid.indices(0)[:, None, None]
    m2 = grid.indices(1)[None, :, None]
    m3 = grid.indices(2)[None, None, :]
    band = (np.abs(m1) <= max_mode) & (np.abs(m2) <= max_mode) & (np.abs(m3) <= max_mode)
    full = np.zeros((ncomp,) + grid.shape, dtype=complex)
    nb = int(band.sum())
    noise = rng.standard_normal((ncomp, nb, 2)) * math.sqrt(0.5)
    full[:, band] = noise[..., 0] + 1j * noise[..., 1]
    # c(-k) partner via index reversal on every axis
    partner = np.conj(np.roll(np.flip(full, axis=(1, 2, 3)), shift=(1, 1, 1), axis=(1, 2, 3)))
    sym = (full + partner) / math.sqrt(2.0)
    coef = sym[..., : grid.n3 // 2 + 1]
    if not vector:
        return Field(grid, coef[0], SPECTRAL)
    w = VectorField(grid, coef, SPECTRAL)
    return leray_project(w) if solenoidal else w
