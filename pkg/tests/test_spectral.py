import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtcm import spectral as sp
from gtcm.spectral import Field, Grid, MultiplierSpec, VectorField

from conftest import mode

TWO_PI = 2 * math.pi


def rand_physical(grid, seed, vector=False):
    rng = np.random.default_rng(seed)
    shape = ((3,) if vector else ()) + grid.shape
    cls = VectorField if vector else Field
    return cls(grid, rng.standard_normal(shape))


# --------------------------------------------------------------------- Grid

def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(5, 8, 8)
    with pytest.raises(ValueError):
        Grid(2, 8, 8)
    with pytest.raises(ValueError):
        Grid(8, 8, 8, l1=-1.0)


def test_wavenumber_table_symmetric_except_nyquist():
    g = Grid(8, 6, 10, 1.0, 2.0, 3.0)
    for axis, (n, length) in enumerate(zip(g.shape, g.lengths)):
        k = g.wavenumbers(axis)
        assert len(k) == n
        m = np.rint(k * length / TWO_PI).astype(int)
        assert sorted(m) == list(range(-n // 2, n // 2))
        nonzero = set(m) - {0, -n // 2}
        assert all(-x in nonzero for x in nonzero)


def test_dealias_cutoff_keeps_modes_below_a_third():
    assert Grid.cube(8).dealias_cutoff == (2, 2, 2)
    assert Grid.cube(32).dealias_cutoff == (10, 10, 10)
    for n in (8, 12, 16, 32):
        c = Grid.cube(n).dealias_cutoff[0]
        assert 3 * c < n and 3 * (c + 1) >= n


# --------------------------------------------------------------- transforms

def test_constant_has_only_zero_mode(grid8):
    f = sp.to_spectral(Field(grid8, np.full(grid8.shape, 2.5)))
    assert f.data[0, 0, 0] == pytest.approx(2.5)
    rest = f.data.copy()
    rest[0, 0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-15


def test_sine_has_two_coefficients(grid8):
    f = sp.to_spectral(Field(grid8, mode(grid8, (1, 0, 0))))
    nz = np.argwhere(np.abs(f.data) > 1e-14)
    assert sorted(map(tuple, nz)) == [(1, 0, 0), (7, 0, 0)]
    assert f.data[1, 0, 0] == pytest.approx(-0.5j)
    assert f.data[7, 0, 0] == pytest.approx(0.5j)


def test_matches_brute_force_dft(grid4):
    g = Grid(4, 4, 4, 1.0, 2.0, 3.0)
    f = rand_physical(g, 3)
    got = sp.to_spectral(f).data
    x = [np.arange(n) for n in g.shape]
    for m1 in range(4):
        for m2 in range(4):
            for m3 in range(3):
                phase = np.exp(-2j * np.pi * (
                    m1 * x[0][:, None, None] / 4 + m2 * x[1][None, :, None] / 4 + m3 * x[2][None, None, :] / 4))
                want = np.sum(f.data * phase) / 64
                assert abs(got[m1, m2, m3] - want) <= 1e-12 * max(1.0, abs(want))


def test_round_trip_identity(grid16):
    f = rand_physical(grid16, 1, vector=True)
    back = sp.to_physical(sp.to_spectral(f))
    rel = np.max(np.abs(back.data - f.data)) / np.max(np.abs(f.data))
    assert rel <= 1e-12


def test_zero_round_trip(grid8):
    z = sp.to_physical(sp.to_spectral(Field(grid8, np.zeros(grid8.shape))))
    assert np.all(z.data == 0)


def test_single_mode_inverse_matches_pointwise(grid8):
    coef = np.zeros(grid8.spectral_shape, dtype=complex)
    coef[1, 0, 0] = 0.5
    coef[7, 0, 0] = 0.5
    f = sp.to_physical(Field(grid8, coef, sp.SPECTRAL))
    assert np.allclose(f.data, mode(grid8, (1, 0, 0), fn=np.cos), atol=1e-15)


def test_wrong_representation_rejected(grid8):
    f = Field(grid8, np.zeros(grid8.shape))
    with pytest.raises(sp.RepresentationError):
        sp.to_physical(f)
    with pytest.raises(sp.RepresentationError):
        sp.to_spectral(sp.to_spectral(f))


def test_non_hermitian_rejected(grid8):
    coef = np.zeros(grid8.spectral_shape, dtype=complex)
    coef[1, 0, 0] = 1.0  # partner (-1, 0, 0) left at zero
    with pytest.raises(sp.RepresentationError):
        sp.to_physical(Field(grid8, coef, sp.SPECTRAL))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_parseval(seed):
    g = Grid(8, 12, 6, 1.0, 2.5, 4.0)
    f = rand_physical(g, seed)
    a, b = sp.l2_norm(f), sp.l2_norm(sp.to_spectral(f))
    assert abs(a - b) <= 1e-12 * a


def test_parseval_many_fields(grid16):
    worst = 0.0
    for seed in range(1000):
        f = rand_physical(grid16, seed)
        a, b = sp.l2_norm(f), sp.l2_norm(sp.to_spectral(f))
        worst = max(worst, abs(a - b) / a)
    assert worst <= 1e-12


# --------------------------------------------------------------- multipliers

def test_fractional_laplacian_mode_scaling(grid8):
    f = sp.to_spectral(Field(grid8, mode(grid8, (0, 2, 0))))
    out = sp.apply_multiplier(f, MultiplierSpec.fractional_laplacian(1.5))
    idx = (0, 2, 0)
    assert out.data[idx] / f.data[idx] == pytest.approx(8.0, rel=1e-15)


def test_derivative_of_sine(grid8):
    f = sp.to_spectral(Field(grid8, mode(grid8, (1, 0, 0))))
    d = sp.to_physical(sp.apply_multiplier(f, MultiplierSpec.derivative(1)))
    assert np.allclose(d.data, mode(grid8, (1, 0, 0), fn=np.cos), atol=1e-14)


def test_derivative_zero_at_nyquist(grid8):
    assert np.all(grid8.k_deriv[0][4] == 0)
    assert np.all(grid8.k_deriv[2][..., 4] == 0)


def test_lambda_one_is_root_of_laplacian(grid16):
    f = sp.random_band_limited_field(grid16, 5, 2)
    a = sp.symbol(grid16, MultiplierSpec.lambda_power(1))
    b = np.sqrt(sp.symbol(grid16, MultiplierSpec.full_laplacian()))
    assert np.max(np.abs(a - b)) <= 1e-13 * np.max(b)
    fa = sp.apply_multiplier(f, MultiplierSpec.lambda_power(1))
    assert sp.l2_norm(fa - f.with_data(f.data * b)) <= 1e-13 * sp.l2_norm(fa)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 3), st.floats(-2, 3))
def test_lambda_power_composition(a, b):
    g = Grid(8, 8, 8, 1.0, 2.0, 3.0)
    la = sp.symbol(g, MultiplierSpec.lambda_power(a))
    lb = sp.symbol(g, MultiplierSpec.lambda_power(b))
    lab = sp.symbol(g, MultiplierSpec.lambda_power(a + b))
    mask = g.ksq > 0
    assert np.allclose((la * lb)[mask], lab[mask], rtol=1e-13, atol=0)


def test_horizontal_laplacian_symbol(grid8):
    s = sp.symbol(grid8, MultiplierSpec.horizontal_laplacian())
    k1, k2, _ = grid8.k
    assert np.array_equal(np.broadcast_to(s, grid8.spectral_shape),
                          np.broadcast_to(k1**2 + k2**2, grid8.spectral_shape))


def test_inverse_laplacian_zero_mode(grid8):
    s = sp.symbol(grid8, MultiplierSpec.inverse_laplacian())
    assert s[0, 0, 0] == 0
    assert s[1, 0, 0] == pytest.approx(1.0)


def test_symbol_is_read_only(grid8):
    s = sp.symbol(grid8, MultiplierSpec.fractional_laplacian(1.5))
    with pytest.raises(ValueError):
        s[0, 0, 0] = 1.0


def test_multiplier_spec_validation():
    with pytest.raises(ValueError):
        MultiplierSpec.fractional_laplacian(-1)
    with pytest.raises(ValueError):
        MultiplierSpec.derivative(4)
    with pytest.raises(ValueError):
        MultiplierSpec("bogus")


# -------------------------------------------------------------------- Leray

def test_leray_annihilates_gradient(grid16):
    phi = Field(grid16, mode(grid16, (1, 0, 1)))
    g = sp.gradient(sp.to_spectral(phi))
    assert sp.l2_norm(sp.leray_project(g)) <= 1e-13 * sp.l2_norm(g)


def test_leray_keeps_solenoidal(grid16):
    w = VectorField(grid16, np.stack([mode(grid16, (0, 1, 0)), np.zeros(grid16.shape), np.zeros(grid16.shape)]))
    pw = sp.to_physical(sp.leray_project(sp.to_spectral(w)))
    assert np.max(np.abs(pw.data - w.data)) < 1e-15


def test_leray_random_divergence_free_and_idempotent(grid16):
    w = sp.random_band_limited_field(grid16, 5, 9, vector=True)
    pw = sp.leray_project(w)
    assert sp.l2_norm(sp.divergence(pw)) <= 1e-12 * sp.l2_norm(w)
    assert sp.l2_norm(sp.leray_project(pw) - pw) <= 1e-13 * sp.l2_norm(pw)


def test_leray_passes_mean(grid8):
    coef = np.zeros((3,) + grid8.spectral_shape, dtype=complex)
    coef[:, 0, 0, 0] = (1.0, 2.0, 3.0)
    out = sp.leray_project(VectorField(grid8, coef, sp.SPECTRAL))
    assert np.array_equal(out.data[:, 0, 0, 0], coef[:, 0, 0, 0])


# ---------------------------------------------------------------- dealiasing

def test_dealias_keeps_resolved_and_drops_nyquist(grid8):
    f = sp.random_band_limited_field(grid8, 2, 4)
    assert np.array_equal(sp.dealias(f).data, f.data)
    coef = np.zeros(grid8.spectral_shape, dtype=complex)
    coef[4, 0, 0] = 1.0
    assert np.all(sp.dealias(Field(grid8, coef, sp.SPECTRAL)).data == 0)


def _fine_product_oracle(grid, fa, fb, factor=2):
    """Evaluate both band-limited fields on a refined grid by zero padding the
    full FFT, multiply, transform back and keep the coarse resolved modes."""
    n = grid.n1
    nf = factor * n

    def fine_values(f):
        full = np.fft.fftn(sp.to_physical(f).data) / n**3
        pad = np.zeros((nf, nf, nf), dtype=complex)
        idx = np.r_[0:n // 2, nf - n // 2:nf]
        src = np.r_[0:n // 2, n // 2:n]
        pad[np.ix_(idx, idx, idx)] = full[np.ix_(src, src, src)]
        return np.fft.ifftn(pad).real * nf**3

    prod = np.fft.fftn(fine_values(fa) * fine_values(fb)) / nf**3
    c = grid.dealias_cutoff[0]
    out = np.zeros((n, n, n), dtype=complex)
    keep = list(range(0, c + 1)) + list(range(-c, 0))
    for i in keep:
        for j in keep:
            for k in keep:
                out[i % n, j % n, k % n] = prod[i % nf, j % nf, k % nf]
    return out[:, :, : n // 2 + 1]


def test_dealiased_product_matches_fine_grid(grid8):
    fa = sp.random_band_limited_field(grid8, 2, 11)
    fb = sp.random_band_limited_field(grid8, 2, 12)
    prod = sp.to_physical(fa).data * sp.to_physical(fb).data
    got = sp.dealias(sp.to_spectral(Field(grid8, prod))).data
    want = _fine_product_oracle(grid8, fa, fb)
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


def test_product_rule_on_band_limited(grid16):
    c = grid16.dealias_cutoff[0] // 2
    fa = sp.random_band_limited_field(grid16, c, 1)
    fb = sp.random_band_limited_field(grid16, c, 2)
    pa, pb = sp.to_physical(fa).data, sp.to_physical(fb).data
    lhs = sp.derivative(sp.dealias(sp.to_spectral(Field(grid16, pa * pb))), 2)
    da, db = sp.to_physical(sp.derivative(fa, 2)).data, sp.to_physical(sp.derivative(fb, 2)).data
    rhs = sp.dealias(sp.to_spectral(Field(grid16, da * pb + pa * db)))
    assert sp.l2_norm(lhs - rhs) <= 1e-11 * sp.l2_norm(lhs)


# ---------------------------------------------------------------------- norms

def test_l2_constant_and_sine(grid8):
    c = Field(grid8, np.full(grid8.shape, -3.0))
    assert sp.l2_norm(c) == pytest.approx(3.0 * TWO_PI**1.5, rel=1e-14)
    s = Field(grid8, mode(grid8, (1, 0, 0)))
    assert sp.l2_norm(s) ** 2 == pytest.approx(TWO_PI**3 / 2, rel=1e-14)
    assert sp.l2_norm(sp.to_spectral(s)) ** 2 == pytest.approx(TWO_PI**3 / 2, rel=1e-14)


def test_lp_sine_fourth_power(grid16):
    s = Field(grid16, mode(grid16, (1, 0, 0)))
    # int sin^4 over one period is 3 pi / 4
    assert sp.lp_norm(s, 4) ** 4 == pytest.approx(TWO_PI**2 * 3 * math.pi / 4, rel=1e-13)


def test_lp_rejects_small_p(grid8):
    with pytest.raises(ValueError):
        sp.lp_norm(Field(grid8, np.zeros(grid8.shape)), 0.5)


def test_lp_inf_and_vector_magnitude(grid8):
    w = VectorField(grid8, np.stack([np.full(grid8.shape, 3.0), np.full(grid8.shape, 4.0), np.zeros(grid8.shape)]))
    assert sp.lp_norm(w, math.inf) == pytest.approx(5.0)
    assert sp.lp_norm(w, 2) == pytest.approx(sp.l2_norm(w))


@pytest.mark.parametrize("p,q", [(1, 1), (2, 4), (4, 2), (math.inf, 3), (3, math.inf)])
@pytest.mark.parametrize("transposed", [False, True])
def test_mixed_norm_constant(grid8, p, q, transposed):
    g = Grid(8, 8, 8, 1.0, 2.0, 3.0)
    f = Field(g, np.full(g.shape, 2.0))
    area, length = 2.0, 3.0
    want = 2.0 * (area ** (1 / p) if p != math.inf else 1.0) * (length ** (1 / q) if q != math.inf else 1.0)
    assert sp.anisotropic_mixed_norm(f, p, q, transposed) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("p,q", [(4, 2), (2, math.inf), (3, 1.5)])
def test_mixed_norm_separable(p, q):
    g = Grid(16, 12, 10, 2.0, 3.0, 4.0)
    x1, x2, x3 = g.coordinates()
    gh = (1.5 + np.sin(TWO_PI * x1 / 2.0)) * np.cos(TWO_PI * x2 / 3.0) ** 2
    hv = 0.2 + np.sin(TWO_PI * x3 / 4.0) ** 2
    f = Field(g, np.broadcast_to(gh * hv, g.shape).copy())
    dh = (2.0 / 16) * (3.0 / 12)
    dv = 4.0 / 10

    def norm(values, e, dvol):
        values = np.abs(values).ravel()
        return values.max() if e == math.inf else (np.sum(values**e) * dvol) ** (1 / e)

    want = norm(gh, p, dh) * norm(hv, q, dv)
    assert sp.anisotropic_mixed_norm(f, p, q) == pytest.approx(want, rel=1e-10)
    assert sp.anisotropic_mixed_norm(f, p, q, transposed=True) == pytest.approx(want, rel=1e-10)


def test_mixed_l2_equals_l2(grid16):
    f = rand_physical(grid16, 5)
    assert sp.anisotropic_mixed_norm(f, 2, 2, transposed=True) == pytest.approx(sp.l2_norm(f), rel=1e-12)


def test_mixed_norm_needs_physical(grid8):
    with pytest.raises(sp.RepresentationError):
        sp.anisotropic_mixed_norm(sp.to_spectral(Field(grid8, np.zeros(grid8.shape))), 2, 2)
    with pytest.raises(ValueError):
        sp.anisotropic_mixed_norm(Field(grid8, np.zeros(grid8.shape)), 0.5, 2)


def test_sobolev_norms(grid16):
    f = sp.random_band_limited_field(grid16, 4, 8)
    assert sp.sobolev_norm(f, 0) == pytest.approx(sp.l2_norm(f), rel=1e-14)
    one = sp.to_spectral(Field(grid16, mode(grid16, (1, 0, 0))))
    assert sp.sobolev_norm(one, 2, homogeneous=True) == pytest.approx(sp.l2_norm(one), rel=1e-14)
    s3 = sp.to_spectral(Field(grid16, mode(grid16, (0, 0, 1))))
    want = math.sqrt(sp.l2_norm(s3) ** 2 + sp.l2_norm(sp.derivative(s3, 3)) ** 2)
    assert sp.anisotropic_sobolev_norm(s3, 0, 1) == pytest.approx(want, rel=1e-12)


# ------------------------------------------------------------ random fields

def test_random_field_deterministic(grid16):
    a = sp.random_band_limited_field(grid16, 3, 42)
    b = sp.random_band_limited_field(grid16, 3, 42)
    assert np.array_equal(a.data, b.data)


def test_random_field_band_and_reality(grid16):
    f = sp.random_band_limited_field(grid16, 1, 3)
    i1, i2, i3 = grid16.index_tables
    outside = (np.abs(i1) > 1) | (np.abs(i2) > 1) | (np.abs(i3) > 1)
    assert np.all(f.data[outside] == 0)
    assert sp.hermitian_defect(grid16, f.data) <= 1e-15


def test_random_solenoidal(grid16):
    w = sp.random_band_limited_field(grid16, 5, 3, solenoidal=True)
    assert isinstance(w, VectorField)
    assert sp.l2_norm(sp.divergence(w)) <= 1e-12 * sp.l2_norm(w)


def test_random_field_rejects_unresolved_band(grid16):
    with pytest.raises(ValueError):
        sp.random_band_limited_field(grid16, 6, 0)


def test_grid_mismatch(grid8, grid16):
    with pytest.raises(sp.GridMismatchError):
        Field(grid8, np.zeros(grid8.shape)) + Field(grid16, np.zeros(grid16.shape))


def test_vector_components(grid8):
    comps = [Field(grid8, np.full(grid8.shape, float(i))) for i in (1, 2, 3)]
    w = VectorField.from_components(comps)
    assert w.component(2).data[0, 0, 0] == 2.0
    assert len(w.components) == 3
