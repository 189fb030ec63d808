import math
from dataclasses import replace

import numpy as np
import pytest

from gtcm import inequalities as iq
from gtcm import spectral as sp
from gtcm.spectral import Field, Grid

from conftest import mode

PI = math.pi
TWO_PI = 2 * PI


@pytest.fixture(scope="module")
def small_cfg():
    return iq.EnsembleConfig(grid=Grid.cube(16), size=60, max_mode=4, base_seed=3)


def test_horizontal_l4_degenerate_vertical_only(grid16):
    assert iq.horizontal_l4_ratio(Field(grid16, mode(grid16, (0, 0, 1)))) is None


def test_horizontal_l4_sine_closed_form(grid16):
    psi = Field(grid16, mode(grid16, (1, 0, 0)))
    # per x3 slice: |psi|_{L4_h}^2 = sqrt(2 pi * 3 pi / 4); the L2 in x3 of that squared is 2 pi times it
    lhs = TWO_PI * math.sqrt(TWO_PI * 3 * PI / 4)
    rhs = TWO_PI**3 / 2  # |psi| |grad_h psi| = |psi|^2
    assert iq.horizontal_l4_ratio(psi) == pytest.approx(lhs / rhs, rel=1e-12)


def test_vertical_trace_constant_in_x3(grid16):
    psi = Field(grid16, mode(grid16, (1, 2, 0)))
    n2 = sp.l2_norm(psi) ** 2
    trace = sp.anisotropic_mixed_norm(psi, 2, math.inf, transposed=True) ** 2
    assert trace == pytest.approx(n2 / grid16.l3, rel=1e-13)
    assert iq.vertical_trace_ratio(psi) is None  # d3 psi = 0


def test_vertical_trace_sine_closed_form(grid16):
    psi = Field(grid16, mode(grid16, (0, 0, 1)))
    # max slice norm (2 pi)^2, |psi|^2 = |d3 psi|^2 = 4 pi^3
    want = (TWO_PI**2 - 4 * PI**3 / TWO_PI) / (4 * PI**3)
    assert iq.vertical_trace_ratio(psi) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(1 / TWO_PI)


def test_interpolation_exponents():
    assert iq.interpolation_exponents(1.5) == (6.0, pytest.approx(2 / 3))
    with pytest.raises(ValueError):
        iq.interpolation_exponents(1.2)
    with pytest.raises(ValueError):
        iq.interpolation_exponents(2.5)


def test_interpolation_single_mode(grid16):
    psi = Field(grid16, mode(grid16, (1, 0, 0), fn=np.cos))
    # int cos^6 over a period = 5 pi / 8; |Lambda^alpha psi| = |psi| for |k| = 1
    l6 = (TWO_PI**2 * 5 * PI / 8) ** (1 / 6)
    assert iq.interpolation_ratio(psi, 1.5) == pytest.approx(l6 / math.sqrt(4 * PI**3), rel=1e-12)


def test_interpolation_zero_field(grid16):
    assert iq.interpolation_ratio(Field(grid16, np.zeros(grid16.shape)), 1.5) is None


def test_unknown_bench(small_cfg):
    with pytest.raises(ValueError):
        iq.run_bench("3.99", small_cfg)


@pytest.mark.parametrize("bench_id", iq.BENCH_IDS)
def test_bench_reproducible_and_finite(small_cfg, bench_id):
    a = iq.run_bench(bench_id, small_cfg)
    b = iq.run_bench(bench_id, small_cfg)
    assert np.array_equal(a.ratios, b.ratios, equal_nan=True)
    assert a.max_ratio == b.max_ratio and a.argmax_seed == b.argmax_seed
    valid = a.ratios[~np.isnan(a.ratios)]
    assert a.evaluated == valid.size == small_cfg.size
    assert np.all(np.isfinite(valid)) and np.all(valid <= a.max_ratio) and a.max_ratio > 0
    assert a.ratios[a.argmax_seed] == a.max_ratio
    assert "torus adaptation" in a.summary()


def test_bench_parallel_matches_serial(small_cfg):
    a = iq.run_bench("horizontal-l4", small_cfg)
    b = iq.run_bench("horizontal-l4", replace(small_cfg, workers=2))
    assert np.array_equal(a.ratios, b.ratios) and a.argmax_seed == b.argmax_seed


def test_bench_max_nondecreasing_in_nested_sets(small_cfg):
    small = iq.run_bench("vertical-trace", replace(small_cfg, size=20))
    large = iq.run_bench("vertical-trace", small_cfg)
    assert np.array_equal(small.ratios, large.ratios[:20])
    assert large.max_ratio >= small.max_ratio


@pytest.mark.parametrize("bench_id", iq.BENCH_IDS)
def test_scale_invariance(small_cfg, bench_id):
    fn = iq._ratio_fn(bench_id, small_cfg.alpha)
    for i in range(10):
        psi = iq.ensemble_sample(small_cfg, i, bench_id)
        r = fn(psi)
        for lam in (-2.0, 1e-4, 3e3):
            assert abs(fn(psi * lam) / r - 1) <= 1e-12


def test_empty_ensemble():
    rep = iq.run_bench("interpolation", iq.EnsembleConfig(grid=Grid.cube(8), size=0, max_mode=2))
    assert rep.evaluated == 0 and rep.argmax_seed is None
