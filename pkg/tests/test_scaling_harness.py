import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cepspin.collective_model import PresetParams
from cepspin.errors import InsufficientOverlap, PlateauNotResolved
from cepspin.scaling_harness import (CSV_COLUMNS, SweepResult, SweepRow, _crossover_delta,
                                     collapse_quality, fss_collapse, ginzburg_crossover,
                                     solve_point, sweep)
from cepspin.meanfield import example_branch

BASE = PresetParams.from_delta(2.0, 1.0, 0.1)


def synthetic(Ss, deltas, a=1 / 3, b=2 / 3, f=lambda x: np.sqrt(x + 1.0)):
    """Rows obeying y = S^{-a} f(delta S^b) exactly."""
    rows = [SweepRow(S=S, delta=d, gamma_x=0, gamma_y=0, gamma_z=0,
                     sqrt_mean_z_sq=S**-a * f(d * S**b), xi_s_sq=1 / (S**a * f(d * S**b)))
            for S in Ss for d in deltas]
    return SweepResult(rows)


@pytest.fixture(scope="module")
def small_sweep():
    return sweep(BASE, [20, 40], np.geomspace(0.05, 1.0, 5))


def test_sweep_bookkeeping(small_sweep):
    assert len(small_sweep.rows) == 10
    keys = [(r.S, r.delta) for r in small_sweep.rows]
    assert keys == sorted(keys)
    assert all(r.residual < 1e-10 and r.error == "" for r in small_sweep.rows)
    assert small_sweep.S_values == [20, 40]


def test_sweep_attaches_gaussian_columns(small_sweep):
    for r in small_sweep.rows:
        p = BASE.with_delta(r.delta)
        assert r.gaussian_Z == pytest.approx(example_branch(p).Z, abs=1e-12)
        assert 0 < r.gaussian_xi_s_sq < 1
        assert r.sqrt_mean_z_sq >= abs(r.mean_z) - 1e-12


def test_sweep_records_failures():
    row = solve_point(BASE, 5, -0.5)
    assert math.isnan(row.gaussian_xi_s_sq) and row.error == ""
    bad = solve_point(BASE, 400, 0.5, max_spin=350)
    assert "DimensionTooLarge" in bad.error
    assert math.isfinite(bad.gaussian_xi_s_sq)


def test_csv_roundtrip(small_sweep):
    small_sweep.provenance.update({"config_sha256": "abc", "version": "x"})
    text = small_sweep.to_csv()
    back = SweepResult.from_csv(text)
    assert back.rows == small_sweep.rows
    assert back.provenance["config_sha256"] == "abc"
    assert back.to_csv() == text
    header = [l for l in text.splitlines() if not l.startswith("#")][0]
    assert header.split(",") == CSV_COLUMNS


def test_sweep_independent_of_workers(small_sweep):
    again = sweep(BASE, [20, 40], np.geomspace(0.05, 1.0, 5), threads=2)
    assert again.to_csv() == sweep(BASE, [20, 40], np.geomspace(0.05, 1.0, 5)).to_csv()


def test_duplicate_rows_rejected():
    r = SweepRow(S=2, delta=0.1, gamma_x=0, gamma_y=0, gamma_z=0)
    with pytest.raises(ValueError):
        SweepResult([r, r])


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        sweep(BASE, [], [0.1])


def test_collapse_quality_zero_for_identical_curves():
    x = np.linspace(0, 1, 7)
    q, grid = collapse_quality([x, x, x], [x**2 + 1] * 3)
    assert q == 0
    assert grid[0] > 0 and grid[-1] < 1 and len(grid) == 50


def test_collapse_needs_overlap():
    with pytest.raises(InsufficientOverlap):
        collapse_quality([np.array([0, 1.0]), np.array([2, 3.0])], [np.ones(2)] * 2)


def test_single_size_rejected():
    data = synthetic([20], np.linspace(0.1, 1, 5))
    with pytest.raises(InsufficientOverlap):
        fss_collapse(data, "order_parameter")


def test_unknown_observable():
    with pytest.raises(ValueError):
        fss_collapse(synthetic([10, 20, 40], np.linspace(0.1, 1, 5)), "bogus")


def test_synthetic_scaling_collapses_exactly():
    data = synthetic([20, 40, 80, 160], np.geomspace(1e-3, 1.0, 40))
    rep = fss_collapse(data, "order_parameter")
    assert rep.quality < 1e-6 < rep.quality_unscaled
    inv = fss_collapse(data, "inverse_squeezing")
    assert inv.quality < 1e-6


@given(st.floats(0.15, 0.6), st.floats(0.4, 0.9))
def test_true_exponents_beat_perturbed(a, b):
    data = synthetic([20, 40, 80, 160], np.geomspace(1e-3, 1.0, 40), a=a, b=b,
                     f=lambda x: x / (1 + x) + 0.3)
    good = fss_collapse(data, "order_parameter", exponents=(a, b)).quality
    bad = fss_collapse(data, "order_parameter", exponents=(a + 0.15, b - 0.15)).quality
    assert good < bad


def test_exact_data_prefers_one_third_exponents():
    data = sweep(BASE, [20, 40, 80], np.geomspace(0.02, 1.0, 10))
    good = fss_collapse(data, "order_parameter")
    bad = fss_collapse(data, "order_parameter", exponents=(0.5, 0.5))
    assert good.quality < bad.quality


def test_log_corrected_size():
    data = synthetic([20, 40, 80], np.geomspace(1e-3, 1.0, 20))
    rep = fss_collapse(data, "inverse_squeezing", log_correction=True)
    x20 = rep.curves[20][0]
    np.testing.assert_allclose(x20, data.column(20, "delta")[0] * (20 / math.log(20)) ** (2 / 3))


def test_crossover_delta_solves_ginzburg_condition():
    for S in (40, 320):
        d = _crossover_delta(BASE, S)
        Z = example_branch(BASE.with_delta(d)).Z
        assert S * abs(Z) ** 3 == pytest.approx(1, rel=1e-10)


def test_ginzburg_plateau_requires_small_delta():
    data = synthetic([40, 80], np.linspace(0.5, 1.0, 3))
    with pytest.raises(PlateauNotResolved):
        ginzburg_crossover(data, BASE)


def test_ginzburg_synthetic_exponent():
    data = synthetic([40, 80, 160, 320], np.geomspace(1e-6, 1.0, 30))
    rep = ginzburg_crossover(data, BASE)
    assert rep.exponent == pytest.approx(-1 / 3, abs=1e-3)
    assert rep.r_squared > 0.999
