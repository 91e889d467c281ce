import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from mdfield.mcleish import (
    array_batch,
    block_decomposition_check,
    box_array,
    build_array,
    check_max_negligible,
    check_max_square_bounded,
    check_sum_squares_l1,
    column_vector_batch,
    default_block_size,
    sum_squares_l1,
    trend_slope,
)
from mdfield.models import ModelKind, ModelSpec, Region, Seed, field_value
from mdfield.sampler import partial_sum

ZERO = ModelSpec(ModelKind.ZERO, 2)
GAUSS = ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 2)
PRODUCT = ModelSpec(ModelKind.PRODUCT_XY, 2)
# E|G^2 - 1| for standard normal G, by quadrature (equals 4 * phi(1))
ABS_CHI2_DEVIATION = 0.9678828980765737


def test_zero_array():
    arr = build_array(ZERO, 10, 4, Seed(1))
    assert np.all(arr.entries == 0)


def test_unit_array_is_field_value():
    arr = build_array(GAUSS, 1, 1, Seed(3))
    assert arr.entries[0] == field_value(GAUSS, (1, 1), Seed(3))


@pytest.mark.parametrize("model", [GAUSS, PRODUCT, ModelSpec(ModelKind.ROTATION_COUPLED, 2)])
def test_row_sum_is_partial_sum(model):
    arr = build_array(model, 37, 11, Seed(5))
    assert arr.row_sum() == pytest.approx(partial_sum(model, Region((37, 11)), Seed(5)), rel=1e-10, abs=1e-12)


def test_entries_recomputable_from_provenance():
    arr = build_array(GAUSS, 3, 4, Seed(8))
    for i in range(3):
        col = math.fsum(field_value(GAUSS, (i + 1, j), Seed(8)) for j in range(1, 5)) / 2.0
        assert arr.entries[i] == pytest.approx(col / math.sqrt(3), rel=1e-12)


def test_box_array_d3_row_sum():
    m = ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 3)
    arr = box_array(m, 6, 5, Seed(2))
    assert arr.shape == (6, 6)
    assert arr.row_sum() == pytest.approx(partial_sum(m, Region((6, 6, 5)), Seed(2)), rel=1e-10)


def test_box_array_d3_zero_is_trivial():
    m = ModelSpec(ModelKind.ZERO, 3)
    arr = box_array(m, 4, 4, Seed(2))
    assert np.all(arr.entries == 0)
    est, se = sum_squares_l1(m, (4, 4), 4, 10, Seed(1))
    assert est == 1.0 and se == 0.0


def test_build_array_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        build_array(ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 3), 4, 4, Seed(1))
    with pytest.raises(ValueError):
        box_array(GAUSS, 4, 4, Seed(1))


def test_max_negligible_zero_model():
    rep = check_max_negligible(ZERO, [4, 16], 4, 100, Seed(1))
    assert all(p == 0.0 for row in rep.estimates for p in row)


def _exceedance_oracle(n, eps):
    # F_i are iid N(0,1) for the Gaussian model
    return 1 - (1 - 2 * (1 - ndtr(eps * math.sqrt(n)))) ** n


def test_max_negligible_gaussian_matches_oracle_and_decreases():
    R = 400
    rep = check_max_negligible(GAUSS, [64, 1024], 16, R, Seed(11))
    for k, n in enumerate([64, 1024]):
        for e, eps in enumerate(rep.extra["eps"]):
            p = _exceedance_oracle(n, eps)
            se = max(math.sqrt(p * (1 - p) / R), 1 / R)
            assert abs(rep.estimates[k][e] - p) <= 4 * se
    assert rep.estimates[0][1] > rep.estimates[1][1]
    assert rep.verdict == "decreasing"


def test_max_negligible_product_decays_too():
    rep = check_max_negligible(PRODUCT, [64, 1024], 16, 400, Seed(11))
    assert rep.estimates[0][1] > rep.estimates[1][1]
    assert rep.estimates[1][2] < 0.05


def test_max_square_bounded():
    assert check_max_square_bounded(ZERO, 8, 4, 100, Seed(1)).estimates[0] == 0.0
    for model in (GAUSS, PRODUCT):
        rep = check_max_square_bounded(model, 256, 16, 1000, Seed(4))
        assert rep.verdict == "pass"
        assert rep.estimates[0] <= 1.0


def test_sum_squares_zero_is_one():
    est, se = sum_squares_l1(ZERO, 16, 4, 500, Seed(1))
    assert est == 1.0


def test_sum_squares_gaussian_small():
    est, _ = sum_squares_l1(GAUSS, 256, 32, 2000, Seed(12))
    assert est < 0.2


def test_sum_squares_product_tends_to_abs_chi2_deviation():
    est, se = sum_squares_l1(PRODUCT, 256, 256, 4000, Seed(12))
    assert est > 0.5
    assert abs(est - ABS_CHI2_DEVIATION) < 4 * se + 0.05


def test_sum_squares_d3_box():
    m = ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 3)
    est, _ = sum_squares_l1(m, (16, 16), 16, 1000, Seed(7))
    assert est < 0.3


def test_second_moment_of_entries():
    R, n = 2000, 32
    X = array_batch(GAUSS, n, 8, Seed(3), R)
    est = np.mean(X**2, axis=0)
    assert np.all(np.abs(est - 1 / n) <= 4 / (n * math.sqrt(R)) * math.sqrt(2))


def test_l1_verdicts_and_monotonicity():
    g = check_sum_squares_l1(GAUSS, R=500, seed=Seed(21))
    assert g.verdict == "vanishing"
    for a, b, sa, sb in zip(g.estimates, g.estimates[1:], g.stderr, g.stderr[1:]):
        assert b <= a + 2 * math.hypot(sa, sb)
    p = check_sum_squares_l1(PRODUCT, R=500, seed=Seed(21))
    assert p.verdict == "non-vanishing"
    assert min(p.estimates) > 0.5
    assert check_sum_squares_l1(ZERO, R=500).verdict == "non-vanishing"
    assert '"condition": "sum-squares-l1"' in g.to_json()


def test_trend_slope():
    assert trend_slope([1, 10, 100], [1, 0.1, 0.01]) == pytest.approx(-1.0)


@settings(max_examples=100, deadline=None)
@given(
    values=st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=120),
    m=st.integers(1, 120),
)
def test_block_identity_holds_for_arbitrary_reals(values, m):
    m = min(m, len(values))
    res = block_decomposition_check(np.array(values), m)
    scale = max(1.0, max(v * v for v in values))
    assert res.residual <= 1e-10 * scale
    assert res.p * res.m + res.q == len(values)


def test_block_identity_edge_cases():
    F = np.random.default_rng(0).standard_normal(100)
    assert block_decomposition_check(F, 100).residual <= 1e-12
    assert block_decomposition_check(F, 1).residual <= 1e-12
    res = block_decomposition_check(F, 7)
    assert res.residual <= 1e-10 and (res.p, res.q) == (14, 2)
    with pytest.raises(ValueError):
        block_decomposition_check(F, 101)


def test_block_identity_on_cubes():
    F = np.random.default_rng(1).standard_normal((11, 11))
    res = block_decomposition_check(F, 3)
    assert res.residual <= 1e-10
    assert (res.p, res.q) == (9, 121 - 81)


def test_default_block_size():
    assert [default_block_size(n) for n in (1, 7, 8, 26, 27, 64, 1000)] == [1, 1, 2, 2, 3, 4, 10]


def test_vector_batch_zero():
    vb = column_vector_batch(ZERO, 3, 4, 50, Seed(1))
    assert np.all(vb.samples == 0) and np.all(vb.covariance == 0)


def test_vector_batch_gaussian_identity_covariance():
    vb = column_vector_batch(GAUSS, 4, 64, 4000, Seed(17))
    assert np.max(np.abs(vb.covariance - np.eye(4))) < 0.1
    assert abs(vb.mean_square_average - 1) < 4 * math.sqrt(2 / (4 * 4000))


def test_vector_batch_product_dependence():
    vb = column_vector_batch(PRODUCT, 4, 64, 20_000, Seed(17))
    off = vb.covariance[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off)) < 0.1
    # squares share the common factor (v^-1/2 sum y)^2; population value 0.25
    assert vb.mean_off_diagonal_square_correlation > 0.2
