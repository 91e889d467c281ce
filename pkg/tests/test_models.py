import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdfield.models import (
    DEFAULT_ANGLES,
    ModelKind,
    ModelSpec,
    Region,
    Seed,
    X_TAG,
    Y_TAG,
    evaluate,
    field_box,
    field_value,
    meet,
    rotation_phase,
    shift_field,
    site_noise,
)

KINDS_2D = [k for k in ModelKind]
coord = st.integers(min_value=-10**6, max_value=10**6)
site2 = st.tuples(coord, coord)


def test_zero_model_is_zero():
    m = ModelSpec(ModelKind.ZERO, 3)
    assert field_value(m, (4, -2, 9), Seed(1)) == 0.0
    assert m.sigma2 == 0.0


@pytest.mark.parametrize("kind", [k for k in ModelKind if k is not ModelKind.ZERO])
def test_sigma2_is_one(kind):
    assert ModelSpec(kind, 2).sigma2 == 1.0


def test_product_xy_factorizes_exactly():
    m = ModelSpec(ModelKind.PRODUCT_XY, 2)
    seed = Seed(77, 3)
    for i, j in [(1, 1), (5, -3), (-8, 12)]:
        expected = site_noise(seed, X_TAG, i) * site_noise(seed, Y_TAG, j)
        assert field_value(m, (i, j), seed) == expected


def test_bernoulli_rademacher_values():
    m = ModelSpec(ModelKind.BERNOULLI_RADEMACHER, 2)
    vals = field_box(m, (30, 30), Seed(4))
    assert set(np.unique(vals)) == {-1.0, 1.0}


def test_box_agrees_with_pointwise_values():
    for kind in KINDS_2D:
        m = ModelSpec(kind, 2)
        box = field_box(m, (4, 5), Seed(8, 2), replicates=2)
        for r in range(2):
            for i in range(4):
                for j in range(5):
                    assert box[r, i, j] == field_value(m, (i + 1, j + 1), Seed(8, 2 + r))


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(KINDS_2D), s=site2, t=site2, master=st.integers(0, 2**64 - 1))
def test_shift_is_exact(kind, s, t, master):
    m = ModelSpec(kind, 2)
    seed = Seed(master)
    shifted = shift_field(m, t)
    assert field_value(shifted, s, seed) == field_value(m, (s[0] + t[0], s[1] + t[1]), seed)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(KINDS_2D), s=site2, t=site2)
def test_shift_group_properties(kind, s, t):
    m = ModelSpec(kind, 2)
    seed = Seed(5)
    assert field_value(shift_field(m, (0, 0)), s, seed) == field_value(m, s, seed)
    back = shift_field(shift_field(m, t), (-t[0], -t[1]))
    assert back == m
    assert field_value(back, s, seed) == field_value(m, s, seed)
    a = shift_field(shift_field(m, (1, 0)), (0, 1))
    b = shift_field(shift_field(m, (0, 1)), (1, 0))
    assert field_value(a, s, seed) == field_value(b, s, seed)


@settings(max_examples=60, deadline=None)
@given(s=st.tuples(coord, coord, coord), k=st.integers(0, 2))
def test_rotation_orbit_is_exact(s, k):
    m = ModelSpec(ModelKind.ROTATION_COUPLED, 3)
    step = tuple(int(a == k) for a in range(3))
    here = rotation_phase(m, tuple(np.asarray(c) for c in s), 9, [0])
    there = rotation_phase(m, tuple(np.asarray(c + e) for c, e in zip(s, step)), 9, [0])
    with np.errstate(over="ignore"):
        assert int(there[0] - here[0]) == m.angle_words[k]


def test_rotation_default_angles():
    m = ModelSpec(ModelKind.ROTATION_COUPLED, 3)
    assert m.angles == (math.sqrt(2) - 1, math.sqrt(3) - 1, math.sqrt(5) - 2)
    assert len(set(DEFAULT_ANGLES)) == len(DEFAULT_ANGLES)


def test_rotation_second_moment():
    # E[e^2] E[2 cos^2(2 pi U)] = 1
    m = ModelSpec(ModelKind.ROTATION_COUPLED, 2)
    vals = evaluate(m, (np.asarray(3), np.asarray(-2)), 123, np.arange(10**5))
    assert abs(np.mean(vals**2) - 1.0) < 0.02


@pytest.mark.parametrize("kind", [k for k in ModelKind if k is not ModelKind.ZERO])
def test_martingale_difference_moments(kind):
    R = 20_000
    m = ModelSpec(kind, 2)
    sites = (np.array([0, 1, 0, 1, -2]), np.array([0, 0, 1, 1, 3]))
    vals = evaluate(m, sites, 31, np.arange(R))
    assert abs(vals[:, 0].mean()) < 4 / math.sqrt(R)
    for k in range(1, 5):
        prod = vals[:, 0] * vals[:, k]
        assert abs(prod.mean()) < 4 * prod.std() / math.sqrt(R)


def test_validation():
    with pytest.raises(ValueError):
        ModelSpec(ModelKind.PRODUCT_XY, 3)
    with pytest.raises(ValueError):
        ModelSpec(ModelKind.ROTATION_COUPLED, 2, angles=(0.3, 0.3))
    with pytest.raises(ValueError):
        ModelSpec(ModelKind.ROTATION_COUPLED, 2, angles=(0.3, 1.2))
    with pytest.raises(ValueError):
        ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 0)
    with pytest.raises(ValueError):
        field_value(ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 2), (1, 2, 3), Seed(0))
    with pytest.raises(ValueError):
        shift_field(ModelSpec(ModelKind.BERNOULLI_GAUSSIAN, 2), (1,))
    with pytest.raises(ValueError):
        Region((4, 0))
    with pytest.raises(ValueError):
        Region((2**20, 2**13))


def test_meet_and_dict_roundtrip():
    assert meet((1, -2, 3), (0, 5, 3)) == (0, -2, 3)
    m = shift_field(ModelSpec(ModelKind.ROTATION_COUPLED, 2, angles=(0.25, 0.5)), (3, -1))
    assert ModelSpec.from_dict(m.to_dict()) == m
