import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierbandit.arms import (
    EXAMPLE_MEANS,
    ArmError,
    ArmKind,
    ArmSet,
    ArmSpec,
    example_arm_set,
    generate_arm_set,
    mean,
    sample,
    sample_many,
)


def test_deterministic_returns_p():
    rng = np.random.default_rng(0)
    arm = ArmSpec.deterministic(0.94)
    assert all(sample(arm, rng) == 0.94 for _ in range(50))


def test_bernoulli_zero_is_always_zero():
    rng = np.random.default_rng(1)
    assert np.all(sample_many(ArmSpec.bernoulli(0.0), 1000, rng) == 0.0)


def test_binomial_normalized_empirical_mean():
    rng = np.random.default_rng(2)
    draws = sample_many(ArmSpec.binomial(0.5, 4), 1_000_000, rng)
    assert abs(draws.mean() - 0.5) <= 0.002
    assert set(np.unique(draws)) <= {0.0, 0.25, 0.5, 0.75, 1.0}


def test_means():
    assert mean(ArmSpec.beta(1, 1)) == 0.5
    assert mean(ArmSpec.beta(46.97, 8.71)) == pytest.approx(46.97 / 55.68, rel=1e-15)
    assert mean(ArmSpec.deterministic(0.06)) == 0.06


@pytest.mark.parametrize(
    "arm",
    [ArmSpec.bernoulli(0.3), ArmSpec.beta(2.5, 7.0), ArmSpec.binomial(0.7, 13), ArmSpec.deterministic(0.4)],
)
def test_samples_stay_in_unit_interval(arm):
    rng = np.random.default_rng(3)
    x = sample_many(arm, 20_000, rng)
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert 0.0 <= sample(arm, rng) <= 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind=ArmKind.BERNOULLI, p=1.5),
        dict(kind=ArmKind.BETA, a=0.0, b=1.0),
        dict(kind=ArmKind.BINOMIAL, p=0.5),
        dict(kind=ArmKind.DETERMINISTIC, p=0.5, trials=3),
    ],
)
def test_invalid_arm_specs(kwargs):
    with pytest.raises(ArmError):
        ArmSpec(**kwargs)


def test_arm_set_invariants():
    with pytest.raises(ArmError):
        ArmSet.from_means([0.5])
    with pytest.raises(ArmError):
        ArmSet.from_means([0.2, 0.5])
    with pytest.raises(ArmError):
        ArmSet.from_means([0.5, 0.5, 0.1])


def test_gaps_are_read_only():
    arms = example_arm_set()
    assert arms.gaps[0] == 0.0
    with pytest.raises(ValueError):
        arms.gaps[1] = 0.0


def test_generate_is_deterministic_under_seed():
    a = generate_arm_set(ArmKind.BETA, np.random.default_rng(11))
    b = generate_arm_set(ArmKind.BETA, np.random.default_rng(11))
    assert a == b


def test_generated_sets_respect_invariants():
    rng = np.random.default_rng(12)
    seen_k = set()
    for i in range(10_000):
        kind = list(ArmKind)[i % 4]
        arms = generate_arm_set(kind, rng)
        mu = arms.means
        seen_k.add(arms.K)
        assert 2 <= arms.K <= 30
        assert mu.min() >= 0.0 and mu.max() <= 1.0
        assert mu[0] > mu[1]
        assert np.all(np.diff(mu) <= 0)
    assert seen_k == set(range(2, 31))


def test_k_override_with_example_means():
    arms = generate_arm_set(ArmKind.DETERMINISTIC, np.random.default_rng(0), k_override=7)
    assert arms.K == 7
    fixed = ArmSet.from_means(EXAMPLE_MEANS)
    assert fixed == example_arm_set()
    np.testing.assert_array_equal(fixed.means, [0.94, 0.93, 0.54, 0.42, 0.21, 0.20, 0.06])


@pytest.mark.parametrize("kind", list(ArmKind))
def test_json_round_trip(kind):
    arms = generate_arm_set(kind, np.random.default_rng(5))
    again = ArmSet.from_json(arms.to_json())
    assert again == arms
    assert json.loads(arms.to_json())["kind"] == kind.value


def test_reward_table_shape_and_stream():
    arms = ArmSet.from_means([0.9, 0.5], kind=ArmKind.BERNOULLI)
    t1 = arms.reward_table(100, np.random.default_rng(4))
    t2 = arms.reward_table(100, np.random.default_rng(4))
    assert t1.shape == (2, 100)
    np.testing.assert_array_equal(t1, t2)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=2, max_size=12, unique=True),
)
def test_from_means_sorted_gaps(values):
    mu = sorted(values, reverse=True)
    arms = ArmSet.from_means(mu)
    assert np.all(arms.gaps >= 0)
    assert arms.gaps[1] > 0
    np.testing.assert_allclose(arms.means[0] - arms.gaps, arms.means, atol=1e-12)


arm_specs = st.one_of(
    st.floats(0.0, 1.0).map(ArmSpec.bernoulli),
    st.tuples(st.floats(0.1, 100.0), st.floats(0.1, 100.0)).map(lambda ab: ArmSpec.beta(*ab)),
    st.tuples(st.floats(0.0, 1.0), st.integers(1, 40)).map(lambda pt: ArmSpec.binomial(*pt)),
)


@settings(max_examples=40, deadline=None)
@given(arm_specs, st.integers(0, 2**31))
def test_random_arm_samples_in_range_with_correct_mean(arm, seed):
    x = sample_many(arm, 100_000, np.random.default_rng(seed))
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert abs(x.mean() - mean(arm)) <= 0.01


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(list(ArmKind)), st.integers(0, 2**31))
def test_generated_sets_always_valid(kind, seed):
    arms = generate_arm_set(kind, np.random.default_rng(seed))
    ArmSet(arms.arms)  # re-validate
    assert arms.means[0] > arms.means[1]
