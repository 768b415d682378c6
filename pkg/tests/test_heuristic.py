from fractions import Fraction

import numpy as np
import pytest

from fsccert.channel import bsc
from fsccert.heuristic import float_directed_information, heuristic_value, rationalize
from fsccert.measures import directed_information, dyadic
from fsccert.policy import from_policy, random_policy

ONE_MINUS_H2_QUARTER = 0.18872187554086714


def test_rationalize_clamps():
    values = rationalize(np.array([0.5, 1.0000001, -1e-9, 1 / 3]))
    assert values[:3] == [Fraction(1, 2), Fraction(1), Fraction(0)]
    assert values[3] == Fraction(1, 3)


def test_float_directed_information_matches_certified(rng, good1):
    policy = random_policy(3, rng)
    theta = np.array([float(v) for v in from_policy(policy).theta])
    certified = directed_information(good1, policy, 3, dyadic(20))
    assert float_directed_information(good1, theta, 3) == pytest.approx(float(certified.midpoint), abs=1e-6)


def test_heuristic_identity(identity):
    result = heuristic_value(identity, 1, restarts=2, iterations=20)
    assert result.value == 1
    assert result.policy.prob_one(1, 0) == Fraction(1, 2)
    assert result.eval_precision == dyadic(20)


def test_heuristic_good_channel(good1):
    result = heuristic_value(good1, 4, restarts=2, iterations=50)
    assert abs(float(result.value) - 2) <= 1e-3
    assert result.value <= 2


@pytest.mark.slow
def test_heuristic_good_channel_longer_horizon(good1):
    result = heuristic_value(good1, 6, restarts=1, iterations=20)
    assert abs(float(result.value) - 4) <= 1e-3


@pytest.mark.parametrize("n", [1, 2])
def test_heuristic_bsc(n):
    result = heuristic_value(bsc("1/4"), n, restarts=2, iterations=50)
    assert abs(float(result.value) / n - ONE_MINUS_H2_QUARTER) <= 1e-3


def test_heuristic_is_deterministic():
    first = heuristic_value(bsc("1/3"), 2, restarts=3, iterations=10, seed=7)
    second = heuristic_value(bsc("1/3"), 2, restarts=3, iterations=10, seed=7)
    assert first == second
    assert first.seed == 7 and first.restarts == 3
