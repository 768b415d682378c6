from fractions import Fraction

import pytest

from fsccert.errors import BudgetExceededError, DimensionMismatchError, DomainError, MalformedEncodingError
from fsccert.policy import (
    CausalPolicy,
    PolicyCoordinates,
    deterministic_policy,
    extend_history,
    from_policy,
    grid_net,
    grid_policies,
    grid_policy_at,
    history_index,
    l1_distance,
    nearest_grid_point,
    parse_policy_text,
    policy_dimension,
    random_policy,
    reachable_histories,
    render_policy_text,
    split_history,
    step_offset,
    to_policy,
    uniform_policy,
)


@pytest.mark.parametrize("n, d", [(1, 1), (2, 5), (3, 21), (4, 85)])
def test_policy_dimension(n, d, identity):
    assert policy_dimension(identity, n) == d
    assert policy_dimension(None, n) == d


def test_policy_dimension_rejects_zero_horizon():
    with pytest.raises(DomainError):
        policy_dimension(None, 0)


def test_history_index_layout():
    assert history_index((), ()) == 0
    assert history_index((1,), (0,)) == 2
    assert history_index((0, 1), (1, 1)) == 0b0111
    assert split_history(3, 0b0111) == ((0, 1), (1, 1))
    assert step_offset(1) == 0
    assert step_offset(3) == 5
    with pytest.raises(DimensionMismatchError):
        history_index((1,), ())


def test_extend_history_matches_packing():
    for xs in ((), (1,), (0, 1)):
        for ys in ((), (0,), (1, 1)):
            if len(xs) != len(ys):
                continue
            base = history_index(xs, ys)
            assert extend_history(base, len(xs), 1, 0) == history_index(xs + (1,), ys + (0,))


def test_coordinates_round_trip(rng):
    policy = random_policy(3, rng)
    coords = from_policy(policy)
    assert len(coords.theta) == 21
    assert to_policy(coords) == policy


def test_policy_validation():
    with pytest.raises(DimensionMismatchError):
        CausalPolicy(2, ((Fraction(1, 2),),))
    with pytest.raises(DomainError):
        CausalPolicy(1, ((Fraction(3, 2),),))
    with pytest.raises(DimensionMismatchError):
        PolicyCoordinates(2, (Fraction(0),) * 4)


def test_policy_distribution():
    policy = deterministic_policy(2, 1)
    assert policy.distribution(2, (1,), (1,)) == (0, 1)
    assert uniform_policy(1).prob(1, 0, 0) == Fraction(1, 2)
    with pytest.raises(DomainError):
        deterministic_policy(1, 2)


def test_l1_distance():
    assert l1_distance(uniform_policy(2), deterministic_policy(2, 0)) == Fraction(5, 2)
    with pytest.raises(DimensionMismatchError):
        l1_distance(uniform_policy(1), uniform_policy(2))


def test_grid_net_properties():
    net = grid_net(2, 4)
    assert net.dimension == 5
    assert net.eta == Fraction(5, 4)
    assert net.size == 5 ** 5
    with pytest.raises(DomainError):
        grid_net(1, 0)


def test_grid_enumeration_order_and_random_access():
    policies = list(grid_policies(1, 3, None))
    assert [p.prob_one(1, 0) for p in policies] == [0, Fraction(1, 3), Fraction(2, 3), 1]
    net = list(grid_policies(2, 1, budget=32))
    assert len(net) == 32
    for index in (0, 7, 31):
        assert grid_policy_at(2, 1, index) == net[index]
    with pytest.raises(DomainError):
        grid_policy_at(2, 1, 32)


def test_grid_budget_refusal():
    with pytest.raises(BudgetExceededError) as exc:
        grid_policies(2, 4, budget=100)
    assert exc.value.required == 3125
    assert exc.value.budget == 100
    # the cap is never implicit
    with pytest.raises(TypeError):
        grid_policies(2, 4)


def test_nearest_grid_point_within_covering_radius(rng):
    for _ in range(20):
        policy = random_policy(2, rng, max_den=97)
        nearest = nearest_grid_point(policy, 8)
        assert l1_distance(policy, nearest) <= grid_net(2, 8).eta / 2
        assert all((v * 8).denominator == 1 for v in nearest.theta)


def test_reachable_histories(identity, good1):
    # noiseless channel: y always equals x
    assert reachable_histories(identity, 2) == frozenset({0, 3})
    assert reachable_histories(identity, 1) == frozenset({0})
    # delay phase forces y = 0
    assert reachable_histories(good1, 2) == frozenset({0, 2})


def test_policy_text_round_trip(rng):
    policy = random_policy(3, rng)
    text = render_policy_text(policy)
    assert text.splitlines()[1] == f"t 1 x - y - p1 {text.splitlines()[1].split()[-1]}"
    assert parse_policy_text(text) == policy


@pytest.mark.parametrize(
    "text",
    [
        "horizon 1\n",
        "horizon 1\nt 1 x - y - p1 1/2\nt 1 x - y - p1 1/2\n",
        "horizon 1\nt 1 x 0 y - p1 1/2\n",
        "horizon 1\nt 1 x - y - q 1/2\n",
        "horizon 2\nt 1 x - y - p1 1/2\n",
    ],
)
def test_policy_text_malformed(text):
    with pytest.raises(MalformedEncodingError):
        parse_policy_text(text)
