from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import mpmath
import pytest

from fsccert.errors import DomainError, HorizonMismatchError
from fsccert.law import induced_joint_law, l1_law_distance, marginal
from fsccert.measures import (
    _log2_bounds,
    CertifiedReal,
    binary_entropy,
    cmi_modulus,
    conditional_mutual_information,
    continuity_modulus,
    directed_information,
    dyadic,
    entropy,
    fannes_bound,
    is_dyadic,
    log2_enclosure,
    modulus_alphabet_sizes,
    per_step_information,
    precision_exponent,
    step_information,
    sum_certified,
)
from fsccert.policy import from_policy, policy_from_theta, random_policy, uniform_policy

PRECISION = dyadic(20)

# decimal expansions to 30+ digits
LOG2_3 = Fraction("1.584962500721156181453738943947816")
H2_QUARTER = Fraction("0.811278124459132863909695792039138")
QUARTER_LOG2_3 = LOG2_3 / 4


def test_precision_exponent():
    assert precision_exponent(Fraction(1, 4)) == 2
    assert precision_exponent(Fraction(1, 3)) == 2
    assert precision_exponent(Fraction(1)) == 0
    assert precision_exponent(dyadic(20)) == 20
    with pytest.raises(DomainError):
        precision_exponent(Fraction(0))


def test_dyadic_helpers():
    assert dyadic(3) == Fraction(1, 8)
    assert dyadic(-2) == 4
    assert is_dyadic(Fraction(3, 16))
    assert not is_dyadic(Fraction(1, 3))


def test_certified_real_arithmetic():
    a = CertifiedReal(Fraction(1), Fraction(2))
    b = CertifiedReal(Fraction(1, 2), Fraction(3, 4))
    assert a + b == CertifiedReal(Fraction(3, 2), Fraction(11, 4))
    assert a - b == CertifiedReal(Fraction(1, 4), Fraction(3, 2))
    assert -b == CertifiedReal(Fraction(-3, 4), Fraction(-1, 2))
    assert a.scale(-2) == CertifiedReal(-4, -2)
    assert a.midpoint == Fraction(3, 2)
    assert sum_certified([a, b, a]).width == Fraction(9, 4)
    with pytest.raises(DomainError):
        CertifiedReal(Fraction(1), Fraction(0))


def test_certified_real_outward_and_strings():
    x = CertifiedReal(Fraction(1, 3), Fraction(2, 3)).outward(2)
    assert x == CertifiedReal(Fraction(1, 4), Fraction(3, 4))
    assert x.to_strings() == ("1/4", "3/4")
    assert CertifiedReal.from_strings("1/4", "3/4") == x
    assert str(x) == "[1/4, 3/4]"


def test_log2_exact_for_powers_of_two():
    assert log2_enclosure(Fraction(8), 10) == CertifiedReal.exact(3)
    assert log2_enclosure(Fraction(1, 4), 10) == CertifiedReal.exact(-2)
    assert log2_enclosure(Fraction(1), 10) == CertifiedReal.exact(0)


def test_log2_of_three():
    enclosure = log2_enclosure(Fraction(3), 64)
    assert enclosure.contains(LOG2_3)
    assert enclosure.width <= dyadic(50)
    with pytest.raises(DomainError):
        log2_enclosure(Fraction(0), 10)


def test_entropy_examples():
    assert entropy([Fraction(1, 2), Fraction(1, 2)], PRECISION) == CertifiedReal.exact(1)
    assert entropy([Fraction(1), Fraction(0)], PRECISION) == CertifiedReal.exact(0)
    h = entropy([Fraction(3, 4), Fraction(1, 4)], PRECISION)
    assert h.contains(H2_QUARTER)
    assert h.width <= PRECISION
    assert is_dyadic(h.lower) and is_dyadic(h.upper)


def test_entropy_uniform_power_of_two_is_exact():
    assert entropy({i: Fraction(1, 8) for i in range(8)}, PRECISION) == CertifiedReal.exact(3)


@pytest.mark.parametrize("dist", [[Fraction(1, 2), Fraction(1, 3)], [Fraction(3, 2), Fraction(-1, 2)]])
def test_entropy_rejects_non_distributions(dist):
    with pytest.raises(DomainError):
        entropy(dist, PRECISION)


def test_binary_entropy():
    assert binary_entropy(Fraction(1, 2), PRECISION).contains(1)
    assert binary_entropy(0, PRECISION) == CertifiedReal.exact(0)
    assert binary_entropy(Fraction(1, 4), PRECISION).contains(H2_QUARTER)
    with pytest.raises(DomainError):
        binary_entropy(Fraction(5, 4), PRECISION)


def test_cmi_identity_channel(identity):
    law = induced_joint_law(identity, uniform_policy(1), 1)
    value = conditional_mutual_information(law, ["X1"], ["Y1"], precision=PRECISION)
    assert value.contains(1)
    assert value.width <= PRECISION


def test_cmi_independent(half_bsc):
    law = induced_joint_law(half_bsc, uniform_policy(1), 1)
    value = conditional_mutual_information(law, ["X1"], ["Y1"], precision=PRECISION)
    assert value.contains(0)
    assert value.upper >= 0 and value.lower >= -PRECISION


def test_cmi_bad_channel_last_step(bad1):
    law = induced_joint_law(bad1, uniform_policy(3), 3)
    value = conditional_mutual_information(law, ["X1", "X2", "X3"], ["Y3"], ["Y1", "Y2"], PRECISION)
    assert value.contains(0)


def test_cmi_rejects_overlap(identity):
    law = induced_joint_law(identity, uniform_policy(1), 1)
    with pytest.raises(DomainError):
        conditional_mutual_information(law, ["X1"], ["X1"], precision=PRECISION)
    with pytest.raises(DomainError):
        conditional_mutual_information(law, [], ["Y1"], precision=PRECISION)


def test_step_information_matches_named_cmi(rng, good1):
    law = induced_joint_law(good1, random_policy(3, rng), 3)
    for t in (1, 2, 3):
        fast = step_information(law, t, PRECISION)
        named = conditional_mutual_information(
            law,
            [f"X{i}" for i in range(1, t + 1)],
            [f"Y{t}"],
            [f"Y{i}" for i in range(1, t)],
            PRECISION,
        )
        assert fast.lower <= named.upper and named.lower <= fast.upper


def test_directed_information_good_channel(good1):
    value = directed_information(good1, uniform_policy(4), 4, PRECISION)
    assert value.contains(2)
    assert value.width <= PRECISION


def test_directed_information_bad_channel(rng, bad1):
    for n in (1, 2, 3):
        value = directed_information(bad1, random_policy(n, rng), n, PRECISION)
        assert value.contains(0)


def test_directed_information_per_step_bound(rng, half_bsc, good1):
    for channel in (half_bsc, good1):
        n = 3
        policy = random_policy(n, rng)
        value = directed_information(channel, policy, n, PRECISION)
        assert value.upper <= n + PRECISION
        steps = per_step_information(channel, policy, n, PRECISION)
        assert len(steps) == n
        assert sum_certified(steps) == value


def test_directed_information_horizon_mismatch(identity):
    with pytest.raises(HorizonMismatchError):
        directed_information(identity, uniform_policy(2), 3, PRECISION)


def test_fannes_examples():
    assert fannes_bound(2, Fraction(1, 2), PRECISION).contains(1)
    assert fannes_bound(5, 0, PRECISION) == CertifiedReal.exact(0)
    assert fannes_bound(1, Fraction(1, 3), PRECISION) == CertifiedReal.exact(0)
    bound = fannes_bound(4, Fraction(1, 4), PRECISION)
    assert bound.contains(QUARTER_LOG2_3 + H2_QUARTER)
    assert bound.width <= PRECISION
    with pytest.raises(DomainError):
        fannes_bound(4, Fraction(3, 4), PRECISION)
    with pytest.raises(DomainError):
        fannes_bound(0, Fraction(1, 4), PRECISION)


def _random_distribution(rng, size, max_den=64):
    weights = [rng.randint(0, max_den) for _ in range(size)]
    weights[rng.randrange(size)] += 1
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def test_fannes_inequality_random_pairs(rng):
    precision = dyadic(16)
    for _ in range(1000):
        size = rng.randint(2, 8)
        p = _random_distribution(rng, size)
        r = _random_distribution(rng, size)
        mix = Fraction(rng.randint(1, 25), 100)
        q = [(1 - mix) * a + mix * b for a, b in zip(p, r)]
        delta = sum((abs(a - b) for a, b in zip(p, q)), Fraction(0))
        assert delta <= Fraction(1, 2)
        hp, hq = entropy(p, precision), entropy(q, precision)
        bound = fannes_bound(size, delta, precision)
        # certified lower bound on |H(P) - H(Q)|
        assert max(hp.lower - hq.upper, hq.lower - hp.upper) <= bound.upper


def test_modulus_alphabet_sizes():
    assert modulus_alphabet_sizes(1) == (2, 2, 1, 4)
    assert modulus_alphabet_sizes(2) == (8, 4, 2, 16)
    assert modulus_alphabet_sizes(2, full_input_history=False) == (4, 4, 2, 8)


def test_cmi_modulus_examples():
    assert cmi_modulus(1, 1, 0, PRECISION) == CertifiedReal.exact(0)
    value = cmi_modulus(1, 1, Fraction(1, 2), PRECISION)
    assert value.contains(3 + LOG2_3 / 2)
    assert value.width <= PRECISION
    modulus = continuity_modulus(2, 3, Fraction(1, 8), PRECISION)
    assert modulus.alphabet_sizes == (8, 4, 2, 16)
    assert modulus.bound == cmi_modulus(2, 3, Fraction(1, 8), PRECISION)
    with pytest.raises(DomainError):
        cmi_modulus(3, 2, Fraction(1, 8), PRECISION)
    with pytest.raises(DomainError):
        cmi_modulus(1, 1, Fraction(3, 4), PRECISION)


def test_cmi_modulus_monotone_and_dominates_largest_term():
    deltas = [Fraction(1, 2 ** j) for j in range(1, 12)]
    for t in (1, 2, 3):
        values = [cmi_modulus(t, 3, d, PRECISION) for d in deltas]
        for larger, smaller in zip(values, values[1:]):
            assert smaller.lower <= larger.upper
        for d, value in zip(deltas, values):
            assert value.upper >= fannes_bound(2 ** (t + 1), d, PRECISION).lower
    assert cmi_modulus(1, 1, Fraction(1, 2 ** 30), PRECISION).upper < Fraction(1, 1000)


def test_step_information_continuity(rng, good1):
    n = 2
    for _ in range(10):
        p = random_policy(n, rng, max_den=50)
        theta = list(from_policy(p).theta)
        i = rng.randrange(len(theta))
        theta[i] += Fraction(1, 200) if theta[i] <= Fraction(1, 2) else -Fraction(1, 200)
        q = policy_from_theta(n, theta)
        law_p = induced_joint_law(good1, p, n)
        law_q = induced_joint_law(good1, q, n)
        delta = l1_law_distance(law_p, law_q)
        assert delta <= Fraction(1, 2)
        for t in (1, 2):
            a, b = step_information(law_p, t, PRECISION), step_information(law_q, t, PRECISION)
            bound = cmi_modulus(t, n, delta, PRECISION)
            assert max(a.lower - b.upper, b.lower - a.upper) <= bound.upper


def test_entropy_accepts_marginal(identity):
    law = induced_joint_law(identity, uniform_policy(1), 1)
    joint = marginal(law, ["X1", "Y1"])
    value = entropy(joint, PRECISION)
    assert value.contains(1)
    assert value == entropy(joint.entries, PRECISION)


def test_log2_leaves_global_interval_precision_alone():
    saved = mpmath.iv.prec
    try:
        mpmath.iv.prec = 11
        log2_enclosure(Fraction(3), 200)
        log2_enclosure(Fraction(5, 7), 97)
        assert mpmath.iv.prec == 11
    finally:
        mpmath.iv.prec = saved


def test_log2_concurrent_calls_match_serial():
    cases = [(Fraction(p, 7), bits) for p in range(1, 7) for bits in (24, 53, 80, 160)]
    serial = [log2_enclosure(value, bits) for value, bits in cases]
    _log2_bounds.cache_clear()
    with ThreadPoolExecutor(max_workers=8) as pool:
        threaded = list(pool.map(lambda case: log2_enclosure(*case), cases))
    assert threaded == serial
    for (value, bits), enclosure in zip(cases, serial):
        assert enclosure.width <= Fraction(1, 2 ** (bits - 8))


def test_entropy_enclosures_refine(rng):
    for _ in range(20):
        p = _random_distribution(rng, rng.randint(2, 8))
        enclosures = [entropy(p, dyadic(m)) for m in range(2, 30, 3)]
        lower = max(e.lower for e in enclosures)
        upper = min(e.upper for e in enclosures)
        # every enclosure holds the true value, so they share a common point
        assert lower <= upper
        assert upper - lower <= dyadic(29)
        for m, enclosure in zip(range(2, 30, 3), enclosures):
            assert enclosure.width <= dyadic(m)
