"""Certified entropies, mutual informations and continuity moduli (bits).

Logarithms are enclosed with mpmath interval arithmetic and every result
is a CertifiedReal with dyadic endpoints.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from mpmath import libmp
from mpmath.ctx_iv import MPIntervalContext

from .channel import UnifilarChannel, format_rational, to_rational
from .errors import DomainError
from .law import JointLaw, Marginal, induced_joint_law, marginal, prefix_marginal
from .policy import CausalPolicy

logger = logging.getLogger(__name__)

# Extra working bits on top of the target exponent
GUARD_BITS = 16


def precision_exponent(precision: Fraction) -> int:
    """Smallest m with 2^-m <= precision."""
    precision = Fraction(precision)
    if precision <= 0:
        raise DomainError(f"precision must be positive, got {precision}")
    ceiling = -(-precision.denominator // precision.numerator)
    return (ceiling - 1).bit_length()


def dyadic(m: int) -> Fraction:
    """2^-m as an exact rational."""
    return Fraction(1, 1 << m) if m >= 0 else Fraction(1 << -m)


def is_dyadic(value: Fraction) -> bool:
    den = Fraction(value).denominator
    return den & (den - 1) == 0


def _floor_dyadic(value: Fraction, bits: int) -> Fraction:
    scaled = value * (1 << bits)
    return Fraction(scaled.numerator // scaled.denominator, 1 << bits)


def _ceil_dyadic(value: Fraction, bits: int) -> Fraction:
    scaled = value * (1 << bits)
    return Fraction(-(-scaled.numerator // scaled.denominator), 1 << bits)


@dataclass(frozen=True)
class CertifiedReal:
    """Closed interval [lower, upper] known to contain an exact real."""

    lower: Fraction
    upper: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", Fraction(self.lower))
        object.__setattr__(self, "upper", Fraction(self.upper))
        if self.lower > self.upper:
            raise DomainError(f"empty enclosure [{self.lower}, {self.upper}]")

    @classmethod
    def exact(cls, value: Fraction | int) -> "CertifiedReal":
        return cls(Fraction(value), Fraction(value))

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def midpoint(self) -> Fraction:
        return (self.lower + self.upper) / 2

    def contains(self, value: Fraction | int) -> bool:
        return self.lower <= value <= self.upper

    def __add__(self, other: "CertifiedReal") -> "CertifiedReal":
        return CertifiedReal(self.lower + other.lower, self.upper + other.upper)

    def __sub__(self, other: "CertifiedReal") -> "CertifiedReal":
        return CertifiedReal(self.lower - other.upper, self.upper - other.lower)

    def __neg__(self) -> "CertifiedReal":
        return CertifiedReal(-self.upper, -self.lower)

    def scale(self, factor: Fraction | int) -> "CertifiedReal":
        """Multiply by an exact rational."""
        a, b = self.lower * factor, self.upper * factor
        return CertifiedReal(min(a, b), max(a, b))

    def outward(self, bits: int) -> "CertifiedReal":
        """Round outward to multiples of 2^-bits."""
        return CertifiedReal(_floor_dyadic(self.lower, bits), _ceil_dyadic(self.upper, bits))

    def to_strings(self) -> tuple[str, str]:
        return format_rational(self.lower), format_rational(self.upper)

    @classmethod
    def from_strings(cls, lower: str, upper: str) -> "CertifiedReal":
        return cls(to_rational(lower), to_rational(upper))

    def __str__(self) -> str:
        lo, hi = self.to_strings()
        return f"[{lo}, {hi}]"


def sum_certified(values: Iterable[CertifiedReal]) -> CertifiedReal:
    total = CertifiedReal.exact(0)
    for value in values:
        total = total + value
    return total


# ============ Logarithms ============

def _raw_to_fraction(raw: tuple) -> Fraction:
    sign, man, exp, _ = raw
    if not man:
        if raw != libmp.fzero:
            raise ArithmeticError("non-finite interval endpoint")
        return Fraction(0)
    man = int(man)
    value = Fraction(man << exp) if exp >= 0 else Fraction(man, 1 << -exp)
    return -value if sign else value


def _power_of_two_exponent(value: int) -> int | None:
    if value > 0 and value & (value - 1) == 0:
        return value.bit_length() - 1
    return None


@lru_cache(maxsize=1 << 16)
def _log2_bounds(num: int, den: int, bits: int) -> tuple[Fraction, Fraction]:
    # Private context per call; the global mpmath.iv precision is left alone
    iv = MPIntervalContext()
    iv.prec = bits
    ratio = iv.mpf(num) / iv.mpf(den)
    enclosure = iv.ln(ratio) / iv.ln2
    lower, upper = enclosure._mpi_
    return _raw_to_fraction(lower), _raw_to_fraction(upper)


def log2_enclosure(value: Fraction | int, bits: int) -> CertifiedReal:
    """Enclosure of log2(value) computed with `bits` of working precision.

    Exact when numerator and denominator are powers of two.
    """
    q = Fraction(value)
    if q <= 0:
        raise DomainError(f"log2 of non-positive value {q}")
    num_exp = _power_of_two_exponent(q.numerator)
    den_exp = _power_of_two_exponent(q.denominator)
    if num_exp is not None and den_exp is not None:
        return CertifiedReal.exact(num_exp - den_exp)
    return CertifiedReal(*_log2_bounds(q.numerator, q.denominator, bits))


def _plog_terms(probabilities: Sequence[Fraction], bits: int) -> CertifiedReal:
    """Sum of p log2(1/p) over positive entries."""
    total = CertifiedReal.exact(0)
    for p in probabilities:
        if p:
            total = total + log2_enclosure(1 / p, bits).scale(p)
    return total


def _refine(probabilities: Sequence[Fraction], precision: Fraction) -> CertifiedReal:
    m = precision_exponent(precision)
    bits = m + GUARD_BITS + max(1, len(probabilities)).bit_length()
    while True:
        raw = _plog_terms(probabilities, bits)
        if raw.width <= dyadic(m + 1):
            return raw.outward(m + 2)
        bits *= 2


def _check_distribution(probabilities: Sequence[Fraction]) -> None:
    for p in probabilities:
        if not 0 <= p <= 1:
            raise DomainError(f"probability {p} outside [0, 1]")
    total = sum(probabilities, Fraction(0))
    if total != 1:
        raise DomainError(f"distribution sums to {total}, not 1")


def entropy(distribution: Iterable[Fraction] | Mapping | Marginal, precision: Fraction) -> CertifiedReal:
    """Shannon entropy in bits, enclosed to width <= precision.

    Raises:
        DomainError: entries outside [0, 1] or not summing to 1
    """
    if isinstance(distribution, Marginal):
        distribution = distribution.entries
    values = distribution.values() if isinstance(distribution, Mapping) else distribution
    probabilities = [Fraction(p) for p in values]
    _check_distribution(probabilities)
    return _refine(probabilities, Fraction(precision))


def binary_entropy(delta: Fraction | int, precision: Fraction) -> CertifiedReal:
    """h2(delta) = -delta log delta - (1 - delta) log(1 - delta)."""
    delta = Fraction(delta)
    if not 0 <= delta <= 1:
        raise DomainError(f"binary entropy argument {delta} outside [0, 1]")
    return _refine([delta, 1 - delta], Fraction(precision))


# ============ Mutual information ============

def _group_entropy(law: JointLaw | Marginal, names: Sequence[str], precision: Fraction) -> CertifiedReal:
    if not names:
        return CertifiedReal.exact(0)
    return entropy(marginal(law, names), precision)


def conditional_mutual_information(
    law: JointLaw | Marginal,
    u: Sequence[str],
    v: Sequence[str],
    w: Sequence[str] = (),
    precision: Fraction = Fraction(1, 1 << 20),
) -> CertifiedReal:
    """I(U;V|W) = H(U,W) + H(V,W) - H(W) - H(U,V,W), each term to precision/4.

    Raises:
        DomainError: overlapping or unknown variable groups
    """
    u, v, w = tuple(u), tuple(v), tuple(w)
    if not u or not v:
        raise DomainError("U and V must be nonempty")
    if set(u) & set(v) or set(u) & set(w) or set(v) & set(w):
        raise DomainError(f"overlapping variable groups {u}, {v}, {w}")
    part = Fraction(precision) / 4
    return (
        _group_entropy(law, u + w, part)
        + _group_entropy(law, v + w, part)
        - _group_entropy(law, w, part)
        - _group_entropy(law, u + v + w, part)
    )


def step_information(law: JointLaw, t: int, precision: Fraction) -> CertifiedReal:
    """I(X^t; Y_t | Y^{t-1}) from prefix marginals of an exact law."""
    part = Fraction(precision) / 4
    h_xw = entropy(prefix_marginal(law, t, t - 1), part)
    h_vw = entropy(prefix_marginal(law, 0, t), part)
    h_w = entropy(prefix_marginal(law, 0, t - 1), part)
    h_all = entropy(prefix_marginal(law, t, t), part)
    return h_xw + h_vw - h_w - h_all


def per_step_information(
    channel: UnifilarChannel,
    policy: CausalPolicy,
    n: int,
    precision: Fraction,
    law: JointLaw | None = None,
) -> list[CertifiedReal]:
    """Per-step terms of the directed information, each to width precision/n."""
    if law is None:
        law = induced_joint_law(channel, policy, n)
    part = Fraction(precision) / n
    return [step_information(law, t, part) for t in range(1, n + 1)]


def directed_information(
    channel: UnifilarChannel,
    policy: CausalPolicy,
    n: int,
    precision: Fraction,
) -> CertifiedReal:
    """I(X^n -> Y^n) = sum_t I(X^t; Y_t | Y^{t-1}), enclosed to width <= precision.

    Raises:
        HorizonMismatchError: if the policy horizon is not n
    """
    return sum_certified(per_step_information(channel, policy, n, precision))


# ============ Continuity moduli ============

def fannes_bound(alphabet_size: int, delta: Fraction | int, precision: Fraction) -> CertifiedReal:
    """delta log2(|A| - 1) + h2(delta), the entropy continuity bound.

    A one-letter alphabet has a single distribution, so its bound is 0.

    Raises:
        DomainError: alphabet_size < 1 or delta outside [0, 1/2]
    """
    delta = Fraction(delta)
    if alphabet_size < 1:
        raise DomainError(f"alphabet size must be >= 1, got {alphabet_size}")
    if not 0 <= delta <= Fraction(1, 2):
        raise DomainError(f"Fannes bound needs 0 <= delta <= 1/2, got {delta}")
    if alphabet_size == 1 or delta == 0:
        return CertifiedReal.exact(0)
    half = Fraction(precision) / 2
    m = precision_exponent(half)
    log_term = CertifiedReal.exact(0)
    if alphabet_size > 2:
        bits = m + GUARD_BITS + alphabet_size.bit_length()
        while True:
            log_term = log2_enclosure(alphabet_size - 1, bits).scale(delta)
            if log_term.width <= dyadic(m + 1):
                log_term = log_term.outward(m + 2)
                break
            bits *= 2
    return log_term + binary_entropy(delta, half)


@dataclass(frozen=True)
class ContinuityModulus:
    """Continuity modulus of one per-step CMI at a given delta."""

    delta: Fraction
    bound: CertifiedReal
    alphabet_sizes: tuple[int, int, int, int]


def modulus_alphabet_sizes(t: int, full_input_history: bool = True) -> tuple[int, int, int, int]:
    """Alphabet sizes of the four entropy terms of I(U;V|W) at step t.

    With the full input history U = X^t, otherwise U = X_t; V = Y_t and
    W = Y^{t-1} in both cases.
    """
    u = 2 ** t if full_input_history else 2
    v = 2
    w = 2 ** (t - 1)
    return u * w, v * w, w, u * v * w


def continuity_modulus(
    t: int,
    n: int,
    delta: Fraction | int,
    precision: Fraction,
    full_input_history: bool = True,
) -> ContinuityModulus:
    """omega_t(delta): sum of the four Fannes bounds of the entropy identity.

    Raises:
        DomainError: t outside 1..n or delta outside [0, 1/2]
    """
    if not 1 <= t <= n:
        raise DomainError(f"step {t} outside 1..{n}")
    delta = Fraction(delta)
    sizes = modulus_alphabet_sizes(t, full_input_history)
    part = Fraction(precision) / 4
    bound = sum_certified(fannes_bound(size, delta, part) for size in sizes)
    return ContinuityModulus(delta=delta, bound=bound, alphabet_sizes=sizes)


def cmi_modulus(
    t: int,
    n: int,
    delta: Fraction | int,
    precision: Fraction,
    full_input_history: bool = True,
) -> CertifiedReal:
    """Enclosure of omega_t(delta)."""
    return continuity_modulus(t, n, delta, precision, full_input_history).bound
