"""Causal input policies, their coordinates and rational grid nets.

A policy assigns to every step t and history (x^{t-1}, y^{t-1}) the
probability of sending input 1. Histories are packed as integers with
x_1 (resp. y_1) as the most significant bit, and the history index is
x_int * 2^(t-1) + y_int. The flat coordinate vector lists step 1 first,
then every history of step 2 in index order, and so on.
"""

import itertools
import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .channel import UnifilarChannel, format_rational, to_rational
from .errors import (
    BudgetExceededError,
    DimensionMismatchError,
    DomainError,
    MalformedEncodingError,
)

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)


def histories_at(t: int) -> int:
    """Number of binary histories (x^{t-1}, y^{t-1}) at step t."""
    return 4 ** (t - 1)


def step_offset(t: int) -> int:
    """Flat position of the first coordinate of step t."""
    return (4 ** (t - 1) - 1) // 3


def history_index(xs: Sequence[int], ys: Sequence[int]) -> int:
    """Pack equal-length bit histories into the step-local history index."""
    if len(xs) != len(ys):
        raise DimensionMismatchError(len(xs), len(ys))
    x_int = bits_to_int(xs)
    y_int = bits_to_int(ys)
    return (x_int << len(ys)) | y_int


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | bit
    return value


def int_to_bits(value: int, length: int) -> tuple[int, ...]:
    return tuple((value >> (length - 1 - i)) & 1 for i in range(length))


def split_history(t: int, index: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Inverse of history_index for step t."""
    length = t - 1
    return int_to_bits(index >> length, length), int_to_bits(index & ((1 << length) - 1), length)


def policy_dimension(channel: UnifilarChannel | None, n: int) -> int:
    """Number of free policy coordinates d_{e,n}."""
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    inputs = channel.input_size if channel is not None else 2
    outputs = channel.output_size if channel is not None else 2
    return sum((inputs * outputs) ** (t - 1) * (inputs - 1) for t in range(1, n + 1))


# ============ Policies ============

@dataclass(frozen=True)
class CausalPolicy:
    """Causal policy p(x^n || y^{n-1}) over binary inputs.

    `tables[t-1][h]` is the probability of x_t = 1 given history index h.
    """

    horizon: int
    tables: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if len(self.tables) != self.horizon:
            raise DimensionMismatchError(self.horizon, len(self.tables))
        for t, table in enumerate(self.tables, start=1):
            if len(table) != histories_at(t):
                raise DimensionMismatchError(histories_at(t), len(table))
            for value in table:
                if not 0 <= value <= 1:
                    raise DomainError(f"policy coordinate {value} at step {t} outside [0, 1]")

    def prob_one(self, t: int, index: int) -> Fraction:
        """P(x_t = 1 | history index)."""
        return self.tables[t - 1][index]

    def prob(self, t: int, index: int, x: int) -> Fraction:
        """P(x_t = x | history index)."""
        p1 = self.tables[t - 1][index]
        return p1 if x else 1 - p1

    def distribution(self, t: int, xs: Sequence[int], ys: Sequence[int]) -> tuple[Fraction, Fraction]:
        """Input distribution (P(0), P(1)) after history (xs, ys)."""
        p1 = self.tables[t - 1][history_index(xs, ys)]
        return 1 - p1, p1


@dataclass(frozen=True)
class PolicyCoordinates:
    """Flat vector of free coordinates of a policy, in flat position order."""

    horizon: int
    theta: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        expected = policy_dimension(None, self.horizon)
        if len(self.theta) != expected:
            raise DimensionMismatchError(expected, len(self.theta))

    def position(self, t: int, index: int) -> int:
        return step_offset(t) + index


def from_policy(policy: CausalPolicy) -> PolicyCoordinates:
    """Flatten a policy into its coordinate vector."""
    theta = tuple(value for table in policy.tables for value in table)
    return PolicyCoordinates(policy.horizon, theta)


def to_policy(coords: PolicyCoordinates) -> CausalPolicy:
    """Rebuild the policy tables from a coordinate vector."""
    tables = []
    for t in range(1, coords.horizon + 1):
        start = step_offset(t)
        tables.append(tuple(Fraction(v) for v in coords.theta[start:start + histories_at(t)]))
    return CausalPolicy(coords.horizon, tuple(tables))


def policy_from_theta(n: int, theta: Sequence[Fraction]) -> CausalPolicy:
    return to_policy(PolicyCoordinates(n, tuple(theta)))


def constant_policy(n: int, value: Fraction) -> CausalPolicy:
    return CausalPolicy(n, tuple((Fraction(value),) * histories_at(t) for t in range(1, n + 1)))


def uniform_policy(n: int) -> CausalPolicy:
    """Every history maps to (1/2, 1/2)."""
    return constant_policy(n, HALF)


def deterministic_policy(n: int, bit: int) -> CausalPolicy:
    """Always send `bit`."""
    if bit not in (0, 1):
        raise DomainError(f"input bit must be 0 or 1, got {bit}")
    return constant_policy(n, Fraction(bit))


def random_policy(n: int, rng: random.Random, max_den: int = 16) -> CausalPolicy:
    """Random rational policy with denominators up to `max_den`."""
    theta = []
    for _ in range(policy_dimension(None, n)):
        den = rng.randint(1, max_den)
        theta.append(Fraction(rng.randint(0, den), den))
    return policy_from_theta(n, theta)


def coordinates_of(value: CausalPolicy | PolicyCoordinates) -> PolicyCoordinates:
    if isinstance(value, CausalPolicy):
        return from_policy(value)
    return value


def l1_distance(a: CausalPolicy | PolicyCoordinates, b: CausalPolicy | PolicyCoordinates) -> Fraction:
    """Exact l1 distance between coordinate vectors."""
    a, b = coordinates_of(a), coordinates_of(b)
    if len(a.theta) != len(b.theta):
        raise DimensionMismatchError(len(a.theta), len(b.theta))
    return sum((abs(x - y) for x, y in zip(a.theta, b.theta)), Fraction(0))


# ============ Grid nets ============

@dataclass(frozen=True)
class GridNet:
    """Net of policies with every coordinate in {0, 1/M, ..., 1}."""

    horizon: int
    resolution: int
    dimension: int

    @property
    def eta(self) -> Fraction:
        """Guaranteed l1 covering radius d/M."""
        return Fraction(self.dimension, self.resolution)

    @property
    def size(self) -> int:
        return (self.resolution + 1) ** self.dimension


def grid_net(n: int, M: int) -> GridNet:
    if M < 1:
        raise DomainError(f"grid resolution must be >= 1, got {M}")
    return GridNet(horizon=n, resolution=M, dimension=policy_dimension(None, n))


def check_budget(required: int, budget: int | None) -> None:
    if budget is not None and required > budget:
        logger.info("refusing net of %d policies (budget %d)", required, budget)
        raise BudgetExceededError(required, budget)


def grid_policies(n: int, M: int, budget: int | None) -> Iterator[CausalPolicy]:
    """Lazily enumerate the (M+1)^d grid policies in lexicographic order.

    Raises:
        BudgetExceededError: when (M+1)^d exceeds `budget`; raised before
            anything is yielded
    """
    net = grid_net(n, M)
    check_budget(net.size, budget)
    return _enumerate(net)


def _enumerate(net: GridNet) -> Iterator[CausalPolicy]:
    steps = [Fraction(j, net.resolution) for j in range(net.resolution + 1)]
    for theta in itertools.product(steps, repeat=net.dimension):
        yield policy_from_theta(net.horizon, theta)


def grid_policy_at(n: int, M: int, index: int) -> CausalPolicy:
    """Random access into the grid enumeration (most significant coordinate first)."""
    net = grid_net(n, M)
    if not 0 <= index < net.size:
        raise DomainError(f"grid index {index} outside [0, {net.size})")
    digits = []
    for _ in range(net.dimension):
        index, digit = divmod(index, M + 1)
        digits.append(Fraction(digit, M))
    return policy_from_theta(n, reversed(digits))


def nearest_grid_point(value: CausalPolicy | PolicyCoordinates, M: int) -> PolicyCoordinates:
    """Coordinate-wise rounding onto the 1/M grid (ties round down)."""
    coords = coordinates_of(value)
    rounded = []
    for v in coords.theta:
        scaled = v * M
        j = scaled.numerator // scaled.denominator
        if scaled - j > HALF:
            j += 1
        rounded.append(Fraction(j, M))
    return PolicyCoordinates(coords.horizon, tuple(rounded))


def reachable_histories(channel: UnifilarChannel, t: int) -> frozenset[int]:
    """History indices at step t with positive probability under a fully mixed policy."""
    if t < 1:
        raise DomainError(f"time index must be >= 1, got {t}")
    frontier = {(0, s) for s in channel.states if channel.initial[s] > 0}
    for length in range(t - 1):
        nxt = set()
        for (index, s) in frontier:
            for x in range(channel.input_size):
                for y in range(channel.output_size):
                    if channel.prob(s, x, y) > 0:
                        nxt.add((extend_history(index, length, x, y), channel.next_state(s, x, y)))
        frontier = nxt
    return frozenset(index for index, _ in frontier)


def extend_history(index: int, length: int, x: int, y: int) -> int:
    """Index of history (x^length x, y^length y) given the index of (x^length, y^length)."""
    x_int, y_int = index >> length, index & ((1 << length) - 1)
    return (((x_int << 1) | x) << (length + 1)) | ((y_int << 1) | y)


# ============ Text format ============

def render_policy_text(policy: CausalPolicy) -> str:
    """One line per (t, x-history, y-history) with P(x_t = 1)."""
    lines = [f"horizon {policy.horizon}"]
    for t in range(1, policy.horizon + 1):
        for index in range(histories_at(t)):
            xs, ys = split_history(t, index)
            x_str = "".join(map(str, xs)) or "-"
            y_str = "".join(map(str, ys)) or "-"
            lines.append(f"t {t} x {x_str} y {y_str} p1 {format_rational(policy.prob_one(t, index))}")
    return "\n".join(lines) + "\n"


def parse_policy_text(text: str) -> CausalPolicy:
    """Parse the policy interchange format; every history must be listed once."""
    horizon: int | None = None
    entries: dict[tuple[int, int], Fraction] = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "horizon" and len(tokens) == 2 and tokens[1].isdigit():
            horizon = int(tokens[1])
            continue
        if len(tokens) != 8 or tokens[0::2] != ["t", "x", "y", "p1"]:
            raise MalformedEncodingError("bad policy line", line_no)
        try:
            t = int(tokens[1])
            xs = () if tokens[3] == "-" else tuple(int(c) for c in tokens[3])
            ys = () if tokens[5] == "-" else tuple(int(c) for c in tokens[5])
            value = to_rational(tokens[7])
        except (ValueError, TypeError) as e:
            raise MalformedEncodingError(f"bad policy line: {e}", line_no) from e
        if t < 1 or len(xs) != t - 1 or len(ys) != t - 1 or any(b not in (0, 1) for b in xs + ys):
            raise MalformedEncodingError("history does not match step", line_no)
        key = (t, history_index(xs, ys))
        if key in entries:
            raise MalformedEncodingError("duplicate policy entry", line_no)
        entries[key] = value

    n = horizon if horizon is not None else max((t for t, _ in entries), default=0)
    if n < 1:
        raise MalformedEncodingError("empty policy", 1)
    tables = []
    for t in range(1, n + 1):
        row = []
        for index in range(histories_at(t)):
            if (t, index) not in entries:
                raise MalformedEncodingError(f"missing policy entry for step {t} history {index}", 1)
            row.append(entries[(t, index)])
        tables.append(tuple(row))
    if len(entries) != sum(histories_at(t) for t in range(1, n + 1)):
        raise MalformedEncodingError("policy entries beyond the horizon", 1)
    return CausalPolicy(n, tuple(tables))
