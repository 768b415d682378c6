"""Rational unifilar finite-state channels and the delayed-activation family."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .errors import ChannelValidationError, DomainError

logger = logging.getLogger(__name__)

Rat = Fraction

# Alphabets are binary throughout; sizes are still carried on the channel
BINARY = 2
STAR_LABEL = "*"


def to_rational(value: Any) -> Fraction:
    """Convert an int, Fraction or 'p/q' string to a Fraction.

    Floats are refused: channel parameters must be given exactly.
    """
    if isinstance(value, bool):
        raise TypeError(f"not a rational: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise TypeError(f"not a rational: {value!r}") from e
    raise TypeError(f"not a rational: {value!r} ({type(value).__name__})")


def format_rational(value: Fraction) -> str:
    """Render a Fraction as 'p/q' (or 'p' when integral)."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _channel_violations(
    num_states: int,
    update: Sequence[int],
    kernel: Sequence[Fraction],
    initial: Sequence[Fraction],
    labels: Sequence[str],
    input_size: int,
    output_size: int,
) -> list[str]:
    """Collect every violated channel invariant for a normalized description."""
    violations: list[str] = []
    if num_states < 1:
        return ["state set is empty"]
    if input_size != BINARY or output_size != BINARY:
        violations.append(f"non-binary alphabet ({input_size} inputs, {output_size} outputs)")
        return violations

    slots = num_states * input_size * output_size
    if len(kernel) != slots:
        violations.append(f"kernel has {len(kernel)} entries, expected {slots}")
        return violations
    if len(update) != slots:
        violations.append(f"update table has {len(update)} entries, expected {slots}")
        return violations
    if len(initial) != num_states:
        violations.append(f"initial distribution has {len(initial)} entries, expected {num_states}")
        return violations

    for s in range(num_states):
        for x in range(input_size):
            row = kernel[(s * input_size + x) * output_size:(s * input_size + x + 1) * output_size]
            for y, value in enumerate(row):
                if not 0 <= value <= 1:
                    violations.append(
                        f"kernel entry P({y}|x={x}, s={labels[s]}) = {format_rational(value)} outside [0, 1]"
                    )
            total = sum(row, Fraction(0))
            if total != 1:
                violations.append(
                    f"kernel row (s={labels[s]}, x={x}) sums to {format_rational(total)}, not 1"
                )
            for y in range(output_size):
                target = update[(s * input_size + x) * output_size + y]
                if target is None:
                    violations.append(f"update missing for (s={labels[s]}, x={x}, y={y})")
                elif not 0 <= target < num_states:
                    violations.append(
                        f"update (s={labels[s]}, x={x}, y={y}) -> unknown state {target}"
                    )

    for s, value in enumerate(initial):
        if not 0 <= value <= 1:
            violations.append(
                f"initial probability of state {labels[s]} = {format_rational(value)} outside [0, 1]"
            )
    total = sum(initial, Fraction(0))
    if total != 1:
        violations.append(f"initial distribution sums to {format_rational(total)}, not 1")
    return violations


@dataclass(frozen=True)
class UnifilarChannel:
    """A rational unifilar FSC with binary input and output.

    States are the integers 0..num_states-1. `update` and `kernel` are flat
    tables in row-major (s, x, y) order: `kernel[i]` is P(y|x,s) and
    `update[i]` is the next state f(s,x,y). Human-readable `labels` do not
    take part in equality.
    """

    num_states: int
    update: tuple[int, ...]
    kernel: tuple[Fraction, ...]
    initial: tuple[Fraction, ...]
    labels: tuple[str, ...] = field(default=(), compare=False)
    input_size: int = BINARY
    output_size: int = BINARY

    def __post_init__(self) -> None:
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(s) for s in range(self.num_states)))
        violations = _channel_violations(
            self.num_states, self.update, self.kernel, self.initial,
            self.labels, self.input_size, self.output_size,
        )
        if violations:
            raise ChannelValidationError(violations)

    @property
    def states(self) -> range:
        return range(self.num_states)

    def slot(self, s: int, x: int, y: int) -> int:
        """Flat table index of (s, x, y)."""
        return (s * self.input_size + x) * self.output_size + y

    def prob(self, s: int, x: int, y: int) -> Fraction:
        """Output probability P(y | x, s)."""
        return self.kernel[self.slot(s, x, y)]

    def next_state(self, s: int, x: int, y: int) -> int:
        """Deterministic state update f(s, x, y)."""
        return self.update[self.slot(s, x, y)]

    def row(self, s: int, x: int) -> tuple[Fraction, ...]:
        """Output distribution P(. | x, s)."""
        start = self.slot(s, x, 0)
        return self.kernel[start:start + self.output_size]


# ============ Validation ============

def _resolve_state(key: Any, labels: Sequence[str]) -> int:
    """Map a state label or index to its index."""
    if isinstance(key, str):
        if key in labels:
            return labels.index(key)
        raise KeyError(key)
    if isinstance(key, int) and not isinstance(key, bool) and 0 <= key < len(labels):
        return key
    raise KeyError(key)


def check_channel(raw: Mapping[str, Any]) -> list[str]:
    """List every invariant a raw channel description violates.

    Args:
        raw: Mapping with keys 'states' (count or list of labels), 'initial'
            (list in state order or mapping label -> rational), 'kernel'
            (mapping (s, x, y) -> rational, missing entries are 0) and
            'update' (mapping (s, x, y) -> next state)

    Returns:
        Violations in a stable order; empty iff the description is valid
    """
    try:
        _build(raw)
    except ChannelValidationError as e:
        return e.violations
    return []


def _build(raw: Mapping[str, Any]) -> UnifilarChannel:
    """Normalize a raw description and construct the channel (validating it)."""
    violations: list[str] = []
    missing = [key for key in ("states", "initial", "kernel", "update") if key not in raw]
    if missing:
        raise ChannelValidationError([f"missing field '{key}'" for key in missing])

    states = raw["states"]
    if isinstance(states, int) and not isinstance(states, bool):
        labels = [str(s) for s in range(states)]
    else:
        labels = [str(label) for label in states]
        if len(set(labels)) != len(labels):
            violations.append("duplicate state labels")
    num_states = len(labels)
    if num_states < 1:
        raise ChannelValidationError(["state set is empty"])

    slots = num_states * BINARY * BINARY
    kernel: list[Fraction] = [Fraction(0)] * slots
    update: list[Any] = [None] * slots

    def slot_of(key: Any, table: str) -> int | None:
        try:
            s, x, y = key
            s_index = _resolve_state(s, labels)
        except (TypeError, ValueError, KeyError):
            violations.append(f"{table} key {key!r} does not name a (state, x, y) triple")
            return None
        if x not in (0, 1) or y not in (0, 1):
            violations.append(f"{table} key {key!r} has a non-binary symbol")
            return None
        return (s_index * BINARY + x) * BINARY + y

    for key, value in dict(raw["kernel"]).items():
        index = slot_of(key, "kernel")
        if index is None:
            continue
        try:
            kernel[index] = to_rational(value)
        except TypeError as e:
            violations.append(f"kernel entry {key!r}: {e}")

    for key, value in dict(raw["update"]).items():
        index = slot_of(key, "update")
        if index is None:
            continue
        try:
            update[index] = _resolve_state(value, labels)
        except KeyError:
            update[index] = -1 if not isinstance(value, int) else value

    initial_raw = raw["initial"]
    initial: list[Fraction] = [Fraction(0)] * num_states
    try:
        if isinstance(initial_raw, Mapping):
            for key, value in initial_raw.items():
                initial[_resolve_state(key, labels)] = to_rational(value)
        else:
            values = list(initial_raw)
            if len(values) != num_states:
                violations.append(
                    f"initial distribution has {len(values)} entries, expected {num_states}"
                )
            for s, value in enumerate(values[:num_states]):
                initial[s] = to_rational(value)
    except (TypeError, KeyError) as e:
        violations.append(f"initial distribution: {e}")

    violations.extend(
        _channel_violations(num_states, update, kernel, initial, labels, BINARY, BINARY)
    )
    if violations:
        raise ChannelValidationError(violations)
    return UnifilarChannel(
        num_states=num_states,
        update=tuple(update),
        kernel=tuple(kernel),
        initial=tuple(initial),
        labels=tuple(labels),
    )


def validate_channel(raw: Mapping[str, Any] | UnifilarChannel) -> UnifilarChannel:
    """Validate a candidate channel description.

    Raises:
        ChannelValidationError: listing every violated invariant
    """
    if isinstance(raw, UnifilarChannel):
        return raw
    channel = _build(raw)
    logger.debug("validated channel with %d states", channel.num_states)
    return channel


def full_kernel(channel: UnifilarChannel) -> dict[tuple[int, int], dict[tuple[int, int], Fraction]]:
    """W(y, s' | x, s) = P(y|x,s) [s' = f(s,x,y)], keyed (s, x) -> (y, s') -> mass."""
    table: dict[tuple[int, int], dict[tuple[int, int], Fraction]] = {}
    for s in channel.states:
        for x in range(channel.input_size):
            row: dict[tuple[int, int], Fraction] = {}
            for y in range(channel.output_size):
                for s_next in channel.states:
                    mass = channel.prob(s, x, y) if s_next == channel.next_state(s, x, y) else Fraction(0)
                    row[(y, s_next)] = mass
            table[(s, x)] = row
    return table


def reachable_states(channel: UnifilarChannel, t: int) -> frozenset[int]:
    """States S_t can occupy with positive probability under some policy."""
    if t < 1:
        raise DomainError(f"time index must be >= 1, got {t}")
    current = frozenset(s for s in channel.states if channel.initial[s] > 0)
    for _ in range(t - 1):
        current = frozenset(
            channel.next_state(s, x, y)
            for s in current
            for x in range(channel.input_size)
            for y in range(channel.output_size)
            if channel.prob(s, x, y) > 0
        )
    return current


# ============ Memoryless helpers ============

def memoryless_channel(rows: Sequence[Sequence[Any]]) -> UnifilarChannel:
    """Single-state channel with P(y|x) = rows[x][y]."""
    kernel = {("0", x, y): rows[x][y] for x in range(BINARY) for y in range(BINARY)}
    update = {("0", x, y): "0" for x in range(BINARY) for y in range(BINARY)}
    return validate_channel({"states": ["0"], "initial": [1], "kernel": kernel, "update": update})


def identity_channel() -> UnifilarChannel:
    """Noiseless single-state channel, P(y|x) = [y = x]."""
    return memoryless_channel([[1, 0], [0, 1]])


def bsc(crossover: Any) -> UnifilarChannel:
    """Memoryless binary symmetric channel with the given crossover probability."""
    p = to_rational(crossover)
    return memoryless_channel([[1 - p, p], [p, 1 - p]])


# ============ Delayed-activation family ============

class Variant(str, Enum):
    """Behaviour of the delayed-activation channel once it is active."""

    GOOD = "good"
    BAD = "bad"


@dataclass(frozen=True)
class DelayedActivationSpec:
    """Parameters of a delayed-activation channel: delay N and variant."""

    N: int
    variant: Variant

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 1:
            raise DomainError(f"delay N must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "variant", Variant(self.variant))


def make_delayed_activation(spec: DelayedActivationSpec) -> UnifilarChannel:
    """Build the delayed-activation channel for `spec`.

    States are 0..N followed by the absorbing active state '*'. The state
    increments regardless of (x, y); during the delay phase the output is 0
    deterministically. Once active the channel is noiseless (good) or a
    fair coin independent of the input (bad).
    """
    N = spec.N
    labels = [str(s) for s in range(N + 1)] + [STAR_LABEL]
    kernel: dict[tuple[str, int, int], Fraction] = {}
    update: dict[tuple[str, int, int], str] = {}
    for s, label in enumerate(labels):
        next_label = STAR_LABEL if label == STAR_LABEL or s == N else str(s + 1)
        for x in range(BINARY):
            for y in range(BINARY):
                update[(label, x, y)] = next_label
                if label != STAR_LABEL:
                    kernel[(label, x, y)] = Fraction(int(y == 0))
                elif spec.variant is Variant.GOOD:
                    kernel[(label, x, y)] = Fraction(int(y == x))
                else:
                    kernel[(label, x, y)] = Fraction(1, 2)
    return validate_channel({"states": labels, "initial": {"0": 1}, "kernel": kernel, "update": update})


def identify_family(channel: UnifilarChannel) -> DelayedActivationSpec | None:
    """Return the family parameters if `channel` is a delayed-activation channel."""
    if channel.num_states < 3:
        return None
    for variant in Variant:
        spec = DelayedActivationSpec(channel.num_states - 2, variant)
        if make_delayed_activation(spec) == channel:
            return spec
    return None


def closed_form_normalized_value(spec: DelayedActivationSpec, n: int) -> Fraction:
    """Exact normalized finite-horizon value a_n = V_n / n of a family channel."""
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    if spec.variant is Variant.BAD or n <= spec.N + 1:
        return Fraction(0)
    return Fraction(n - (spec.N + 1), n)


def closed_form_value(spec: DelayedActivationSpec, n: int) -> Fraction:
    """Exact unnormalized finite-horizon value V_n of a family channel."""
    return closed_form_normalized_value(spec, n) * n


def closed_form_capacity(spec: DelayedActivationSpec) -> Fraction:
    """Feedback capacity of a family channel: 1 when good, 0 when bad."""
    return Fraction(1) if spec.variant is Variant.GOOD else Fraction(0)


def family_channels(N_values: Iterable[int]) -> list[tuple[DelayedActivationSpec, UnifilarChannel]]:
    """Good and bad channels for each delay in `N_values`."""
    pairs = []
    for N in N_values:
        for variant in Variant:
            spec = DelayedActivationSpec(N, variant)
            pairs.append((spec, make_delayed_activation(spec)))
    return pairs
