"""Exact induced joint laws P_p(x^n, y^n, s^{n+1}).

Trajectories are keyed by (s_1, x_int, y_int) with x_1 and y_1 as most
significant bits; the state path follows from unifilarity and is
recomputed on demand.
"""

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channel import UnifilarChannel, format_rational
from .errors import DimensionMismatchError, DomainError, HorizonMismatchError
from .policy import CausalPolicy, extend_history, histories_at, history_index, int_to_bits

logger = logging.getLogger(__name__)

Trajectory = tuple[int, int, int]

_VARIABLE = re.compile(r"^([XYS])(\d+)$")


@dataclass(frozen=True, eq=False)
class JointLaw:
    """Exact joint law of a channel driven by a policy; zero entries omitted."""

    channel: UnifilarChannel
    horizon: int
    entries: Mapping[Trajectory, Fraction]

    @property
    def variables(self) -> tuple[str, ...]:
        n = self.horizon
        return (
            tuple(f"X{t}" for t in range(1, n + 1))
            + tuple(f"Y{t}" for t in range(1, n + 1))
            + tuple(f"S{t}" for t in range(1, n + 2))
        )

    def total(self) -> Fraction:
        return sum(self.entries.values(), Fraction(0))

    def trajectory(self, key: Trajectory) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        """Expand a key into (x^n, y^n, s^{n+1})."""
        s1, x_int, y_int = key
        xs = int_to_bits(x_int, self.horizon)
        ys = int_to_bits(y_int, self.horizon)
        states = [s1]
        for x, y in zip(xs, ys):
            states.append(self.channel.next_state(states[-1], x, y))
        return xs, ys, tuple(states)

    def assignment(self, key: Trajectory) -> dict[str, int]:
        xs, ys, states = self.trajectory(key)
        values = {f"X{t}": x for t, x in enumerate(xs, start=1)}
        values.update({f"Y{t}": y for t, y in enumerate(ys, start=1)})
        values.update({f"S{t}": s for t, s in enumerate(states, start=1)})
        return values


@dataclass(frozen=True, eq=False)
class Marginal:
    """Distribution of a named tuple of variables."""

    variables: tuple[str, ...]
    entries: Mapping[tuple[int, ...], Fraction]

    def total(self) -> Fraction:
        return sum(self.entries.values(), Fraction(0))


def induced_joint_law(channel: UnifilarChannel, policy: CausalPolicy, n: int) -> JointLaw:
    """Unroll pi(s_1) prod_t p(x_t | x^{t-1}, y^{t-1}) W(y_t, s_{t+1} | x_t, s_t).

    Raises:
        HorizonMismatchError: if the policy horizon is not n
    """
    if policy.horizon != n:
        raise HorizonMismatchError(n, policy.horizon)
    # (s_1, history index, current state) -> mass
    frontier: dict[tuple[int, int, int], Fraction] = {
        (s, 0, s): mass for s, mass in enumerate(channel.initial) if mass > 0
    }
    for t in range(1, n + 1):
        nxt: dict[tuple[int, int, int], Fraction] = {}
        length = t - 1
        for (s1, index, s), mass in frontier.items():
            for x in range(channel.input_size):
                px = policy.prob(t, index, x)
                if not px:
                    continue
                for y in range(channel.output_size):
                    w = channel.prob(s, x, y)
                    if not w:
                        continue
                    key = (s1, extend_history(index, length, x, y), channel.next_state(s, x, y))
                    nxt[key] = nxt.get(key, Fraction(0)) + mass * px * w
        frontier = nxt

    entries: dict[Trajectory, Fraction] = {}
    for (s1, index, _), mass in frontier.items():
        x_int, y_int = index >> n, index & ((1 << n) - 1)
        entries[(s1, x_int, y_int)] = entries.get((s1, x_int, y_int), Fraction(0)) + mass
    logger.debug("law at n=%d has %d trajectories", n, len(entries))
    return JointLaw(channel=channel, horizon=n, entries=entries)


def trajectory_probability(
    channel: UnifilarChannel,
    policy: CausalPolicy,
    xs: Sequence[int],
    ys: Sequence[int],
    s1: int,
) -> Fraction:
    """The product pi(s_1) prod_t p(x_t|history) P(y_t|x_t,s_t) for one trajectory."""
    if len(xs) != policy.horizon or len(ys) != policy.horizon:
        raise HorizonMismatchError(policy.horizon, len(xs))
    mass = channel.initial[s1]
    s = s1
    for t in range(1, policy.horizon + 1):
        if not mass:
            break
        x, y = xs[t - 1], ys[t - 1]
        mass *= policy.prob(t, history_index(xs[:t - 1], ys[:t - 1]), x) * channel.prob(s, x, y)
        s = channel.next_state(s, x, y)
    return mass


def marginal(law: JointLaw | Marginal, variables: Iterable[str]) -> Marginal:
    """Sum out every variable not in `variables`.

    Raises:
        DomainError: unknown or repeated variable name
    """
    names = tuple(variables)
    if not names:
        raise DomainError("marginal needs at least one variable")
    if len(set(names)) != len(names):
        raise DomainError(f"repeated variable in {names}")
    unknown = [name for name in names if name not in law.variables]
    if unknown:
        raise DomainError(f"unknown variables {unknown}")

    entries: dict[tuple[int, ...], Fraction] = {}
    if isinstance(law, Marginal):
        positions = [law.variables.index(name) for name in names]
        for values, mass in law.entries.items():
            key = tuple(values[i] for i in positions)
            entries[key] = entries.get(key, Fraction(0)) + mass
    else:
        for trajectory, mass in law.entries.items():
            assignment = law.assignment(trajectory)
            key = tuple(assignment[name] for name in names)
            entries[key] = entries.get(key, Fraction(0)) + mass
    return Marginal(variables=names, entries=entries)


def prefix_marginal(law: JointLaw, x_len: int, y_len: int) -> dict[tuple[int, int], Fraction]:
    """Distribution of (X^x_len, Y^y_len) keyed by packed prefixes."""
    n = law.horizon
    if not (0 <= x_len <= n and 0 <= y_len <= n):
        raise DomainError(f"prefix lengths ({x_len}, {y_len}) outside horizon {n}")
    entries: dict[tuple[int, int], Fraction] = {}
    for (_, x_int, y_int), mass in law.entries.items():
        key = (x_int >> (n - x_len), y_int >> (n - y_len))
        entries[key] = entries.get(key, Fraction(0)) + mass
    return entries


def l1_law_distance(first: JointLaw, second: JointLaw) -> Fraction:
    """Exact sum of |P - Q| over the union of supports.

    Raises:
        DimensionMismatchError: horizons or channel shapes differ
    """
    if first.horizon != second.horizon or first.channel.num_states != second.channel.num_states:
        raise DimensionMismatchError(
            (first.horizon, first.channel.num_states),
            (second.horizon, second.channel.num_states),
        )
    keys = set(first.entries) | set(second.entries)
    zero = Fraction(0)
    return sum((abs(first.entries.get(k, zero) - second.entries.get(k, zero)) for k in keys), zero)


def lipschitz_constant(channel: UnifilarChannel, n: int) -> int:
    """L_{e,n} = |X|^n |Y|^n |S|^{n+1} n."""
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    return channel.input_size ** n * channel.output_size ** n * channel.num_states ** (n + 1) * n


def render_law_text(law: JointLaw) -> str:
    """Debug dump: one trajectory per line (s1, x bits, y bits, state path, mass)."""
    labels = law.channel.labels
    lines = []
    for key in sorted(law.entries):
        xs, ys, states = law.trajectory(key)
        path = ",".join(labels[s] for s in states)
        x_str = "".join(map(str, xs))
        y_str = "".join(map(str, ys))
        lines.append(f"{labels[key[0]]} {x_str} {y_str} {path} {format_rational(law.entries[key])}")
    return "\n".join(lines) + "\n"


# ============ Float forward recursion ============

def transition_tensor(channel: UnifilarChannel) -> np.ndarray:
    """T[s, x, y, s'] = P(y|x,s) [s' = f(s,x,y)] as floats."""
    T = np.zeros((channel.num_states, channel.input_size, channel.output_size, channel.num_states))
    for s in channel.states:
        for x in range(channel.input_size):
            for y in range(channel.output_size):
                T[s, x, y, channel.next_state(s, x, y)] = float(channel.prob(s, x, y))
    return T


def float_law_arrays(channel: UnifilarChannel, theta: np.ndarray, n: int) -> list[np.ndarray]:
    """Joint pmfs D_t[x^t, y^t] for t = 1..n from float policy coordinates.

    Used only by the heuristic optimizer; certified code never touches floats.
    """
    theta = np.asarray(theta, dtype=float)
    T = transition_tensor(channel)
    S = channel.num_states
    # G[x^{t-1}, y^{t-1}, s_t]
    G = np.asarray([float(p) for p in channel.initial]).reshape(1, 1, S)
    arrays = []
    offset = 0
    for t in range(1, n + 1):
        h = 2 ** (t - 1)
        p1 = theta[offset:offset + histories_at(t)].reshape(h, h)
        offset += histories_at(t)
        pol = np.stack([1.0 - p1, p1], axis=1)  # [x^{t-1}, x_t, y^{t-1}]
        A = G[:, None, :, :] * pol[:, :, :, None]  # [x^{t-1}, x_t, y^{t-1}, s_t]
        B = np.einsum("axbs,sxyt->axbyt", A, T)
        G = B.reshape(2 * h, 2 * h, S)
        arrays.append(G.sum(axis=2))
    return arrays
