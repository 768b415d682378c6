"""Certified finite-horizon values: grid nets, report-bound nets and brackets.

Every returned CertifiedValue satisfies |estimate - value| <= radius, with
estimate and radius dyadic rationals.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Literal

import numpy as np

from .channel import UnifilarChannel, identify_family, closed_form_value, reachable_states
from .config import DEFAULT_BUDGET, DEFAULT_ITERATIONS, DEFAULT_RESTARTS
from .encoding import channel_hash, decode_channel
from .errors import BudgetExceededError, ConsistencyError, DomainError, WallTimeExceededError
from .heuristic import HeuristicResult, heuristic_value, rationalize
from .law import lipschitz_constant
from .measures import (
    CertifiedReal,
    cmi_modulus,
    directed_information,
    dyadic,
    entropy,
    log2_enclosure,
    precision_exponent,
    sum_certified,
)
from .policy import (
    CausalPolicy,
    check_budget,
    grid_net,
    grid_policies,
    grid_policy_at,
    policy_dimension,
    uniform_policy,
)

logger = logging.getLogger(__name__)

Strategy = Literal["auto", "grid", "bracket"]

# Largest net size (in bits) written out as an exact integer in errors
MAX_EXACT_COUNT_BITS = 4096
# Policies per task handed to a worker process
CHUNKS_PER_WORKER = 4
BA_MAX_ITER = 10000
BA_THRESH = 1e-14
PRIOR_DENOMINATOR = 2 ** 32


@dataclass(frozen=True)
class Provenance:
    """How a certified value was obtained; enough to recheck its radius."""

    strategy: str
    channel_hash: str
    k: int | None = None
    M: int | None = None
    eta: Fraction | None = None
    delta: Fraction | None = None
    lipschitz: int | None = None
    dimension: int | None = None
    modulus_sum: Fraction | None = None
    eval_precision: Fraction | None = None
    policies_evaluated: int = 0
    argmax_index: int | None = None
    lower_bound: Fraction | None = None
    upper_bound: Fraction | None = None
    rounding: Fraction = Fraction(0)
    seed: int | None = None
    restarts: int | None = None
    iterations: int | None = None


@dataclass(frozen=True)
class CertifiedValue:
    """Estimate r and radius eps with |r - V_n| <= eps (or a_n when normalized)."""

    estimate: Fraction
    radius: Fraction
    horizon: int
    normalized: bool
    provenance: Provenance

    @property
    def interval(self) -> CertifiedReal:
        return CertifiedReal(self.estimate - self.radius, self.estimate + self.radius)

    def contains(self, value: Fraction | int) -> bool:
        return abs(self.estimate - Fraction(value)) <= self.radius


def as_channel(channel: UnifilarChannel | bytes) -> UnifilarChannel:
    if isinstance(channel, (bytes, bytearray)):
        return decode_channel(channel)
    return channel


def provenance_radius_bound(value: CertifiedValue) -> Fraction:
    """Radius implied by the provenance record; never smaller than the stored one."""
    p = value.provenance
    if p.strategy in ("grid", "report"):
        base = p.modulus_sum + 2 * p.eval_precision
    else:
        base = (p.upper_bound - p.lower_bound) / 2
    if value.normalized:
        base = base / value.horizon
    return base + p.rounding


def check_provenance(value: CertifiedValue) -> bool:
    return value.radius >= 0 and provenance_radius_bound(value) >= value.radius


# ============ Moduli and grid parameters ============

def capped_modulus(t: int, n: int, delta: Fraction, precision: Fraction) -> CertifiedReal:
    """min(omega_t(delta), 1); 1 when delta > 1/2.

    Each per-step information of a binary-output channel lies in [0, 1].
    """
    if delta > Fraction(1, 2):
        return CertifiedReal.exact(1)
    bound = cmi_modulus(t, n, delta, precision)
    return CertifiedReal(min(bound.lower, 1), min(bound.upper, 1))


def modulus_sum(n: int, delta: Fraction, precision: Fraction) -> CertifiedReal:
    """Sum over t of the capped moduli, each enclosed to precision/n."""
    part = precision / n
    return sum_certified(capped_modulus(t, n, delta, part) for t in range(1, n + 1))


@dataclass(frozen=True)
class GridPlan:
    """Net chosen for a target precision exponent k."""

    k: int
    eta_exponent: int
    M: int
    dimension: int
    lipschitz: int
    delta: Fraction
    modulus_sum: Fraction

    @property
    def eta(self) -> Fraction:
        return dyadic(self.eta_exponent)

    @property
    def size_bits(self) -> int:
        return self.dimension * (self.M + 1).bit_length()

    @property
    def size(self) -> int:
        return (self.M + 1) ** self.dimension

    @property
    def size_expr(self) -> str:
        return f"({self.M + 1})^{self.dimension}"

    def fits(self, budget: int | None) -> bool:
        if budget is None:
            return True
        # (M+1)^d >= 2^(d * (bit_length - 1))
        if self.dimension * ((self.M + 1).bit_length() - 1) > budget.bit_length():
            return False
        return self.size <= budget


def plan_grid(channel: UnifilarChannel, n: int, k: int) -> GridPlan:
    """Halve eta from 1/2 until delta = L eta <= 1/2 and sum_t omega_t(delta) <= 2^-(k+2)."""
    if k < 0:
        raise DomainError(f"precision exponent must be >= 0, got {k}")
    L = lipschitz_constant(channel, n)
    d = policy_dimension(channel, n)
    target = dyadic(k + 2)
    j = L.bit_length()
    while True:
        delta = L * dyadic(j)
        if delta <= Fraction(1, 2):
            total = modulus_sum(n, delta, target / 4)
            if total.upper <= target:
                break
        j += 1
    plan = GridPlan(k=k, eta_exponent=j, M=d << j, dimension=d, lipschitz=L,
                    delta=delta, modulus_sum=total.upper)
    logger.info("grid plan n=%d k=%d: eta=2^-%d, M=%d, net %s", n, k, j, plan.M, plan.size_expr)
    return plan


def feasible_k(channel: UnifilarChannel, n: int, k: int, budget: int | None) -> int | None:
    """Largest k' < k whose grid plan fits the budget."""
    for candidate in range(k - 1, -1, -1):
        if plan_grid(channel, n, candidate).fits(budget):
            return candidate
    return None


def _refuse(plan: GridPlan, budget: int, channel: UnifilarChannel, n: int) -> BudgetExceededError:
    required = plan.size if plan.size_bits <= MAX_EXACT_COUNT_BITS else None
    return BudgetExceededError(
        required, budget, feasible_k=feasible_k(channel, n, plan.k, budget), required_expr=plan.size_expr
    )


# ============ Net evaluation ============

@dataclass(frozen=True)
class NetSummary:
    """Reduction of per-policy enclosures over an index range."""

    max_lower: Fraction
    max_upper: Fraction
    best_midpoint: Fraction
    best_index: int
    count: int


def _merge(a: NetSummary | None, b: NetSummary) -> NetSummary:
    if a is None:
        return b
    if b.best_midpoint > a.best_midpoint or (b.best_midpoint == a.best_midpoint and b.best_index < a.best_index):
        best_mid, best_index = b.best_midpoint, b.best_index
    else:
        best_mid, best_index = a.best_midpoint, a.best_index
    return NetSummary(
        max_lower=max(a.max_lower, b.max_lower),
        max_upper=max(a.max_upper, b.max_upper),
        best_midpoint=best_mid,
        best_index=best_index,
        count=a.count + b.count,
    )


def _evaluate_range(
    channel: UnifilarChannel,
    n: int,
    policies: Iterable[CausalPolicy],
    start: int,
    precision: Fraction,
    deadline: float | None = None,
) -> NetSummary:
    summary = None
    for index, policy in enumerate(policies, start=start):
        if deadline is not None and time.monotonic() > deadline:
            raise WallTimeExceededError(0, index - start)
        enclosure = directed_information(channel, policy, n, precision)
        logger.debug("policy %d: %s", index, enclosure)
        summary = _merge(summary, NetSummary(enclosure.lower, enclosure.upper, enclosure.midpoint, index, 1))
    return summary


def _evaluate_task(args: tuple) -> NetSummary:
    channel, n, M, start, stop, precision = args
    policies = (grid_policy_at(n, M, index) for index in range(start, stop))
    return _evaluate_range(channel, n, policies, start, precision)


def evaluate_grid(
    channel: UnifilarChannel,
    n: int,
    M: int,
    precision: Fraction,
    workers: int = 1,
    wall_time: float | None = None,
    budget: int | None = None,
) -> NetSummary:
    """Evaluate every grid policy; the reduction does not depend on `workers`.

    Raises:
        BudgetExceededError: the net has more than `budget` policies
    """
    size = grid_net(n, M).size
    deadline = time.monotonic() + wall_time if wall_time else None
    if workers <= 1 or size < 2 * workers:
        policies = grid_policies(n, M, budget)
        try:
            return _evaluate_range(channel, n, policies, 0, precision, deadline)
        except WallTimeExceededError as e:
            raise WallTimeExceededError(wall_time, e.evaluated) from None

    check_budget(size, budget)
    chunks = workers * CHUNKS_PER_WORKER
    bounds = [size * i // chunks for i in range(chunks + 1)]
    tasks = [(channel, n, M, bounds[i], bounds[i + 1], precision) for i in range(chunks) if bounds[i] < bounds[i + 1]]
    summary = None
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_evaluate_task, tasks):
            summary = _merge(summary, part)
            if deadline is not None and time.monotonic() > deadline:
                pool.shutdown(wait=False, cancel_futures=True)
                raise WallTimeExceededError(wall_time, summary.count)
    return summary


def evaluate_net(
    channel: UnifilarChannel | bytes,
    n: int,
    M: int,
    eval_precision: Fraction,
    budget: int | None = None,
    workers: int = 1,
    wall_time: float | None = None,
) -> CertifiedValue:
    """Report-bound mode: evaluate the 1/M grid and certify its radius honestly.

    r is the largest enclosure midpoint (lowest index on ties) and the
    radius is sum_t min(omega_t(L d / M), 1) + 2 eval_precision.
    """
    channel = as_channel(channel)
    net = grid_net(n, M)
    if budget is not None and net.size > budget:
        raise BudgetExceededError(net.size, budget, required_expr=f"({M + 1})^{net.dimension}")
    eval_precision = dyadic(precision_exponent(eval_precision))
    L = lipschitz_constant(channel, n)
    delta = L * net.eta
    omega = modulus_sum(n, delta, eval_precision)
    summary = evaluate_grid(channel, n, M, eval_precision, workers, wall_time, budget)
    radius = omega.upper + 2 * eval_precision
    logger.info("report-bound net n=%d M=%d: r=%s radius=%s", n, M, summary.best_midpoint, radius)
    return CertifiedValue(
        estimate=summary.best_midpoint,
        radius=radius,
        horizon=n,
        normalized=False,
        provenance=Provenance(
            strategy="report",
            channel_hash=channel_hash(channel),
            M=M,
            eta=net.eta,
            delta=delta,
            lipschitz=L,
            dimension=net.dimension,
            modulus_sum=omega.upper,
            eval_precision=eval_precision,
            policies_evaluated=summary.count,
            argmax_index=summary.best_index,
            lower_bound=summary.max_lower,
            upper_bound=summary.max_upper + omega.upper,
        ),
    )


def grid_value(
    channel: UnifilarChannel,
    n: int,
    k: int,
    budget: int | None = None,
    workers: int = 1,
    wall_time: float | None = None,
    plan: GridPlan | None = None,
) -> CertifiedValue:
    """Target-precision net: |r - V_n| <= 2^-k from the moduli-driven grid."""
    plan = plan or plan_grid(channel, n, k)
    if not plan.fits(budget):
        raise _refuse(plan, budget, channel, n)
    precision = dyadic(k + 2)
    summary = evaluate_grid(channel, n, plan.M, precision, workers, wall_time, budget)
    lower = summary.max_lower
    upper = summary.max_upper + plan.modulus_sum
    return CertifiedValue(
        estimate=(lower + upper) / 2,
        radius=(upper - lower) / 2,
        horizon=n,
        normalized=False,
        provenance=Provenance(
            strategy="grid",
            channel_hash=channel_hash(channel),
            k=k,
            M=plan.M,
            eta=plan.eta,
            delta=plan.delta,
            lipschitz=plan.lipschitz,
            dimension=plan.dimension,
            modulus_sum=plan.modulus_sum,
            eval_precision=precision,
            policies_evaluated=summary.count,
            argmax_index=summary.best_index,
            lower_bound=lower,
            upper_bound=upper,
        ),
    )


# ============ Single-letter capacity and brackets ============

def blahut_arimoto(rows: np.ndarray, thresh: float = BA_THRESH, max_iter: int = BA_MAX_ITER) -> np.ndarray:
    """Capacity-achieving input prior of the DMC with transition rows P(y|x)."""
    m = rows.shape[0]
    prior = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        out = prior @ rows
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.where(rows > 0, np.log(rows / out), 0.0)
        weights = prior * np.exp((rows * log_ratio).sum(axis=1))
        updated = weights / weights.sum()
        if np.linalg.norm(updated - prior) < thresh:
            return updated
        prior = updated
    return prior


def _divergence_upper(row: tuple[Fraction, ...], out: tuple[Fraction, ...], precision: Fraction) -> Fraction:
    """Upper end of D(row || out) in bits."""
    m = precision_exponent(precision)
    support = [(p, q) for p, q in zip(row, out) if p]
    bits = m + 16 + len(support).bit_length()
    while True:
        total = sum_certified(log2_enclosure(p / q, bits).scale(p) for p, q in support)
        if total.width <= dyadic(m + 1):
            return total.outward(m + 2).upper
        bits *= 2


def single_letter_capacity(rows: list[tuple[Fraction, ...]], precision: Fraction) -> CertifiedReal:
    """Certified capacity of a binary-output DMC given its rows P(.|x).

    With binary outputs an optimal prior lives on the rows with the smallest
    and largest P(y=1|x). The lower end is I(q) for a rational prior q on
    those two rows; the upper end is the dual bound max_x D(P(.|x) || qW).
    """
    rows = [tuple(Fraction(v) for v in row) for row in rows]
    low = min(range(len(rows)), key=lambda i: (rows[i][1], i))
    high = max(range(len(rows)), key=lambda i: (rows[i][1], -i))
    if rows[low] == rows[high]:
        return CertifiedReal.exact(0)

    pair = np.array([[float(v) for v in rows[low]], [float(v) for v in rows[high]]])
    weight = rationalize(blahut_arimoto(pair)[1:], PRIOR_DENOMINATOR)[0]
    weight = min(max(weight, Fraction(1, PRIOR_DENOMINATOR)), 1 - Fraction(1, PRIOR_DENOMINATOR))
    prior = (1 - weight, weight)
    out = tuple(prior[0] * a + prior[1] * b for a, b in zip(rows[low], rows[high]))

    part = precision / 4
    mutual = (
        entropy(out, part)
        - entropy(rows[low], part).scale(prior[0])
        - entropy(rows[high], part).scale(prior[1])
    )
    upper = max(_divergence_upper(row, out, part) for row in rows)
    lower = min(mutual.lower, upper)
    return CertifiedReal(max(lower, Fraction(0)), upper)


def step_capacity_bounds(channel: UnifilarChannel, n: int, precision: Fraction) -> list[CertifiedReal]:
    """Capacity of (x, s) -> y over the states reachable at each step t."""
    bounds = []
    part = precision / n
    for t in range(1, n + 1):
        rows = [channel.row(s, x) for s in sorted(reachable_states(channel, t)) for x in range(channel.input_size)]
        bounds.append(single_letter_capacity(rows, part))
    return bounds


def bracket_value(
    channel: UnifilarChannel | bytes,
    n: int,
    k: int,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    iterations: int = DEFAULT_ITERATIONS,
) -> CertifiedValue:
    """Two-sided bracket of V_n without a net.

    Lower end: certified directed information of the uniform policy and, if
    the bracket is still wider than 2^-(k-1), of the heuristic witness.
    Upper end: sum over t of the single-letter capacity of (X_t, S_t) -> Y_t,
    since I(X^t; Y_t | Y^{t-1}) <= I(X_t, S_t; Y_t) for unifilar channels.
    """
    channel = as_channel(channel)
    precision = dyadic(k + 2)
    upper = sum_certified(step_capacity_bounds(channel, n, precision)).upper
    lower = directed_information(channel, uniform_policy(n), n, precision).lower
    evaluated = 1
    used_heuristic = False
    if upper - lower > 2 * dyadic(k):
        result: HeuristicResult = heuristic_value(channel, n, restarts, iterations, seed, precision_bits=k + 2)
        lower = max(lower, result.value)
        evaluated += 1
        used_heuristic = True
    lower = min(lower, upper)
    logger.info("bracket n=%d: [%s, %s]", n, lower, upper)
    return CertifiedValue(
        estimate=(lower + upper) / 2,
        radius=(upper - lower) / 2,
        horizon=n,
        normalized=False,
        provenance=Provenance(
            strategy="bracket",
            channel_hash=channel_hash(channel),
            k=k,
            eval_precision=precision,
            policies_evaluated=evaluated,
            lower_bound=lower,
            upper_bound=upper,
            seed=seed if used_heuristic else None,
            restarts=restarts if used_heuristic else None,
            iterations=iterations if used_heuristic else None,
        ),
    )


# ============ Public approximation entry points ============

def approx_value(
    channel: UnifilarChannel | bytes,
    n: int,
    k: int,
    budget: int | None = DEFAULT_BUDGET,
    strategy: Strategy = "auto",
    workers: int = 1,
    wall_time: float | None = None,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    iterations: int = DEFAULT_ITERATIONS,
) -> CertifiedValue:
    """Certified r with |r - V_n| <= 2^-k.

    `auto` returns the bracket when it closes to 2^-k and otherwise
    evaluates the moduli-driven net if it fits the budget.

    Raises:
        BudgetExceededError: no strategy certifies 2^-k within the budget;
            carries the net size and the largest feasible k
    """
    channel = as_channel(channel)
    if n < 1:
        raise DomainError(f"horizon must be >= 1, got {n}")
    if k < 0:
        raise DomainError(f"precision exponent must be >= 0, got {k}")

    if strategy in ("auto", "bracket"):
        value = bracket_value(channel, n, k, seed, restarts, iterations)
        if value.radius <= dyadic(k):
            return value
        logger.info("bracket radius %s misses 2^-%d", value.radius, k)
        if strategy == "bracket":
            raise BudgetExceededError(None, budget or 0, required_expr="unbounded (bracket did not close)")

    plan = plan_grid(channel, n, k)
    if not plan.fits(budget):
        raise _refuse(plan, budget, channel, n)
    return grid_value(channel, n, k, budget, workers, wall_time, plan)


def normalize(value: CertifiedValue, k: int) -> CertifiedValue:
    """Divide a value by its horizon, rounding outward onto the 2^-(k+3) grid."""
    n = value.horizon
    bits = k + 3
    scaled = value.estimate / n
    estimate = Fraction((scaled.numerator << bits) // scaled.denominator, 1 << bits)
    exact_radius = value.radius / n + (scaled - estimate)
    radius = Fraction(-(-(exact_radius.numerator << bits) // exact_radius.denominator), 1 << bits)
    rounding = radius - value.radius / n
    return replace(
        value,
        estimate=estimate,
        radius=radius,
        normalized=True,
        provenance=replace(value.provenance, rounding=rounding),
    )


def approx_normalized(
    channel: UnifilarChannel | bytes,
    n: int,
    k: int,
    budget: int | None = DEFAULT_BUDGET,
    **kwargs,
) -> CertifiedValue:
    """Certified r with |r - a_n| <= 2^-k, via approx_value at k + 1 and division by n."""
    value = approx_value(channel, n, k + 1, budget, **kwargs)
    return normalize(value, k)


# ============ Consistency gate ============

@dataclass(frozen=True)
class SandwichVerdict:
    consistent: bool
    checks: tuple[str, ...]


def sandwich_check(
    channel: UnifilarChannel,
    n: int,
    heuristic: HeuristicResult,
    certified: CertifiedValue,
    tolerance: Fraction = Fraction(0),
) -> SandwichVerdict:
    """Check heuristic <= certified upper end, and both against a closed form when known.

    Raises:
        ConsistencyError: naming every bound that failed
    """
    if certified.horizon != n or heuristic.policy.horizon != n:
        raise ConsistencyError([f"horizon mismatch: {n}, {certified.horizon}, {heuristic.policy.horizon}"])
    scale = n if certified.normalized else 1
    lo = (certified.estimate - certified.radius) * scale
    hi = (certified.estimate + certified.radius) * scale
    checks, failures = [], []

    if heuristic.value - tolerance <= hi:
        checks.append("heuristic <= certified upper")
    else:
        failures.append(f"heuristic {heuristic.value} exceeds certified upper end {hi}")

    spec = identify_family(channel)
    if spec is not None:
        exact = closed_form_value(spec, n)
        if lo <= exact <= hi:
            checks.append("certified interval contains closed form")
        else:
            failures.append(f"certified [{lo}, {hi}] misses closed form {exact}")
        if heuristic.value - tolerance <= exact:
            checks.append("heuristic <= closed form")
        else:
            failures.append(f"heuristic {heuristic.value} exceeds closed form {exact}")

    if failures:
        raise ConsistencyError(failures)
    return SandwichVerdict(consistent=True, checks=tuple(checks))
