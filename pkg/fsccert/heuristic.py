"""Multi-start coordinate ascent for lower bounds on the finite-horizon value.

The search runs in floating point; the returned value is the certified
lower end of the rationalized witness policy's directed information.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import entr

from .channel import UnifilarChannel
from .config import DEFAULT_ITERATIONS, DEFAULT_RESTARTS, LINE_SEARCH_TOL
from .law import float_law_arrays
from .measures import directed_information, dyadic
from .policy import CausalPolicy, histories_at, policy_dimension, policy_from_theta, step_offset

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)
WITNESS_DENOMINATOR = 2 ** 20
WITNESS_PRECISION_BITS = 20
SWEEP_TOL = 1e-12
REACH_TOL = 1e-15


@dataclass(frozen=True)
class HeuristicResult:
    """Best policy found by the search and its certified lower value."""

    value: Fraction
    policy: CausalPolicy
    float_value: float
    iterations: int
    restarts: int
    seed: int
    eval_precision: Fraction


def _bits(p: np.ndarray) -> float:
    return float(entr(p).sum() / LN2)


def float_directed_information(channel: UnifilarChannel, theta: np.ndarray, n: int) -> float:
    """Directed information of a float policy, in bits."""
    total = 0.0
    for t, D in enumerate(float_law_arrays(channel, theta, n), start=1):
        # D[x^t, y^t]; y_t is the least significant bit of the column index
        by_prev = D.reshape(D.shape[0], D.shape[1] // 2, 2)
        h_x_prev = _bits(by_prev.sum(axis=2))
        h_y = _bits(D.sum(axis=0))
        h_prev = _bits(by_prev.sum(axis=(0, 2)))
        total += h_x_prev + h_y - h_prev - _bits(D)
    return total


def _reach(channel: UnifilarChannel, theta: np.ndarray, n: int) -> np.ndarray:
    """Probability of reaching the history behind each coordinate."""
    reach = np.ones_like(theta)
    arrays = float_law_arrays(channel, theta, n)
    for t in range(2, n + 1):
        reach[step_offset(t):step_offset(t) + histories_at(t)] = arrays[t - 2].reshape(-1)
    return reach


def _coordinate_ascent(
    channel: UnifilarChannel, theta: np.ndarray, n: int, iterations: int
) -> tuple[np.ndarray, float, int]:
    theta = theta.copy()
    best = float_directed_information(channel, theta, n)
    sweeps = 0
    for sweeps in range(1, iterations + 1):
        start = best
        reach = _reach(channel, theta, n)
        for i in range(theta.size):
            if reach[i] <= REACH_TOL:
                continue

            def objective(v: float, i: int = i) -> float:
                trial = theta.copy()
                trial[i] = v
                return -float_directed_information(channel, trial, n)

            result = minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded",
                                     options={"xatol": LINE_SEARCH_TOL})
            candidates = [(float(result.x), -float(result.fun)), (0.0, -objective(0.0)), (1.0, -objective(1.0))]
            v, value = max(candidates, key=lambda c: c[1])
            if value > best:
                theta[i] = v
                best = value
        if best - start < SWEEP_TOL:
            break
    return theta, best, sweeps


def rationalize(theta: np.ndarray, max_den: int = WITNESS_DENOMINATOR) -> list[Fraction]:
    """Nearest rationals with bounded denominators, clamped to [0, 1]."""
    values = []
    for v in theta:
        q = Fraction(float(v)).limit_denominator(max_den)
        values.append(min(max(q, Fraction(0)), Fraction(1)))
    return values


def heuristic_value(
    channel: UnifilarChannel,
    n: int,
    restarts: int = DEFAULT_RESTARTS,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    precision_bits: int = WITNESS_PRECISION_BITS,
) -> HeuristicResult:
    """Search for a high directed-information policy.

    Restart 0 starts from the uniform policy, the others from seeded random
    points. The best float witness is rationalized and evaluated with
    certified arithmetic; that lower end is the reported value.
    """
    d = policy_dimension(channel, n)
    rng = np.random.default_rng(seed)
    best_theta, best_value, total_sweeps = None, -np.inf, 0
    for restart in range(restarts):
        start = np.full(d, 0.5) if restart == 0 else rng.uniform(0.0, 1.0, size=d)
        theta, value, sweeps = _coordinate_ascent(channel, start, n, iterations)
        total_sweeps += sweeps
        logger.debug("restart %d: %.9f after %d sweeps", restart, value, sweeps)
        if value > best_value:
            best_theta, best_value = theta, value

    witness = policy_from_theta(n, rationalize(best_theta))
    precision = dyadic(precision_bits)
    certified = directed_information(channel, witness, n, precision)
    logger.info("heuristic n=%d: float %.9f, certified lower %s", n, best_value, certified.lower)
    return HeuristicResult(
        value=certified.lower,
        policy=witness,
        float_value=float(best_value),
        iterations=total_sweeps,
        restarts=restarts,
        seed=seed,
        eval_precision=precision,
    )
