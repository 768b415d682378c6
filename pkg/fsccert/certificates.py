"""Threshold certificates R(e, q, k, n, M) and their search and replay.

R holds iff ApproxA(e, n, M) > q - 2^-k + 2^-M, where ApproxA returns an
estimate of the normalized value a_n within 2^-M. A holding certificate
proves a_n > q - 2^-k; failing or indeterminate cells prove nothing.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator

from .channel import (
    DelayedActivationSpec,
    UnifilarChannel,
    closed_form_capacity,
    closed_form_normalized_value,
    format_rational,
    to_rational,
)
from .config import DEFAULT_BUDGET, DEFAULT_ITERATIONS, DEFAULT_RESTARTS
from .encoding import channel_hash, decode_channel, encode_channel
from .errors import BudgetExceededError, CertificateMismatchError, DomainError, MalformedEncodingError
from .measures import dyadic
from .records import (
    CertificateRecord,
    canonical_json,
    provenance_from_dict,
    provenance_to_dict,
    rational_or_none,
    record_digest,
)
from .solver import CertifiedValue, approx_normalized, evaluate_net, normalize, plan_grid

logger = logging.getLogger(__name__)

PAIR_MAGIC = b"FSCQ"

# External ApproxA: (n, M) -> estimate of a_n within 2^-M
ApproxA = Callable[[int, int], Fraction]


# ============ Pairing ============

def _u32(value: int) -> bytes:
    return value.to_bytes(4, "big")


def _signed_bytes(value: int) -> bytes:
    return value.to_bytes(value.bit_length() // 8 + 1, "big", signed=True)


def encode_rational(q: Fraction) -> bytes:
    """Numerator (signed) and denominator as length-prefixed big-endian bytes."""
    q = Fraction(q)
    num, den = _signed_bytes(q.numerator), _signed_bytes(q.denominator)
    return _u32(len(num)) + num + _u32(len(den)) + den


def pair(e: bytes, q: Fraction | int | str) -> bytes:
    """Canonical pairing <e, q>: 'FSCQ', u32 len(e), e, u32 len(q_enc), q_enc."""
    q_enc = encode_rational(to_rational(q) if isinstance(q, str) else Fraction(q))
    return PAIR_MAGIC + _u32(len(e)) + bytes(e) + _u32(len(q_enc)) + q_enc


def _take(data: bytes, pos: int) -> tuple[bytes, int]:
    if pos + 4 > len(data):
        raise MalformedEncodingError("truncated length prefix", pos)
    length = int.from_bytes(data[pos:pos + 4], "big")
    start = pos + 4
    if start + length > len(data):
        raise MalformedEncodingError("truncated field", pos)
    return data[start:start + length], start + length


def unpair(data: bytes) -> tuple[bytes, Fraction]:
    """Inverse of pair; rejects anything pair would not produce."""
    data = bytes(data)
    if data[:4] != PAIR_MAGIC:
        raise MalformedEncodingError("bad pairing magic", 0)
    e, pos = _take(data, 4)
    q_enc, end = _take(data, pos)
    num_bytes, inner = _take(q_enc, 0)
    den_bytes, inner = _take(q_enc, inner)
    if inner != len(q_enc) or end != len(data):
        raise MalformedEncodingError("trailing bytes", end)
    num = int.from_bytes(num_bytes, "big", signed=True)
    den = int.from_bytes(den_bytes, "big", signed=True)
    if den <= 0:
        raise MalformedEncodingError("non-positive denominator", pos)
    q = Fraction(num, den)
    if pair(e, q) != data:
        raise MalformedEncodingError("non-canonical pairing", pos)
    return e, q


@dataclass(frozen=True)
class ThresholdQuery:
    """Is the feedback capacity of channel e at least q?"""

    e: bytes
    q: Fraction

    @classmethod
    def of(cls, channel: UnifilarChannel, q: Fraction | int | str) -> "ThresholdQuery":
        return cls(encode_channel(channel), to_rational(q) if isinstance(q, str) else Fraction(q))

    @property
    def paired(self) -> bytes:
        return pair(self.e, self.q)

    @property
    def channel(self) -> UnifilarChannel:
        return decode_channel(self.e)


# ============ The predicate R ============

class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ThresholdCertificate:
    """One evaluated cell (k, n, M) of the predicate R for a query."""

    query: ThresholdQuery
    k: int
    n: int
    M: int
    r: Fraction | None
    verdict: Verdict
    mode: str = "target"
    strategy: str = "auto"
    budget: int | None = DEFAULT_BUDGET
    seed: int = 0
    restarts: int = DEFAULT_RESTARTS
    iterations: int = DEFAULT_ITERATIONS
    value: CertifiedValue | None = None

    @property
    def threshold(self) -> Fraction:
        """q - 2^-k + 2^-M, which r must strictly exceed."""
        return self.query.q - dyadic(self.k) + dyadic(self.M)


def r_threshold(q: Fraction, k: int, M: int) -> Fraction:
    return q - dyadic(k) + dyadic(M)


def _approx_report(channel: UnifilarChannel, n: int, M: int, budget: int | None, workers: int) -> CertifiedValue:
    """Report-bound ApproxA on the net the moduli plan picks for 2^-(M+1).

    The value is rejected if its honest radius still exceeds 2^-M.
    """
    resolution = plan_grid(channel, n, M + 1).M
    value = normalize(evaluate_net(channel, n, resolution, dyadic(M + 3), budget, workers), M)
    if value.radius > dyadic(M):
        raise BudgetExceededError(
            None, budget or 0, required_expr=f"finer net (report radius {value.radius} > 2^-{M})"
        )
    return value


def check_R(
    query: ThresholdQuery,
    k: int,
    n: int,
    M: int,
    budget: int | None = DEFAULT_BUDGET,
    mode: str = "target",
    strategy: str = "auto",
    approx: ApproxA | None = None,
    workers: int = 1,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    iterations: int = DEFAULT_ITERATIONS,
) -> ThresholdCertificate:
    """Evaluate R(e, q, k, n, M) with exact rational comparison.

    A budget refusal yields an indeterminate certificate, never a failing one.
    """
    if n < 1 or M < 0:
        raise DomainError(f"need n >= 1 and M >= 0, got n={n}, M={M}")
    value = None
    try:
        if approx is not None:
            r = Fraction(approx(n, M))
            strategy = "external"
        elif mode == "report":
            value = _approx_report(query.channel, n, M, budget, workers)
            r = value.estimate
        else:
            value = approx_normalized(
                query.channel, n, M, budget,
                strategy=strategy, workers=workers, seed=seed, restarts=restarts, iterations=iterations,
            )
            r = value.estimate
    except BudgetExceededError as e:
        logger.info("R(k=%d, n=%d, M=%d) indeterminate: %s", k, n, M, e)
        r, verdict = None, Verdict.INDETERMINATE
    else:
        verdict = Verdict.HOLDS if r > r_threshold(query.q, k, M) else Verdict.FAILS
    return ThresholdCertificate(
        query=query, k=k, n=n, M=M, r=r, verdict=verdict, mode=mode, strategy=strategy,
        budget=budget, seed=seed, restarts=restarts, iterations=iterations, value=value,
    )


def diagonal_pairs(horizon_cap: int, M_cap: int) -> Iterator[tuple[int, int]]:
    """(n, M) with n, M >= 1 by increasing n + M, then increasing n."""
    for total in range(2, horizon_cap + M_cap + 1):
        for n in range(1, total):
            M = total - n
            if n <= horizon_cap and M <= M_cap:
                yield n, M


@dataclass(frozen=True)
class SearchOutcome:
    """Result of a certificate search: a holding certificate or the exhausted frontier."""

    certificate: ThresholdCertificate | None
    frontier: tuple[tuple[int, int, str], ...] = field(default=())

    @property
    def found(self) -> bool:
        return self.certificate is not None


def certificate_search(
    query: ThresholdQuery,
    k: int,
    horizon_cap: int,
    M_cap: int,
    budget: int | None = DEFAULT_BUDGET,
    **check_kwargs,
) -> SearchOutcome:
    """Dovetail R over (n, M) and return the first holding cell.

    Exhaustion proves nothing about the capacity.

    Raises:
        BudgetExceededError: a cell exceeded the budget; `frontier` lists
            every (n, M, verdict) examined so far
    """
    frontier: list[tuple[int, int, str]] = []
    for n, M in diagonal_pairs(horizon_cap, M_cap):
        certificate = check_R(query, k, n, M, budget, **check_kwargs)
        frontier.append((n, M, certificate.verdict.value))
        if certificate.verdict is Verdict.HOLDS:
            logger.info("certificate found at n=%d, M=%d", n, M)
            return SearchOutcome(certificate=certificate, frontier=tuple(frontier))
        if certificate.verdict is Verdict.INDETERMINATE:
            raise BudgetExceededError(None, budget or 0, frontier=frontier,
                                      required_expr=f"more than the budget at n={n}, M={M}")
    logger.info("search exhausted after %d cells", len(frontier))
    return SearchOutcome(certificate=None, frontier=tuple(frontier))


# ============ Closed-form audits ============

def closed_form_band_approx(spec: DelayedActivationSpec, offset: Fraction = Fraction(0)) -> ApproxA:
    """ApproxA returning a_n + offset 2^-M, offset in [-1, 1] (a compliant band estimate)."""
    offset = Fraction(offset)
    if not -1 <= offset <= 1:
        raise DomainError(f"band offset {offset} outside [-1, 1]")

    def approx(n: int, M: int) -> Fraction:
        return closed_form_normalized_value(spec, n) + offset * dyadic(M)

    return approx


def least_certifying_M(a_n: Fraction, q: Fraction, k: int) -> int | None:
    """Smallest M >= 1 with 2^-M < (a_n - (q - 2^-k)) / 2, or None if the gap is not positive."""
    gap = a_n - (q - dyadic(k))
    if gap <= 0:
        return None
    M = 1
    while dyadic(M) >= gap / 2:
        M += 1
    return M


def least_n_closed_form(spec: DelayedActivationSpec, threshold: Fraction) -> int | None:
    """Least n with a_n > threshold for a family channel, or None if no n exists."""
    if threshold < 0:
        return 1
    if closed_form_capacity(spec) == 0 or threshold >= 1:
        return None
    # (n - N - 1) / n > threshold  <=>  n > (N + 1) / (1 - threshold)
    bound = Fraction(spec.N + 1) / (1 - threshold)
    return math.floor(bound) + 1


@dataclass(frozen=True)
class AuditRow:
    k: int
    threshold: Fraction
    least_n: int | None
    least_n_exact: int | None


@dataclass(frozen=True)
class SlackAudit:
    """Limsup-with-slack cross-check of one (family channel, q)."""

    spec: DelayedActivationSpec
    q: Fraction
    capacity: Fraction
    rows: tuple[AuditRow, ...]
    status: str

    @property
    def consistent(self) -> bool:
        return self.status in ("agree", "capacity-below-q")


def limsup_slack_audit(spec: DelayedActivationSpec, q: Fraction, k_max: int, n_max: int) -> SlackAudit:
    """For each k <= k_max find the least n <= n_max with a_n > q - 2^-k.

    Status is 'agree' when every k has a witness and capacity >= q,
    'capacity-below-q' when capacity < q and some k has none, and
    'horizon-cap' or 'k-cap' when the caps are too small to show either,
    and 'closed-form-mismatch' when the scan disagrees with the solved
    least n.
    """
    q = Fraction(q)
    capacity = closed_form_capacity(spec)
    rows = []
    for k in range(k_max + 1):
        threshold = q - dyadic(k)
        least = next(
            (n for n in range(1, n_max + 1) if closed_form_normalized_value(spec, n) > threshold), None
        )
        rows.append(AuditRow(k, threshold, least, least_n_closed_form(spec, threshold)))

    every_k_has_n = all(row.least_n_exact is not None for row in rows)
    scan_matches = all(
        row.least_n == (row.least_n_exact if row.least_n_exact is not None and row.least_n_exact <= n_max else None)
        for row in rows
    )
    if not scan_matches:
        status = "closed-form-mismatch"
    elif capacity >= q:
        status = "agree" if all(row.least_n is not None for row in rows) else "horizon-cap"
    else:
        status = "capacity-below-q" if not every_k_has_n else "k-cap"
    logger.info("audit %s q=%s: %s", spec, q, status)
    return SlackAudit(spec=spec, q=q, capacity=capacity, rows=tuple(rows), status=status)


# ============ Files and replay ============

def certificate_to_record(certificate: ThresholdCertificate) -> CertificateRecord:
    value = certificate.value
    record = CertificateRecord(
        paired=certificate.query.paired.hex(),
        channel_hash=channel_hash(certificate.query.channel),
        q=format_rational(certificate.query.q),
        k=certificate.k,
        n=certificate.n,
        M=certificate.M,
        mode=certificate.mode,
        strategy=certificate.strategy,
        budget=certificate.budget,
        seed=certificate.seed,
        restarts=certificate.restarts,
        iterations=certificate.iterations,
        r=rational_or_none(certificate.r),
        radius=rational_or_none(value.radius if value else None),
        verdict=certificate.verdict.value,
        provenance=provenance_to_dict(value.provenance) if value else None,
    )
    record.digest = record_digest(record)
    return record


def render_certificate(certificate: ThresholdCertificate) -> str:
    return canonical_json(certificate_to_record(certificate).model_dump())


def parse_certificate(text: str | bytes) -> CertificateRecord:
    """Parse a certificate file; raises MalformedEncodingError on bad content."""
    try:
        record = CertificateRecord.model_validate_json(text)
        bytes.fromhex(record.paired)
        if record.provenance is not None:
            provenance_from_dict(record.provenance)
    except ValueError as e:
        raise MalformedEncodingError(f"unreadable certificate: {e}", 0) from e
    return record


def write_certificate(certificate: ThresholdCertificate, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_certificate(certificate))
    return path


def read_certificate(path: str | Path) -> CertificateRecord:
    with open(path, "rb") as f:
        return parse_certificate(f.read())


def replay(record: CertificateRecord, workers: int = 1) -> ThresholdCertificate:
    """Re-run R with the parameters recorded in a certificate."""
    e, q = unpair(bytes.fromhex(record.paired))
    return check_R(
        ThresholdQuery(e, q), record.k, record.n, record.M, record.budget,
        mode=record.mode, strategy=record.strategy, workers=workers,
        seed=record.seed, restarts=record.restarts, iterations=record.iterations,
    )


def verify_certificate(
    source: str | bytes | CertificateRecord,
    channel: UnifilarChannel | None = None,
    workers: int = 1,
) -> ThresholdCertificate:
    """Replay a certificate and reject any mismatch.

    `source` is the certificate file content (or a parsed record). The
    replay is re-serialized and must reproduce the file byte for byte.

    Raises:
        CertificateMismatchError: with reason 'hash', 'provenance', 'r',
            'verdict' or 'encoding'
    """
    if isinstance(source, CertificateRecord):
        record, raw = source, None
    else:
        raw = source.encode("utf-8") if isinstance(source, str) else bytes(source)
        try:
            record = parse_certificate(raw)
        except MalformedEncodingError as e:
            raise CertificateMismatchError("encoding", str(e)) from e

    if record.digest != record_digest(record):
        raise CertificateMismatchError("hash", "content digest does not match")

    try:
        e, q = unpair(bytes.fromhex(record.paired))
        recorded_channel = decode_channel(e)
    except ValueError as err:
        raise CertificateMismatchError("provenance", f"bad paired query: {err}") from err
    if channel_hash(recorded_channel) != record.channel_hash:
        raise CertificateMismatchError("hash", "paired channel does not match the recorded hash")
    if channel is not None and channel_hash(channel) != record.channel_hash:
        raise CertificateMismatchError("hash", "certificate was issued for a different channel")
    if to_rational(record.q) != q:
        raise CertificateMismatchError("provenance", "q does not match the paired query")
    if record.strategy == "external":
        raise CertificateMismatchError("provenance", "certificates from external estimators cannot be replayed")

    replayed = replay(record, workers)
    if rational_or_none(replayed.r) != record.r:
        raise CertificateMismatchError("r", f"replay gives {rational_or_none(replayed.r)}, file says {record.r}")
    if replayed.verdict.value != record.verdict:
        raise CertificateMismatchError("verdict", f"replay gives {replayed.verdict.value}")
    if replayed.r is not None:
        expected = Verdict.HOLDS if replayed.r > r_threshold(q, record.k, record.M) else Verdict.FAILS
        if expected is not replayed.verdict:
            raise CertificateMismatchError("verdict", "inequality does not match the verdict")
    if raw is not None and render_certificate(replayed).encode("utf-8") != raw:
        raise CertificateMismatchError("encoding", "file differs from the canonical replay")
    if record.provenance is not None and replayed.value is not None:
        if provenance_to_dict(replayed.value.provenance) != record.provenance:
            raise CertificateMismatchError("provenance", "solver provenance differs")
    logger.info("certificate verified: n=%d M=%d %s", record.n, record.M, record.verdict)
    return replayed
