"""Serialized records for certified values and threshold certificates."""

import hashlib
import json
from dataclasses import asdict, fields
from fractions import Fraction
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from .channel import format_rational, to_rational
from .solver import CertifiedValue, Provenance

VALUE_FORMAT = "fsccert-value/1"
CERTIFICATE_FORMAT = "fsccert-certificate/1"

# Provenance fields stored as rational strings
_RATIONAL_FIELDS = frozenset(
    {"eta", "delta", "modulus_sum", "eval_precision", "lower_bound", "upper_bound", "rounding"}
)


# ============ Value Records ============

class ValueRecord(BaseModel):
    """A CertifiedValue as written to disk or returned by the API."""

    format: Literal["fsccert-value/1"] = VALUE_FORMAT
    channel_hash: str
    horizon: int = Field(..., ge=1)
    normalized: bool
    estimate: str
    radius: str
    lower: str
    upper: str
    provenance: dict[str, Any]


def provenance_to_dict(provenance: Provenance) -> dict[str, Any]:
    data = asdict(provenance)
    for key in _RATIONAL_FIELDS:
        if data[key] is not None:
            data[key] = format_rational(data[key])
    return data


def provenance_from_dict(data: dict[str, Any]) -> Provenance:
    known = {f.name for f in fields(Provenance)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown provenance fields: {sorted(unknown)}")
    values = dict(data)
    for key in _RATIONAL_FIELDS & set(values):
        if values[key] is not None:
            values[key] = to_rational(values[key])
    return Provenance(**values)


def value_to_record(value: CertifiedValue) -> ValueRecord:
    interval = value.interval
    return ValueRecord(
        channel_hash=value.provenance.channel_hash,
        horizon=value.horizon,
        normalized=value.normalized,
        estimate=format_rational(value.estimate),
        radius=format_rational(value.radius),
        lower=format_rational(interval.lower),
        upper=format_rational(interval.upper),
        provenance=provenance_to_dict(value.provenance),
    )


def record_to_value(record: ValueRecord) -> CertifiedValue:
    return CertifiedValue(
        estimate=to_rational(record.estimate),
        radius=to_rational(record.radius),
        horizon=record.horizon,
        normalized=record.normalized,
        provenance=provenance_from_dict(record.provenance),
    )


def canonical_json(data: dict[str, Any]) -> str:
    """Sorted-key JSON with two-space indent and a trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def serialize_value(value: CertifiedValue) -> str:
    return canonical_json(value_to_record(value).model_dump())


def parse_value(text: str) -> CertifiedValue:
    return record_to_value(ValueRecord.model_validate_json(text))


# ============ Certificate Records ============

class CertificateRecord(BaseModel):
    """A threshold certificate file."""

    format: Literal["fsccert-certificate/1"] = CERTIFICATE_FORMAT
    paired: str = Field(..., description="hex of the pairing of the channel encoding and q")
    channel_hash: str
    q: str
    k: int
    n: int = Field(..., ge=1)
    M: int = Field(..., ge=0)
    mode: Literal["target", "report"]
    strategy: str
    budget: Optional[int] = None
    seed: int = 0
    restarts: int
    iterations: int
    r: Optional[str] = None
    radius: Optional[str] = None
    verdict: Literal["holds", "fails", "indeterminate"]
    provenance: Optional[dict[str, Any]] = None
    digest: Optional[str] = Field(None, description="sha256 of the canonical record without this field")


def record_digest(record: CertificateRecord) -> str:
    """SHA-256 hex digest of the canonical JSON of a certificate record, digest excluded."""
    body = canonical_json(record.model_dump(exclude={"digest"}))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def rational_or_none(value: Fraction | None) -> str | None:
    return None if value is None else format_rational(value)
