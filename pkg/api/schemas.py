"""Pydantic schemas for API request/response models."""

from datetime import datetime
from typing import Any, Literal

from pydantic import BaseModel, Field

from fsccert.config import DEFAULT_BUDGET, DEFAULT_ITERATIONS, DEFAULT_RESTARTS


# ============ Channel Schemas ============

class ChannelText(BaseModel):
    """Request schema carrying a channel in the fscv1 text format."""
    text: str = Field(..., description="Channel description (fscv1)")


class ValidationResponse(BaseModel):
    """Validation report for a channel description."""
    valid: bool
    num_states: int | None = None
    hash: str | None = None
    violations: list[str] = []
    error: str | None = None


class FamilyCreate(BaseModel):
    """Request schema for a delayed-activation channel."""
    N: int = Field(..., ge=1, description="Delay length")
    variant: Literal["good", "bad"]


class ChannelResponse(BaseModel):
    """Response schema for a generated channel."""
    text: str
    hash: str
    num_states: int


# ============ Value Schemas ============

class ValueCreate(BaseModel):
    """Request schema for computing a finite-horizon value."""
    channel: str = Field(..., description="Channel description (fscv1)")
    n: int = Field(..., ge=1, description="Horizon")
    mode: Literal["target", "report", "heuristic"] = "target"
    k: int | None = Field(None, ge=0, description="Target precision exponent")
    M: int | None = Field(None, ge=1, description="Grid resolution for report mode")
    normalized: bool = False
    strategy: Literal["auto", "grid", "bracket"] = "auto"
    budget: int = Field(DEFAULT_BUDGET, gt=0)
    seed: int = 0
    restarts: int = Field(DEFAULT_RESTARTS, gt=0)
    iterations: int = Field(DEFAULT_ITERATIONS, gt=0)


class ValueResponse(BaseModel):
    """Response schema for a stored value run."""
    id: str
    created_at: datetime
    mode: str
    record: dict[str, Any]


class ValueListResponse(BaseModel):
    """Response schema for listing value runs."""
    values: list[ValueResponse]
    total: int


# ============ Table Schemas ============

class TableRow(BaseModel):
    """One closed-form row of the family table."""
    N: int
    n: int
    good: str
    bad: str
    indistinguishable: bool


class TableResponse(BaseModel):
    """Closed-form normalized values for good and bad channels."""
    rows: list[TableRow]


# ============ Certificate Schemas ============

class CertificateCreate(BaseModel):
    """Request schema for a certificate search."""
    channel: str = Field(..., description="Channel description (fscv1)")
    q: str = Field(..., description="Threshold rational, e.g. '1/4'")
    k: int = Field(..., ge=0, description="Slack exponent")
    n_max: int = Field(8, ge=1)
    M_max: int = Field(12, ge=1)
    mode: Literal["target", "report"] = "target"
    strategy: Literal["auto", "grid", "bracket"] = "auto"
    budget: int = Field(DEFAULT_BUDGET, gt=0)
    seed: int = 0


class CertificateResponse(BaseModel):
    """Response schema for a stored certificate search."""
    id: str
    created_at: datetime
    found: bool
    frontier: list[list[Any]]
    certificate: dict[str, Any] | None = None


class CertificateListResponse(BaseModel):
    """Response schema for listing certificate searches."""
    certificates: list[CertificateResponse]
    total: int


class VerifyRequest(BaseModel):
    """Request schema for replaying a certificate."""
    certificate: str = Field(..., description="Certificate file content")
    channel: str | None = Field(None, description="Channel (fscv1) the certificate must match")


class VerifyResponse(BaseModel):
    """Replay verdict for a certificate."""
    verified: bool
    n: int
    M: int
    verdict: str
