"""Router for threshold certificates."""

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from api.schemas import (
    CertificateCreate,
    CertificateListResponse,
    CertificateResponse,
    VerifyRequest,
    VerifyResponse,
)
from api.services import certificate_service
from fsccert.errors import (
    BudgetExceededError,
    CertificateMismatchError,
    ChannelValidationError,
    DomainError,
    MalformedEncodingError,
)

router = APIRouter()


def _certificate_to_response(entry: dict) -> CertificateResponse:
    """Convert stored search dict to response model."""
    return CertificateResponse(
        id=entry["id"],
        created_at=entry["created_at"],
        found=entry["found"],
        frontier=entry["frontier"],
        certificate=entry.get("certificate"),
    )


def _verify(content: str | bytes, channel: str | None) -> VerifyResponse:
    try:
        result = certificate_service.verify(content, channel)
    except ChannelValidationError as e:
        raise HTTPException(status_code=422, detail={"violations": e.violations})
    except MalformedEncodingError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except CertificateMismatchError as e:
        raise HTTPException(status_code=409, detail={"reason": e.reason, "message": str(e)})
    return VerifyResponse(**result)


@router.get("", response_model=CertificateListResponse)
async def list_certificates() -> CertificateListResponse:
    """List all stored certificate searches."""
    entries = certificate_service.list_certificates()
    return CertificateListResponse(
        certificates=[_certificate_to_response(e) for e in entries],
        total=len(entries),
    )


@router.post("", response_model=CertificateResponse, status_code=201)
def create_certificate(data: CertificateCreate) -> CertificateResponse:
    """Search the (n, M) diagonal for a holding certificate."""
    try:
        entry = certificate_service.run_search(data.model_dump())
    except ChannelValidationError as e:
        raise HTTPException(status_code=422, detail={"violations": e.violations})
    except (MalformedEncodingError, DomainError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except BudgetExceededError as e:
        raise HTTPException(
            status_code=413,
            detail={"message": str(e), "frontier": [list(c) for c in e.frontier or []]},
        )
    return _certificate_to_response(entry)


@router.post("/verify", response_model=VerifyResponse)
def verify_certificate(data: VerifyRequest) -> VerifyResponse:
    """Replay a certificate given as JSON text."""
    return _verify(data.certificate, data.channel)


@router.post("/verify/upload", response_model=VerifyResponse)
def verify_certificate_file(
    file: UploadFile = File(...),
    channel: str | None = Form(None),
) -> VerifyResponse:
    """Replay an uploaded certificate file."""
    return _verify(file.file.read(), channel)


@router.get("/{certificate_id}", response_model=CertificateResponse)
async def get_certificate(certificate_id: str) -> CertificateResponse:
    """Get a single certificate search by ID."""
    entry = certificate_service.get_certificate(certificate_id)
    if entry is None:
        raise HTTPException(status_code=404, detail=f"Certificate '{certificate_id}' not found")
    return _certificate_to_response(entry)
