"""Router for channel validation and generation."""

from fastapi import APIRouter, File, UploadFile

from api.schemas import ChannelResponse, ChannelText, FamilyCreate, ValidationResponse
from api.services import channel_service

router = APIRouter()


@router.post("/validate", response_model=ValidationResponse)
async def validate_channel(data: ChannelText) -> ValidationResponse:
    """Validate a channel given as fscv1 text."""
    return ValidationResponse(**channel_service.validate_text(data.text))


@router.post("/validate/upload", response_model=ValidationResponse)
async def validate_channel_file(file: UploadFile = File(...)) -> ValidationResponse:
    """Validate an uploaded fscv1 channel file."""
    content = await file.read()
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        return ValidationResponse(valid=False, error="channel file is not UTF-8 text")
    return ValidationResponse(**channel_service.validate_text(text))


@router.post("/family", response_model=ChannelResponse, status_code=201)
async def create_family_channel(data: FamilyCreate) -> ChannelResponse:
    """Generate a delayed-activation channel."""
    return ChannelResponse(**channel_service.make_family(data.N, data.variant))
