"""Router for finite-horizon value computations."""

from fastapi import APIRouter, HTTPException

from api.schemas import ValueCreate, ValueListResponse, ValueResponse
from api.services import value_service
from fsccert.errors import BudgetExceededError, ChannelValidationError, DomainError, MalformedEncodingError

router = APIRouter()


def _value_to_response(entry: dict) -> ValueResponse:
    """Convert stored value dict to response model."""
    return ValueResponse(
        id=entry["id"],
        created_at=entry["created_at"],
        mode=entry["mode"],
        record=entry["record"],
    )


@router.get("", response_model=ValueListResponse)
async def list_values() -> ValueListResponse:
    """List all stored value runs."""
    entries = value_service.list_values()
    return ValueListResponse(
        values=[_value_to_response(e) for e in entries],
        total=len(entries),
    )


@router.post("", response_model=ValueResponse, status_code=201)
def create_value(data: ValueCreate) -> ValueResponse:
    """Compute a certified or heuristic value and store it."""
    try:
        entry = value_service.compute_value(data.model_dump())
    except ChannelValidationError as e:
        raise HTTPException(status_code=422, detail={"violations": e.violations})
    except (MalformedEncodingError, DomainError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except BudgetExceededError as e:
        raise HTTPException(status_code=413, detail=str(e))
    return _value_to_response(entry)


@router.get("/{value_id}", response_model=ValueResponse)
async def get_value(value_id: str) -> ValueResponse:
    """Get a single value run by ID."""
    entry = value_service.get_value(value_id)
    if entry is None:
        raise HTTPException(status_code=404, detail=f"Value '{value_id}' not found")
    return _value_to_response(entry)
