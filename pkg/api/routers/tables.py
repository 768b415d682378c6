"""Router for closed-form family tables."""

from fastapi import APIRouter, Query

from api.schemas import TableResponse, TableRow
from api.services import channel_service

router = APIRouter()


@router.get("/family", response_model=TableResponse)
async def family_table(
    N: int = Query(..., ge=1),
    n_max: int = Query(6, ge=1, le=512),
) -> TableResponse:
    """Closed-form normalized values for the good and bad channels."""
    rows = channel_service.family_table(N, n_max)
    return TableResponse(rows=[TableRow(**row) for row in rows])
