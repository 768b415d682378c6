"""FastAPI application entry point."""

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api.routers import certificates, channels, tables, values
from fsccert.config import CORS_ORIGINS

app = FastAPI(
    title="fsccert API",
    description="Certified finite-horizon directed-information values and threshold certificates",
    version="1.0.0",
)

# Cross-origin access only for origins listed in CORS_ORIGINS
if CORS_ORIGINS:
    app.add_middleware(
        CORSMiddleware,
        allow_origins=CORS_ORIGINS,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )


@app.get("/")
async def root() -> dict:
    """Service banner."""
    return {"status": "ok", "message": "fsccert API"}


@app.get("/health")
async def health() -> dict:
    """Health check for monitoring."""
    return {"status": "healthy"}


app.include_router(channels.router, prefix="/channels", tags=["channels"])
app.include_router(values.router, prefix="/values", tags=["values"])
app.include_router(tables.router, prefix="/tables", tags=["tables"])
app.include_router(certificates.router, prefix="/certificates", tags=["certificates"])
