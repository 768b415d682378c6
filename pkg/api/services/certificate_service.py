"""Service for certificate searches and verification."""

import json
from typing import Any

from fsccert.certificates import (
    ThresholdQuery,
    certificate_search,
    certificate_to_record,
    verify_certificate,
)
from fsccert.channel import to_rational
from fsccert.config import DATA_DIR
from fsccert.encoding import channel_hash

from . import storage
from .channel_service import load_channel_text

CERTIFICATES_DIR = DATA_DIR / "certificates"


def run_search(request: dict[str, Any]) -> dict[str, Any]:
    """Search for a holding certificate and store the outcome.

    Raises:
        BudgetExceededError: a cell exceeded the budget
    """
    channel = load_channel_text(request["channel"])
    query = ThresholdQuery.of(channel, to_rational(request["q"]))
    outcome = certificate_search(
        query, request["k"], request["n_max"], request["M_max"], request["budget"],
        mode=request["mode"], strategy=request["strategy"], seed=request["seed"],
    )
    certificate = None
    if outcome.certificate is not None:
        certificate = json.loads(
            json.dumps(certificate_to_record(outcome.certificate).model_dump())
        )

    storage.ensure_dir(CERTIFICATES_DIR)
    entry = {
        "id": storage.generate_id(channel_hash(channel)),
        "created_at": storage.now(),
        "found": outcome.found,
        "frontier": [list(cell) for cell in outcome.frontier],
        "certificate": certificate,
    }
    storage.save(CERTIFICATES_DIR / f"{entry['id']}.json", entry)
    return entry


def list_certificates() -> list[dict[str, Any]]:
    return storage.list_entries(CERTIFICATES_DIR)


def get_certificate(certificate_id: str) -> dict[str, Any] | None:
    return storage.get_entry(CERTIFICATES_DIR, certificate_id)


def verify(content: str | bytes, channel_text: str | None = None) -> dict[str, Any]:
    """Replay a certificate file.

    Raises:
        CertificateMismatchError: the replay does not reproduce the file
    """
    channel = load_channel_text(channel_text) if channel_text else None
    replayed = verify_certificate(content, channel)
    return {
        "verified": True,
        "n": replayed.n,
        "M": replayed.M,
        "verdict": replayed.verdict.value,
    }
