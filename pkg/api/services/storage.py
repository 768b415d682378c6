"""JSON file storage shared by the value and certificate services."""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any


def ensure_dir(directory: Path) -> None:
    """Ensure a storage directory exists."""
    directory.mkdir(parents=True, exist_ok=True)


def load(path: Path) -> dict[str, Any]:
    """Load a stored entry from a JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save(path: Path, data: dict[str, Any]) -> None:
    """Save an entry to a JSON file."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def generate_id(channel_hash: str) -> str:
    """Entry id from the channel hash prefix and a UTC timestamp."""
    timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%d_%H%M%S_%f")
    return f"{channel_hash[:12]}_{timestamp}"


def now() -> str:
    return datetime.now(timezone.utc).isoformat()


def list_entries(directory: Path) -> list[dict[str, Any]]:
    """All entries in a directory, newest first."""
    ensure_dir(directory)
    entries = []
    for path in directory.glob("*.json"):
        try:
            entries.append(load(path))
        except (json.JSONDecodeError, IOError):
            continue
    entries.sort(key=lambda e: e.get("created_at", ""), reverse=True)
    return entries


def get_entry(directory: Path, entry_id: str) -> dict[str, Any] | None:
    """A single entry by id, or None."""
    path = directory / f"{entry_id}.json"
    if not path.exists():
        return None
    return load(path)
