"""Service for computing and storing finite-horizon values."""

from typing import Any

from fsccert.channel import format_rational
from fsccert.config import DATA_DIR, REPORT_PRECISION_BITS
from fsccert.encoding import channel_hash
from fsccert.heuristic import heuristic_value
from fsccert.measures import dyadic
from fsccert.policy import render_policy_text
from fsccert.records import value_to_record
from fsccert.solver import approx_normalized, approx_value, evaluate_net, normalize

from . import storage
from .channel_service import load_channel_text

RUNS_DIR = DATA_DIR / "runs"


def _heuristic_record(channel, request: dict[str, Any]) -> dict[str, Any]:
    result = heuristic_value(
        channel, request["n"], request["restarts"], request["iterations"], request["seed"]
    )
    return {
        "record": "heuristic",
        "channel_hash": channel_hash(channel),
        "horizon": request["n"],
        "value": format_rational(result.value),
        "float_value": result.float_value,
        "iterations": result.iterations,
        "restarts": result.restarts,
        "seed": result.seed,
        "policy": render_policy_text(result.policy),
    }


def _certified_record(channel, request: dict[str, Any]) -> dict[str, Any]:
    n, k = request["n"], request.get("k")
    if request["mode"] == "report":
        bits = k if k is not None else REPORT_PRECISION_BITS
        value = evaluate_net(channel, n, request["M"], dyadic(bits), request["budget"])
        if request["normalized"]:
            value = normalize(value, bits)
    else:
        solve = approx_normalized if request["normalized"] else approx_value
        value = solve(
            channel, n, k, request["budget"],
            strategy=request["strategy"], seed=request["seed"],
            restarts=request["restarts"], iterations=request["iterations"],
        )
    return {"record": "value", **value_to_record(value).model_dump()}


def compute_value(request: dict[str, Any]) -> dict[str, Any]:
    """Compute a value for a ValueCreate payload and store it.

    Raises:
        ValueError: the mode is missing its precision parameter
        ChannelValidationError, MalformedEncodingError: bad channel text
        BudgetExceededError: the run does not fit the budget
    """
    if request["mode"] == "target" and request.get("k") is None:
        raise ValueError("target mode needs k")
    if request["mode"] == "report" and request.get("M") is None:
        raise ValueError("report mode needs M")
    channel = load_channel_text(request["channel"])

    if request["mode"] == "heuristic":
        record = _heuristic_record(channel, request)
    else:
        record = _certified_record(channel, request)

    storage.ensure_dir(RUNS_DIR)
    entry = {
        "id": storage.generate_id(channel_hash(channel)),
        "created_at": storage.now(),
        "mode": request["mode"],
        "record": record,
    }
    storage.save(RUNS_DIR / f"{entry['id']}.json", entry)
    return entry


def list_values() -> list[dict[str, Any]]:
    return storage.list_entries(RUNS_DIR)


def get_value(value_id: str) -> dict[str, Any] | None:
    return storage.get_entry(RUNS_DIR, value_id)
