"""Service for validating and generating channels."""

from typing import Any

from fsccert.channel import (
    DelayedActivationSpec,
    UnifilarChannel,
    Variant,
    closed_form_normalized_value,
    format_rational,
    make_delayed_activation,
)
from fsccert.encoding import channel_hash, parse_channel_text, render_channel_text
from fsccert.errors import ChannelValidationError, MalformedEncodingError


def load_channel_text(text: str) -> UnifilarChannel:
    """Parse and validate a channel; raises on invalid input."""
    return parse_channel_text(text)


def validate_text(text: str) -> dict[str, Any]:
    """Validation report for a channel description."""
    try:
        channel = parse_channel_text(text)
    except ChannelValidationError as e:
        return {"valid": False, "violations": e.violations}
    except MalformedEncodingError as e:
        return {"valid": False, "error": str(e)}
    return {"valid": True, "num_states": channel.num_states, "hash": channel_hash(channel)}


def make_family(N: int, variant: str) -> dict[str, Any]:
    """Generate a delayed-activation channel."""
    channel = make_delayed_activation(DelayedActivationSpec(N, Variant(variant)))
    return {
        "text": render_channel_text(channel),
        "hash": channel_hash(channel),
        "num_states": channel.num_states,
    }


def family_table(N: int, n_max: int) -> list[dict[str, Any]]:
    """Closed-form normalized values of the good and bad channels for n = 1..n_max."""
    good = DelayedActivationSpec(N, Variant.GOOD)
    bad = DelayedActivationSpec(N, Variant.BAD)
    return [
        {
            "N": N,
            "n": n,
            "good": format_rational(closed_form_normalized_value(good, n)),
            "bad": format_rational(closed_form_normalized_value(bad, n)),
            "indistinguishable": n <= N + 1,
        }
        for n in range(1, n_max + 1)
    ]
