"""Canonical binary encoding of channels and the fscv1 text format."""

import hashlib
import logging
from fractions import Fraction
from math import gcd
from typing import Any

from .channel import UnifilarChannel, format_rational, to_rational, validate_channel
from .errors import MalformedEncodingError

logger = logging.getLogger(__name__)

MAGIC = b"FSCE"
VERSION = 1
TEXT_HEADER = "fscv1"


# ============ Varints ============

def write_varint(value: int) -> bytes:
    """Unsigned LEB128 encoding of a nonnegative integer."""
    if value < 0:
        raise ValueError(f"varint must be nonnegative, got {value}")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def read_varint(data: bytes, pos: int) -> tuple[int, int]:
    """Read a minimal LEB128 varint at `pos`; returns (value, next position)."""
    start = pos
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise MalformedEncodingError("truncated varint", start)
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            if byte == 0 and pos - start > 1:
                raise MalformedEncodingError("non-minimal varint", start)
            return value, pos


def _write_rational(value: Fraction) -> bytes:
    return write_varint(value.numerator) + write_varint(value.denominator)


def _read_rational(data: bytes, pos: int) -> tuple[Fraction, int]:
    start = pos
    num, pos = read_varint(data, pos)
    den, pos = read_varint(data, pos)
    if den == 0:
        raise MalformedEncodingError("zero denominator", start)
    if gcd(num, den) != 1:
        raise MalformedEncodingError("rational not in lowest terms", start)
    return Fraction(num, den), pos


# ============ Binary encoding ============

def encode_channel(channel: UnifilarChannel) -> bytes:
    """Canonical byte string e of a channel.

    Layout: magic 'FSCE', version, input size, output size and state count
    (varints), the update table in row-major (s, x, y) order, the kernel
    as numerator/denominator varint pairs in the same order, then the
    initial vector as numerator/denominator pairs.
    """
    out = bytearray(MAGIC)
    out += write_varint(VERSION)
    out += write_varint(channel.input_size)
    out += write_varint(channel.output_size)
    out += write_varint(channel.num_states)
    for target in channel.update:
        out += write_varint(target)
    for value in channel.kernel:
        out += _write_rational(value)
    for value in channel.initial:
        out += _write_rational(value)
    return bytes(out)


def decode_channel(data: bytes) -> UnifilarChannel:
    """Inverse of encode_channel; validates the decoded channel.

    Raises:
        MalformedEncodingError: at the byte offset of the first syntax violation
        ChannelValidationError: well-formed bytes describing an invalid channel
    """
    data = bytes(data)
    if len(data) < len(MAGIC):
        raise MalformedEncodingError("missing magic", len(data))
    if data[:len(MAGIC)] != MAGIC:
        raise MalformedEncodingError("bad magic", 0)
    pos = len(MAGIC)

    version_pos = pos
    version, pos = read_varint(data, pos)
    if version != VERSION:
        raise MalformedEncodingError(f"unsupported version {version}", version_pos)
    sizes_pos = pos
    input_size, pos = read_varint(data, pos)
    output_size, pos = read_varint(data, pos)
    if (input_size, output_size) != (2, 2):
        raise MalformedEncodingError(f"unsupported alphabet sizes {input_size}x{output_size}", sizes_pos)
    states_pos = pos
    num_states, pos = read_varint(data, pos)
    if num_states < 1:
        raise MalformedEncodingError("empty state set", states_pos)

    slots = num_states * input_size * output_size
    update = []
    for _ in range(slots):
        target, pos = read_varint(data, pos)
        update.append(target)
    kernel = []
    for _ in range(slots):
        value, pos = _read_rational(data, pos)
        kernel.append(value)
    initial = []
    for _ in range(num_states):
        value, pos = _read_rational(data, pos)
        initial.append(value)
    if pos != len(data):
        raise MalformedEncodingError("trailing bytes", pos)

    return UnifilarChannel(
        num_states=num_states,
        update=tuple(update),
        kernel=tuple(kernel),
        initial=tuple(initial),
    )


def channel_hash(channel: UnifilarChannel) -> str:
    """SHA-256 hex digest of the canonical encoding."""
    return hashlib.sha256(encode_channel(channel)).hexdigest()


# ============ Text format ============

def render_channel_text(channel: UnifilarChannel) -> str:
    """Render a channel in the line-oriented fscv1 format."""
    labels = channel.labels
    lines = [TEXT_HEADER, f"states {channel.num_states}"]
    if list(labels) != [str(s) for s in channel.states]:
        lines.append("labels " + " ".join(labels))
    lines.append("init " + " ".join(format_rational(v) for v in channel.initial))
    for s in channel.states:
        for x in range(channel.input_size):
            for y in range(channel.output_size):
                value = channel.prob(s, x, y)
                if value:
                    lines.append(f"kernel {labels[s]} {x} {y} {format_rational(value)}")
    for s in channel.states:
        for x in range(channel.input_size):
            for y in range(channel.output_size):
                lines.append(f"update {labels[s]} {x} {y} {labels[channel.next_state(s, x, y)]}")
    return "\n".join(lines) + "\n"


def _parse_bit(token: str, line_no: int) -> int:
    if token not in ("0", "1"):
        raise MalformedEncodingError(f"expected a bit, got {token!r}", line_no)
    return int(token)


def parse_channel_text(text: str) -> UnifilarChannel:
    """Parse the fscv1 text format.

    Blank lines and '#' comments are ignored. State references in kernel
    and update lines use the labels line when present, else indices.

    Raises:
        MalformedEncodingError: with the 1-based line number of the first bad line
        ChannelValidationError: the parsed description violates channel invariants
    """
    header_seen = False
    states: int | None = None
    labels: list[str] | None = None
    initial: list[Fraction] | None = None
    kernel: dict[tuple[str, int, int], Fraction] = {}
    update: dict[tuple[str, int, int], str] = {}

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]

        if not header_seen:
            if line != TEXT_HEADER:
                raise MalformedEncodingError(f"expected header '{TEXT_HEADER}'", line_no)
            header_seen = True
            continue

        if keyword == "states":
            if states is not None or len(tokens) != 2 or not tokens[1].isdigit():
                raise MalformedEncodingError("bad states line", line_no)
            states = int(tokens[1])
            continue
        if states is None:
            raise MalformedEncodingError(f"'{keyword}' before states line", line_no)

        if keyword == "labels":
            if labels is not None or len(tokens) != states + 1:
                raise MalformedEncodingError("bad labels line", line_no)
            labels = tokens[1:]
        elif keyword == "init":
            if initial is not None or len(tokens) != states + 1:
                raise MalformedEncodingError("bad init line", line_no)
            try:
                initial = [to_rational(token) for token in tokens[1:]]
            except TypeError as e:
                raise MalformedEncodingError(str(e), line_no) from e
        elif keyword in ("kernel", "update"):
            if len(tokens) != 5:
                raise MalformedEncodingError(f"bad {keyword} line", line_no)
            key = (tokens[1], _parse_bit(tokens[2], line_no), _parse_bit(tokens[3], line_no))
            table: dict[Any, Any] = kernel if keyword == "kernel" else update
            if key in table:
                raise MalformedEncodingError(f"duplicate {keyword} entry {key}", line_no)
            if keyword == "kernel":
                try:
                    table[key] = to_rational(tokens[4])
                except TypeError as e:
                    raise MalformedEncodingError(str(e), line_no) from e
            else:
                table[key] = tokens[4]
        else:
            raise MalformedEncodingError(f"unknown keyword '{keyword}'", line_no)

    if not header_seen:
        raise MalformedEncodingError("empty channel text", 1)
    if states is None:
        raise MalformedEncodingError("missing states line", 1)
    if initial is None:
        raise MalformedEncodingError("missing init line", 1)

    names = labels if labels is not None else [str(s) for s in range(states)]
    return validate_channel({"states": names, "initial": initial, "kernel": kernel, "update": update})
