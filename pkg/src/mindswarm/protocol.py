"""Line-delimited JSON wire protocol between decoder, gateway and console.

One UTF-8 JSON object per line, flat schema, protocol version 1. Inbound
decoding is total: any byte line either yields a WireMessage or a
ProtocolError with a stable reason code; nothing raises past decode().
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .recording import PARADIGM_LABELS, PARADIGMS

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 4096

MESSAGE_TYPES = ("command", "mode_set", "state", "ack", "error")
ORIGINS = ("decoder", "operator")


class ProtocolError(ValueError):
    """Decode/validation failure with a machine-readable reason code."""

    def __init__(self, reason: str, message: str = "", seq=None):
        super().__init__(message or reason)
        self.reason = reason
        self.seq = seq


@dataclass(frozen=True)
class Command:
    paradigm: str
    label: str
    confidence: float
    ts: int = 0
    seq: int = 0
    origin: str = "decoder"


@dataclass(frozen=True)
class WireMessage:
    type: str
    seq: int
    ts: int
    fields: dict = field(default_factory=dict)
    v: int = PROTOCOL_VERSION

    @property
    def command(self) -> Command:
        return self.fields["_command"]


def encode(msg_type: str, seq: int, ts: int, **fields) -> bytes:
    """Serialize one message to a newline-terminated JSON line."""
    doc = {"v": PROTOCOL_VERSION, "type": msg_type, "seq": seq, "ts": ts}
    doc.update(fields)
    return (json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")


def encode_command(cmd: Command) -> bytes:
    return encode(
        "command",
        cmd.seq,
        cmd.ts,
        paradigm=cmd.paradigm,
        label=cmd.label,
        confidence=cmd.confidence,
        origin=cmd.origin,
    )


def _require_int(doc: dict, key: str, seq=None) -> int:
    val = doc.get(key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ProtocolError("bad_field", f"field {key!r} must be an integer", seq=seq)
    if val < 0:
        raise ProtocolError("bad_field", f"field {key!r} must be >= 0", seq=seq)
    return val


def decode(line: bytes | str) -> WireMessage:
    """Parse and validate one wire line.

    Raises ProtocolError with one of: line_too_long, bad_encoding, bad_json,
    bad_schema, bad_version, unknown_type, bad_field, missing_field,
    bad_enum, illegal_label, confidence_out_of_range.
    """
    if isinstance(line, str):
        raw = line.encode("utf-8", errors="surrogatepass")
    else:
        raw = line
    if len(raw) > MAX_LINE_BYTES:
        raise ProtocolError("line_too_long", f"line exceeds {MAX_LINE_BYTES} bytes")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProtocolError("bad_encoding", str(exc)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("bad_json", str(exc)) from exc
    if not isinstance(doc, dict):
        raise ProtocolError("bad_schema", "message must be a JSON object")

    seq_hint = doc.get("seq") if isinstance(doc.get("seq"), int) else None
    version = doc.get("v")
    if version != PROTOCOL_VERSION:
        raise ProtocolError("bad_version", f"protocol version must be {PROTOCOL_VERSION}", seq=seq_hint)
    msg_type = doc.get("type")
    if not isinstance(msg_type, str) or msg_type not in MESSAGE_TYPES:
        raise ProtocolError("unknown_type", f"unknown message type {msg_type!r}", seq=seq_hint)

    seq = _require_int(doc, "seq", seq=seq_hint)
    ts = _require_int(doc, "ts", seq=seq_hint)
    fields = {k: v for k, v in doc.items() if k not in ("v", "type", "seq", "ts")}

    if msg_type == "command":
        fields["_command"] = _decode_command(doc, seq, ts)
    elif msg_type == "mode_set":
        paradigm = doc.get("paradigm")
        if paradigm is None:
            raise ProtocolError("missing_field", "mode_set needs 'paradigm'", seq=seq)
        if paradigm not in PARADIGMS:
            raise ProtocolError("bad_enum", f"unknown paradigm {paradigm!r}", seq=seq)
    return WireMessage(type=msg_type, seq=seq, ts=ts, fields=fields)


def _decode_command(doc: dict, seq: int, ts: int) -> Command:
    for key in ("paradigm", "label", "confidence"):
        if key not in doc:
            raise ProtocolError("missing_field", f"command needs {key!r}", seq=seq)
    paradigm = doc["paradigm"]
    if paradigm not in PARADIGMS:
        raise ProtocolError("bad_enum", f"unknown paradigm {paradigm!r}", seq=seq)
    label = doc["label"]
    if not isinstance(label, str) or label not in PARADIGM_LABELS[paradigm]:
        raise ProtocolError(
            "illegal_label", f"label {label!r} not legal for {paradigm}", seq=seq
        )
    confidence = doc["confidence"]
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        raise ProtocolError("bad_field", "confidence must be a number", seq=seq)
    confidence = float(confidence)
    if not (0.0 <= confidence <= 1.0):
        raise ProtocolError(
            "confidence_out_of_range", f"confidence {confidence} outside [0, 1]", seq=seq
        )
    origin = doc.get("origin", "decoder")
    if origin not in ORIGINS:
        raise ProtocolError("bad_enum", f"unknown origin {origin!r}", seq=seq)
    return Command(
        paradigm=paradigm, label=label, confidence=confidence,
        ts=ts, seq=seq, origin=origin,
    )


@dataclass
class SessionConfig:
    active_paradigm: str = "SI"
    confidence_threshold: float = 0.5
    tick_rate: float = 20.0
    snapshot_rate: float = 10.0
    tcp_host: str = "127.0.0.1"
    tcp_port: int = 7070
    ws_host: str = "127.0.0.1"
    ws_port: int = 7071
    log_path: str | None = None

    def __post_init__(self):
        if self.active_paradigm not in PARADIGMS:
            raise ValueError(f"unknown paradigm {self.active_paradigm!r}")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValueError("confidence threshold must be in [0, 1]")
        if self.tick_rate <= 0 or self.snapshot_rate <= 0:
            raise ValueError("rates must be positive")


def validate_command(cmd: Command, cfg: SessionConfig):
    """Gate a decoded command: (accepted, reason). Rejection is a normal
    outcome, reasons are 'wrong_mode' and 'low_confidence'."""
    if cmd.paradigm != cfg.active_paradigm:
        return False, "wrong_mode"
    if cmd.confidence < cfg.confidence_threshold:
        return False, "low_confidence"
    return True, None
