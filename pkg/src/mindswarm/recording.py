"""Multichannel recording data model and its binary container.

Container layout (little-endian): magic ``EEGR``, format version u16,
header length u32, UTF-8 JSON header, then time-major f32 frames (one f32
per channel per frame, in header channel order). Samples are held as
float64 in memory and quantized to float32 on write.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .layout import ChannelLayout, default_layout

MAGIC = b"EEGR"
FORMAT_VERSION = 1

PARADIGMS = ("MI", "VI", "SI")
PARADIGM_LABELS = {
    "MI": ("left", "right", "up", "down"),
    "VI": ("fall_in", "spread_out", "split"),
    "SI": ("go", "stop", "follow_me", "return"),
}


class RecordingFormatError(ValueError):
    """Container violation; ``code`` is one of bad_magic, bad_version,
    truncated, size_mismatch, bad_header."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def validate_label(paradigm: str, label: str) -> None:
    if paradigm not in PARADIGM_LABELS:
        raise ValueError(f"unknown paradigm {paradigm!r}; expected one of {PARADIGMS}")
    if label not in PARADIGM_LABELS[paradigm]:
        raise ValueError(
            f"label {label!r} not legal for paradigm {paradigm}; "
            f"expected one of {PARADIGM_LABELS[paradigm]}"
        )


@dataclass(frozen=True, order=True)
class EventMarker:
    sample_index: int
    paradigm: str = field(compare=False)
    label: str = field(compare=False)

    def __post_init__(self):
        if self.sample_index < 0:
            raise ValueError("event sample_index must be >= 0")
        validate_label(self.paradigm, self.label)


@dataclass
class Recording:
    """Channels x time sample matrix plus montage, rate and event markers."""

    layout: ChannelLayout
    sample_rate: float
    samples: np.ndarray
    events: list = field(default_factory=list)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must be 2-D (channels x time)")
        if self.samples.shape[0] != len(self.layout):
            raise ValueError(
                f"samples has {self.samples.shape[0]} rows but layout has "
                f"{len(self.layout)} channels"
            )
        self.events = sorted(self.events, key=lambda e: e.sample_index)
        for ev in self.events:
            if ev.sample_index >= self.n_samples:
                raise ValueError(
                    f"event at {ev.sample_index} beyond recording length {self.n_samples}"
                )

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, name: str) -> np.ndarray:
        return self.samples[self.layout.index(name)]

    def with_samples(self, samples: np.ndarray, sample_rate=None, events=None) -> "Recording":
        return Recording(
            layout=self.layout,
            sample_rate=self.sample_rate if sample_rate is None else sample_rate,
            samples=samples,
            events=list(self.events) if events is None else list(events),
        )

    def events_of(self, paradigm: str):
        return [e for e in self.events if e.paradigm == paradigm]


def write_recording(rec: Recording, path) -> None:
    header = {
        "channels": list(rec.layout.names),
        "reference": rec.layout.reference,
        "ground": rec.layout.ground,
        "fs": rec.sample_rate,
        "n_samples": rec.n_samples,
        "events": [
            {"i": e.sample_index, "paradigm": e.paradigm, "label": e.label}
            for e in rec.events
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(rec.samples.T, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def read_recording(path) -> Recording:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10:
        raise RecordingFormatError("truncated", "file shorter than fixed header")
    if blob[:4] != MAGIC:
        raise RecordingFormatError("bad_magic", f"expected magic {MAGIC!r}, got {blob[:4]!r}")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != FORMAT_VERSION:
        raise RecordingFormatError(
            "bad_version", f"unsupported container version {version}"
        )
    (header_len,) = struct.unpack_from("<I", blob, 6)
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise RecordingFormatError("truncated", "header extends past end of file")
    try:
        header = json.loads(blob[10:header_end].decode("utf-8"))
        channels = header["channels"]
        fs = float(header["fs"])
        n_samples = int(header["n_samples"])
        raw_events = header.get("events", [])
        reference = header.get("reference", "FCz")
        ground = header.get("ground", "FPz")
    except (ValueError, KeyError, TypeError) as exc:
        raise RecordingFormatError("bad_header", f"malformed header: {exc}") from exc

    n_channels = len(channels)
    expected = n_samples * n_channels * 4
    got = len(blob) - header_end
    if got < expected:
        raise RecordingFormatError(
            "truncated",
            f"payload holds {got // (n_samples * 4) if n_samples else 0} full channels "
            f"worth of data, header declares {n_channels} ({got} of {expected} bytes)",
        )
    if got > expected:
        raise RecordingFormatError(
            "size_mismatch", f"payload has {got - expected} trailing bytes"
        )

    frames = np.frombuffer(blob, dtype="<f4", count=n_samples * n_channels, offset=header_end)
    samples = frames.reshape(n_samples, n_channels).T.astype(np.float64)
    try:
        events = [
            EventMarker(int(e["i"]), str(e["paradigm"]), str(e["label"]))
            for e in raw_events
        ]
        layout = ChannelLayout(names=tuple(channels), reference=reference, ground=ground)
        return Recording(layout=layout, sample_rate=fs, samples=samples, events=events)
    except (ValueError, KeyError, TypeError) as exc:
        raise RecordingFormatError("bad_header", f"invalid header contents: {exc}") from exc


__all__ = [
    "PARADIGMS",
    "PARADIGM_LABELS",
    "EventMarker",
    "Recording",
    "RecordingFormatError",
    "read_recording",
    "write_recording",
    "validate_label",
]
