"""Imagery-decoding pipeline driving a simulated drone swarm.

Subpackages by role: recording/filtering/epochs hold the signal chain, ica
cleans it, csp/lda/pipeline/crossval decode it, synth fabricates sessions,
swarm simulates the vehicles, protocol/gateway wire everything together.
"""

__version__ = "0.1.0"

from ._kernels import active_backend, set_backend
from .layout import ChannelLayout, compact_layout, default_layout
from .recording import (
    PARADIGM_LABELS,
    PARADIGMS,
    EventMarker,
    Recording,
    read_recording,
    write_recording,
)

__all__ = [
    "__version__",
    "active_backend",
    "set_backend",
    "ChannelLayout",
    "default_layout",
    "compact_layout",
    "PARADIGMS",
    "PARADIGM_LABELS",
    "EventMarker",
    "Recording",
    "read_recording",
    "write_recording",
]
