"""Configuration constants, frame definitions and time arithmetic.

"""

from nccarq.core.base_types import (
    Duration,
    FrameKind,
    NodeRole,
    Outcome,
    PacketId,
    ProtocolVariant,
)
from nccarq.core.frames import (
    MULTICAST,
    CycleAirtimes,
    Frame,
    cycle_airtimes,
    frame_airtime,
    frame_duration,
    frame_size_bytes,
    make_frame,
)
from nccarq.core.params import SystemParameters, ValidationResult, validate_parameters

__all__ = [
    "Duration",
    "FrameKind",
    "NodeRole",
    "Outcome",
    "PacketId",
    "ProtocolVariant",
    "MULTICAST",
    "CycleAirtimes",
    "Frame",
    "cycle_airtimes",
    "frame_airtime",
    "frame_duration",
    "frame_size_bytes",
    "make_frame",
    "SystemParameters",
    "ValidationResult",
    "validate_parameters",
]
