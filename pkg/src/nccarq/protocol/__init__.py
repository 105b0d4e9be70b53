"""Node state machines for NCC-ARQ and the C-ARQ baseline.

"""

from nccarq.core.base_types import NodeRole, ProtocolVariant
from nccarq.protocol.base_types import (
    Action,
    ActionKind,
    CycleStart,
    FrameArrival,
    FrameSent,
    IProtocolMachine,
    NodeState,
    Phase,
    ProtocolOptions,
    TimerExpired,
    TimerTag,
    TraceRecord,
)
from nccarq.protocol.helpers import records_of, transmission_count
from nccarq.protocol.machines import (
    CarqMachine,
    NccArqMachine,
    carq_step,
    machine_for,
    ncc_step,
)

__all__ = [
    "NodeRole",
    "ProtocolVariant",
    "Action",
    "ActionKind",
    "CycleStart",
    "FrameArrival",
    "FrameSent",
    "IProtocolMachine",
    "NodeState",
    "Phase",
    "ProtocolOptions",
    "TimerExpired",
    "TimerTag",
    "TraceRecord",
    "records_of",
    "transmission_count",
    "CarqMachine",
    "NccArqMachine",
    "carq_step",
    "machine_for",
    "ncc_step",
]
