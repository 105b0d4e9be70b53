"""Protocol state, events, actions and the state machine interface.

"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields
from enum import Enum, auto
from typing import Any, NamedTuple, Optional, Union

from nccarq.core.base_types import (
    Duration,
    FrameKind,
    NodeRole,
    Outcome,
    PacketId,
    ProtocolVariant,
)
from nccarq.core.frames import Frame
from nccarq.core.params import SystemParameters
from nccarq.netcode import OverheardStore, Payload


class Phase(Enum):
    """Where a node stands within the current cycle."""

    IDLE = auto()
    AWAIT_CFC = auto()
    AWAIT_CODED = auto()
    AWAIT_ACK_D = auto()
    AWAIT_ACK_S = auto()
    COOPERATING = auto()


class ActionKind(Enum):
    """What a node asks the engine to do."""

    TRANSMIT = auto()
    SET_TIMER = auto()
    DELIVER_TO_APP = auto()


class TimerTag(NamedTuple):
    """Identifies a timer so stale expiries can be recognized."""

    name: str
    cycle: int
    attempt: int


@dataclass(frozen=True)
class Action:
    """A side effect requested by a transition, ``delay_from_now`` us later."""

    kind: ActionKind
    frame: Optional[Frame] = None
    delay_from_now: Duration = 0.0
    note: str = ""
    tag: Optional[TimerTag] = None
    payload: Optional[Payload] = None

    def __post_init__(self) -> None:
        if self.delay_from_now < 0:
            raise ValueError(f"Action delay must be non-negative: {self!r}")

        if self.kind == ActionKind.TRANSMIT and self.frame is None:
            raise ValueError("TRANSMIT actions must carry a frame.")

        if self.kind == ActionKind.SET_TIMER and (
            self.tag is None or self.delay_from_now <= 0
        ):
            raise ValueError("SET_TIMER actions need a tag and a positive delay.")

        if self.kind == ActionKind.DELIVER_TO_APP and self.payload is None:
            raise ValueError("DELIVER_TO_APP actions must carry a payload.")


def transmit(frame: Frame, delay: Duration = 0.0, note: str = "") -> Action:
    """Send ``frame`` after ``delay``."""
    return Action(ActionKind.TRANSMIT, frame=frame, delay_from_now=delay, note=note)


def set_timer(tag: TimerTag, delay: Duration, note: str = "") -> Action:
    """Expire ``tag`` after ``delay``."""
    return Action(ActionKind.SET_TIMER, delay_from_now=delay, note=note, tag=tag)


def deliver(payload: Payload, note: str = "") -> Action:
    """Hand a decoded payload to the application."""
    return Action(ActionKind.DELIVER_TO_APP, payload=payload, note=note)


@dataclass(frozen=True)
class ProtocolOptions:
    """Knobs shared by all nodes of a run.

    ``await_both_acks`` switches the relay from instantaneous failure detection
    to a cooperation timeout, which is needed when either leg of a coded
    multicast may fail. ``coop_timeout_us`` overrides the default timeout of
    3 SIFS + 2 ACK airtimes after the coded frame.
    """

    max_attempts: int = 100
    await_both_acks: bool = False
    coop_timeout_us: Optional[Duration] = None


@dataclass(frozen=True)
class NodeState:
    """Everything a node remembers between events."""

    role: NodeRole
    variant: ProtocolVariant
    store: OverheardStore = field(default_factory=OverheardStore)
    pending_tx: tuple[Frame, ...] = ()
    phase: Phase = Phase.IDLE
    current_cycle: int = 0
    attempt_count: int = 0
    acked: frozenset[PacketId] = frozenset()
    delivered: frozenset[PacketId] = frozenset()
    options: ProtocolOptions = ProtocolOptions()

    @property
    def is_idle(self) -> bool:
        """True once the node has nothing left to do in the current cycle."""
        return self.phase == Phase.IDLE and not self.pending_tx

    @property
    def own_packet(self) -> PacketId:
        """This endpoint's packet of the current cycle."""
        return PacketId(self.role, self.current_cycle)

    @property
    def peer_packet(self) -> PacketId:
        """The packet this endpoint receives in the current cycle."""
        return PacketId(self.role.peer(), self.current_cycle)

    def evolve(self, **changes: Any) -> NodeState:
        """A copy of the state with ``changes`` applied.

        Equivalent to ``dataclasses.replace`` without rerunning ``__init__``;
        transitions call it on every event.
        """

        unknown = changes.keys() - _NODE_STATE_FIELDS
        if unknown:
            raise TypeError(f"NodeState has no field(s) {sorted(unknown)}.")

        state = object.__new__(NodeState)
        state.__dict__.update(self.__dict__)
        state.__dict__.update(changes)
        return state


_NODE_STATE_FIELDS = frozenset(f.name for f in fields(NodeState))


class CycleStart(NamedTuple):
    """A new cycle begins; endpoints receive their fresh application packet."""

    cycle: int
    payload: Optional[Payload] = None


class FrameArrival(NamedTuple):
    """Another node's frame ended and reached this node with ``outcome``."""

    frame: Frame
    outcome: Outcome


class FrameSent(NamedTuple):
    """This node's frame ended; ``outcome`` is how it fared at its addressee."""

    frame: Frame
    outcome: Outcome


class TimerExpired(NamedTuple):
    """A timer set by this node expired."""

    tag: TimerTag


ProtocolEvent = Union[CycleStart, FrameArrival, FrameSent, TimerExpired]


class IProtocolMachine(ABC):
    """A pure transition function for the three node roles of one variant."""

    @property
    @abstractmethod
    def variant(self) -> ProtocolVariant:
        """The protocol variant this machine executes."""

        raise NotImplementedError()

    @abstractmethod
    def step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> tuple[NodeState, list[Action]]:
        """Apply ``event`` to ``state`` and return the new state and actions."""

        raise NotImplementedError()

    def listens_to(self, role: NodeRole, frame: Frame) -> bool:
        """True if a node in ``role`` reacts to the arrival of ``frame``.

        Nodes handle the frames addressed to them; beyond that the relay keeps
        overheard endpoint data and endpoints watch each other's ACKs. A False
        answer lets the engine skip the arrival, which never changes the node.
        """

        if frame.addressed_to(role):
            return True

        if role == NodeRole.RELAY:
            return frame.kind == FrameKind.DATA

        return frame.kind == FrameKind.ACK


class TraceRecord(NamedTuple):
    """One action taken by one node, stamped with the time it takes effect."""

    time_us: Duration
    node: NodeRole
    action: ActionKind
    frame_kind: Optional[FrameKind]
    attempt: int
    cycle: int
    packets: tuple[PacketId, ...] = ()
    note: str = ""
