"""Enumerations and small value types shared by every module.

"""

from __future__ import annotations

from enum import Enum, auto
from typing import NamedTuple

Duration = float
"""Real-valued microseconds of virtual time (double precision, non-negative)."""


class NodeRole(Enum):
    """The role a station plays in the three-node topology.

    Roles double as node identifiers since the topology never has more than one
    station per role.
    """

    SOURCE = auto()
    DESTINATION = auto()
    RELAY = auto()

    @property
    def short_name(self) -> str:
        """One-letter name used in traces and packet identifiers."""
        return self.name[0]

    @property
    def is_endpoint(self) -> bool:
        """True for the two stations that exchange traffic."""
        return self != NodeRole.RELAY

    def peer(self) -> NodeRole:
        """The opposite endpoint of a direct-link pair."""

        if self == NodeRole.SOURCE:
            return NodeRole.DESTINATION

        if self == NodeRole.DESTINATION:
            return NodeRole.SOURCE

        raise ValueError("The relay has no peer endpoint.")


class ProtocolVariant(Enum):
    """The MAC scheme executed by every node of a run."""

    NCC_ARQ = auto()
    C_ARQ = auto()


class FrameKind(Enum):
    """The kinds of MAC frames exchanged in a cooperation cycle."""

    DATA = auto()
    CFC = auto()
    CFC_PIGGYBACK = auto()
    CODED = auto()
    ACK = auto()

    @property
    def carries_data(self) -> bool:
        """True for frames with a data payload on the air."""
        return self in (FrameKind.DATA, FrameKind.CFC_PIGGYBACK, FrameKind.CODED)

    @property
    def is_cfc(self) -> bool:
        """True for both call-for-cooperation forms."""
        return self in (FrameKind.CFC, FrameKind.CFC_PIGGYBACK)


class Outcome(Enum):
    """Result of a single frame reception."""

    DELIVERED = auto()
    CORRUPTED = auto()


class PacketId(NamedTuple):
    """Identity of an application packet: originating node and sequence number."""

    origin: NodeRole
    seq: int

    def __str__(self) -> str:
        return f"{self.origin.short_name}{self.seq}"
