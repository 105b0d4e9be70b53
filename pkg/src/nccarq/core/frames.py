"""MAC frame definitions and airtime arithmetic.

"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Optional

from nccarq.core.base_types import Duration, FrameKind, NodeRole, PacketId
from nccarq.core.params import SystemParameters
from nccarq.errors import InvalidParameterError

if TYPE_CHECKING:
    from nccarq.netcode import Payload

MULTICAST: Optional[NodeRole] = None
"""Destination of a frame addressed to both endpoints at once."""

_CARRIED_PACKETS = {
    FrameKind.DATA: 1,
    FrameKind.CFC_PIGGYBACK: 1,
    FrameKind.ACK: 1,
    FrameKind.CFC: 0,
    FrameKind.CODED: 2,
}


def frame_airtime(
    size_bytes: int, rate_bps: float, params: SystemParameters
) -> Duration:
    """Time on the air of one PHY unit: PHY header plus the frame's bits at rate."""

    if size_bytes <= 0:
        raise InvalidParameterError(f"Frame size must be positive, got {size_bytes!r}.")

    if not rate_bps > 0:
        raise InvalidParameterError(f"Rate must be positive, got {rate_bps!r}.")

    return params.phy_header_us + size_bytes * 8 / (rate_bps / 1e6)


def frame_size_bytes(kind: FrameKind, params: SystemParameters) -> int:
    """Size of a frame of the given kind, counting both units of a piggyback."""

    if kind in (FrameKind.DATA, FrameKind.CODED):
        return params.data_frame_bytes

    if kind == FrameKind.CFC_PIGGYBACK:
        return params.ctrl_packet_bytes + params.data_frame_bytes

    return params.ctrl_packet_bytes


@dataclass(frozen=True)
class Frame:
    """A MAC-layer frame in flight.

    ``carries`` lists the application packets the frame holds (or acknowledges,
    for an ACK). ``request`` is set on call-for-cooperation frames and names the
    packet the relay should help with.
    """

    kind: FrameKind
    src: NodeRole
    dst: Optional[NodeRole]
    carries: tuple[PacketId, ...] = ()
    size_bytes: int = 0
    payload: Optional[Payload] = None
    request: Optional[PacketId] = None
    attempt: int = 1
    cycle: int = 0

    def __post_init__(self) -> None:
        expected = _CARRIED_PACKETS[self.kind]

        if len(set(self.carries)) != expected or len(self.carries) != expected:
            raise InvalidParameterError(
                f"{self.kind.name} frames carry exactly {expected} distinct "
                f"packet(s), got {[str(c) for c in self.carries]}."
            )

        if self.dst is MULTICAST and self.kind != FrameKind.CODED:
            raise InvalidParameterError(
                f"Only CODED frames may be multicast, got {self.kind.name}."
            )

        if self.size_bytes <= 0:
            raise InvalidParameterError(
                f"Frame size must be positive, got {self.size_bytes!r}."
            )

    @property
    def is_multicast(self) -> bool:
        """True if the frame is addressed to both endpoints."""
        return self.dst is MULTICAST

    @property
    def packet(self) -> PacketId:
        """The single packet of a DATA, piggyback or ACK frame."""

        if len(self.carries) != 1:
            raise ValueError(f"{self.kind.name} frame does not carry one packet.")

        return self.carries[0]

    def addressed_to(self, node: NodeRole) -> bool:
        """True if ``node`` is an intended receiver of the frame."""

        if self.is_multicast:
            return node.is_endpoint and node != self.src

        return self.dst == node


def make_frame(
    kind: FrameKind,
    src: NodeRole,
    dst: Optional[NodeRole],
    params: SystemParameters,
    carries: tuple[PacketId, ...] = (),
    payload: Optional[Payload] = None,
    request: Optional[PacketId] = None,
    attempt: int = 1,
    cycle: int = 0,
) -> Frame:
    """Create a frame whose size is derived from its kind."""

    return Frame(
        kind=kind,
        src=src,
        dst=dst,
        carries=carries,
        size_bytes=frame_size_bytes(kind, params),
        payload=payload,
        request=request,
        attempt=attempt,
        cycle=cycle,
    )


def frame_duration(frame: Frame, params: SystemParameters) -> Duration:
    """Airtime of a frame, choosing the rate from its kind and sender."""

    from_relay = frame.src == NodeRole.RELAY

    if frame.kind == FrameKind.CODED or (frame.kind == FrameKind.DATA and from_relay):
        return frame_airtime(
            params.data_frame_bytes, params.relay_data_rate_bps, params
        )

    if frame.kind == FrameKind.DATA:
        return frame_airtime(
            params.data_frame_bytes, params.source_data_rate_bps, params
        )

    control_rate = (
        params.relay_control_rate_bps if from_relay else params.source_control_rate_bps
    )
    t_control = frame_airtime(params.ctrl_packet_bytes, control_rate, params)

    if frame.kind == FrameKind.CFC_PIGGYBACK:
        return t_control + piggyback_data_airtime(params)

    return t_control


def piggyback_data_airtime(params: SystemParameters) -> Duration:
    """Airtime of the data unit riding on a CFC, T_B.

    With a shared preamble the data unit reuses the CFC's PHY header.
    """

    t_b = frame_airtime(params.data_frame_bytes, params.relay_data_rate_bps, params)

    if params.piggyback_shared_preamble:
        return t_b - params.phy_header_us

    return t_b


class CycleAirtimes(NamedTuple):
    """The three airtimes every cycle is built from."""

    direct_data: Duration
    relay_data: Duration
    control: Duration


def cycle_airtimes(params: SystemParameters) -> CycleAirtimes:
    """Direct-link data, relay-link data and endpoint control airtimes."""

    return CycleAirtimes(
        direct_data=frame_airtime(
            params.data_frame_bytes, params.source_data_rate_bps, params
        ),
        relay_data=frame_airtime(
            params.data_frame_bytes, params.relay_data_rate_bps, params
        ),
        control=frame_airtime(
            params.ctrl_packet_bytes, params.source_control_rate_bps, params
        ),
    )
