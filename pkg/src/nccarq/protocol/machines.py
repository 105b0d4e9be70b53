"""NCC-ARQ and C-ARQ node state machines.

Transitions are pure: a machine never mutates the state it is given and keeps
no clock or queue of its own. Timing is expressed as action delays.

"""

from __future__ import annotations

from abc import abstractmethod
from dataclasses import replace

from nccarq.core.base_types import (
    FrameKind,
    NodeRole,
    Outcome,
    PacketId,
    ProtocolVariant,
)
from nccarq.core.frames import MULTICAST, Frame, cycle_airtimes, make_frame
from nccarq.core.params import SystemParameters
from nccarq.errors import (
    MaxAttemptsExceededError,
    NotDecodableError,
    ProtocolViolationError,
)
from nccarq.netcode import Payload, xor_decode, xor_encode
from nccarq.protocol.base_types import (
    Action,
    CycleStart,
    FrameArrival,
    FrameSent,
    IProtocolMachine,
    NodeState,
    Phase,
    ProtocolEvent,
    TimerExpired,
    TimerTag,
    deliver,
    set_timer,
    transmit,
)

Transition = tuple[NodeState, list[Action]]

ACK_FALLBACK = "ack_fallback"
COOP_TIMEOUT = "coop_timeout"


class ProtocolMachine(IProtocolMachine):
    """Behavior shared by both variants: cycle start, relay retransmission."""

    def step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        if isinstance(event, CycleStart):
            return self._start_cycle(state, event, params)

        if state.role == NodeRole.RELAY:
            return self._relay_step(state, event, params)

        return self._endpoint_step(state, event, params)

    def _start_cycle(
        self, state: NodeState, event: CycleStart, params: SystemParameters
    ) -> Transition:
        if not state.is_idle:
            raise ProtocolViolationError(
                f"{state.role.name} is still busy ({state.phase.name}) when cycle "
                f"{event.cycle} starts."
            )

        fresh = {
            "current_cycle": event.cycle,
            "attempt_count": 0,
            "acked": frozenset(),
            "delivered": frozenset(),
        }

        if state.role == NodeRole.RELAY:
            return state.evolve(phase=Phase.AWAIT_CFC, **fresh), []

        own = PacketId(state.role, event.cycle)

        if event.payload is None or event.payload.id != own:
            raise ProtocolViolationError(
                f"{state.role.name} expected packet {own} at the start "
                f"of cycle {event.cycle}."
            )

        original = make_frame(
            FrameKind.DATA,
            state.role,
            state.role.peer(),
            params,
            carries=(own,),
            payload=event.payload,
            cycle=event.cycle,
        )
        store = state.store.store(event.payload)

        if state.role == NodeRole.SOURCE:
            return state.evolve(phase=Phase.AWAIT_CODED, store=store, **fresh), [
                transmit(original, 0.0, f"original {original.packet}")
            ]

        state = state.evolve(
            phase=Phase.AWAIT_CODED, store=store, pending_tx=(original,), **fresh
        )
        return state, []

    @abstractmethod
    def _endpoint_step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        """Transition of the source or the destination."""

        raise NotImplementedError()

    @abstractmethod
    def _relay_step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        """Transition of the relay."""

        raise NotImplementedError()

    def _ack(self, state: NodeState, params: SystemParameters) -> Frame:
        return make_frame(
            FrameKind.ACK,
            state.role,
            NodeRole.RELAY,
            params,
            carries=(state.peer_packet,),
            cycle=state.current_cycle,
        )

    def _cfc(
        self, state: NodeState, failed: Frame, params: SystemParameters
    ) -> tuple[NodeState, Action]:
        """Ask the relay for help with ``failed``."""

        if self.variant == ProtocolVariant.NCC_ARQ and state.pending_tx:
            own = state.pending_tx[0]
            cfc = make_frame(
                FrameKind.CFC_PIGGYBACK,
                state.role,
                NodeRole.RELAY,
                params,
                carries=own.carries,
                payload=own.payload,
                request=failed.packet,
                cycle=state.current_cycle,
            )
            state = state.evolve(pending_tx=state.pending_tx[1:])
        else:
            cfc = make_frame(
                FrameKind.CFC,
                state.role,
                NodeRole.RELAY,
                params,
                request=failed.packet,
                cycle=state.current_cycle,
            )

        return (
            state.evolve(phase=Phase.AWAIT_CODED),
            transmit(cfc, params.sifs_us, f"cfc for {failed.packet}"),
        )

    def _finish_if_done(self, state: NodeState) -> NodeState:
        """An endpoint is done once both packets of the cycle are acknowledged."""

        own, peer = state.own_packet, state.peer_packet

        if own in state.acked and peer in state.acked and not state.pending_tx:
            store = state.store.release(own) if own in state.store else state.store
            return state.evolve(store=store, phase=Phase.IDLE)

        return state

    def _cooperate(self, state: NodeState, frame: Frame, delay: float) -> Transition:
        """Send the first copy of a relayed frame."""

        state = state.evolve(
            pending_tx=(frame,), phase=Phase.COOPERATING, attempt_count=1
        )
        return state, [transmit(frame, delay, "relay attempt 1")]

    def _retransmit(self, state: NodeState) -> Transition:
        """Send the pending relayed frame again, right away."""

        attempt = state.attempt_count + 1

        if attempt > state.options.max_attempts:
            raise MaxAttemptsExceededError(
                f"Relay gave up after {state.options.max_attempts} attempts in cycle "
                f"{state.current_cycle}."
            )

        frame = replace(state.pending_tx[0], attempt=attempt)
        state = state.evolve(
            pending_tx=(frame,), phase=Phase.COOPERATING, attempt_count=attempt
        )
        return state, [transmit(frame, 0.0, f"relay attempt {attempt}")]

    def _relay_frame_sent(
        self, state: NodeState, event: FrameSent, params: SystemParameters
    ) -> Transition:
        frame = event.frame

        if frame.kind == FrameKind.CODED and state.options.await_both_acks:
            timeout = state.options.coop_timeout_us
            if timeout is None:
                timeout = 3 * params.sifs_us + 2 * cycle_airtimes(params).control
            tag = TimerTag(COOP_TIMEOUT, state.current_cycle, frame.attempt)
            return state.evolve(phase=Phase.AWAIT_ACK_D), [
                set_timer(tag, timeout, "cooperation timeout")
            ]

        if event.outcome == Outcome.CORRUPTED:
            return self._retransmit(state)

        phase = Phase.AWAIT_ACK_S if frame.dst == NodeRole.SOURCE else Phase.AWAIT_ACK_D
        return state.evolve(phase=phase), []

    def _relay_common(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        """Overhearing, own-frame feedback, ACKs and timeouts at the relay."""

        if isinstance(event, FrameSent):
            return self._relay_frame_sent(state, event, params)

        if isinstance(event, TimerExpired):
            tag = event.tag
            if (
                tag.name == COOP_TIMEOUT
                and tag.cycle == state.current_cycle
                and tag.attempt == state.attempt_count
                and state.pending_tx
            ):
                return self._retransmit(state)
            return state, []

        if not isinstance(event, FrameArrival):
            return state, []

        frame, outcome = event.frame, event.outcome

        if outcome != Outcome.DELIVERED:
            return state, []

        if frame.kind == FrameKind.DATA and frame.src.is_endpoint:
            assert frame.payload is not None
            return state.evolve(store=state.store.store(frame.payload)), []

        if frame.kind == FrameKind.ACK and state.pending_tx:
            return self._relay_ack(state, frame), []

        return state, []

    def _relay_ack(self, state: NodeState, ack: Frame) -> NodeState:
        pending = state.pending_tx[0]

        if ack.packet not in pending.carries:
            return state

        acked = state.acked | {ack.packet}

        if not set(pending.carries) <= acked:
            return state.evolve(acked=acked, phase=Phase.AWAIT_ACK_S)

        store = state.store
        for packet in pending.carries:
            store = store.release(packet)

        phase = Phase.IDLE if len(acked) >= 2 else Phase.AWAIT_CFC
        return state.evolve(
            acked=acked, store=store, pending_tx=(), attempt_count=0, phase=phase
        )

    def _stored(
        self, state: NodeState, packet_id: PacketId, action: str
    ) -> Payload:
        payload = state.store.lookup(packet_id)

        if payload is None:
            raise ProtocolViolationError(
                f"{state.role.name} cannot {action}: packet {packet_id} is not stored."
            )

        return payload


class NccArqMachine(ProtocolMachine):
    """Network coding-based cooperative ARQ.

    The destination answers a corrupted original with a CFC carrying its own
    packet; the relay multicasts the XOR of both packets, each endpoint decodes
    with the packet it already holds and acknowledges, destination first.
    """

    @property
    def variant(self) -> ProtocolVariant:
        return ProtocolVariant.NCC_ARQ

    def _endpoint_step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        if isinstance(event, FrameArrival):
            frame = event.frame

            if frame.kind == FrameKind.DATA and frame.addressed_to(state.role):
                if event.outcome == Outcome.DELIVERED:
                    raise ProtocolViolationError(
                        f"{state.role.name} received {frame.packet} over the direct "
                        "link; cooperation needs a corrupted original."
                    )
                new_state, action = self._cfc(state, frame, params)
                return new_state, [action]

            if frame.kind == FrameKind.CODED and event.outcome == Outcome.DELIVERED:
                return self._decode(state, frame, params)

            if frame.kind == FrameKind.ACK and frame.src == state.role.peer():
                return self._peer_ack(state, frame, params)

            return state, []

        if isinstance(event, FrameSent) and event.frame.kind == FrameKind.ACK:
            state = state.evolve(acked=state.acked | {event.frame.packet})
            return self._finish_if_done(state), []

        if isinstance(event, TimerExpired):
            tag = event.tag
            if (
                tag.name == ACK_FALLBACK
                and tag.cycle == state.current_cycle
                and state.phase == Phase.AWAIT_ACK_D
            ):
                return state.evolve(phase=Phase.AWAIT_ACK_S), [
                    transmit(self._ack(state, params), 0.0, "ack without peer ack")
                ]

        return state, []

    def _decode(
        self, state: NodeState, frame: Frame, params: SystemParameters
    ) -> Transition:
        peer = state.peer_packet

        if peer in state.delivered or frame.cycle != state.current_cycle:
            return state, []

        known = self._stored(state, state.own_packet, f"decode {frame.carries}")
        assert frame.payload is not None

        try:
            decoded = xor_decode(frame.payload, known)
        except NotDecodableError as err:
            raise ProtocolViolationError(str(err)) from err

        state = state.evolve(delivered=state.delivered | {peer})
        actions = [deliver(decoded, f"decoded {peer}")]

        if state.role == NodeRole.DESTINATION or state.own_packet in state.acked:
            actions.append(transmit(self._ack(state, params), params.sifs_us, "ack"))
            return state.evolve(phase=Phase.AWAIT_ACK_S), actions

        if state.options.await_both_acks:
            tag = TimerTag(ACK_FALLBACK, state.current_cycle, frame.attempt)
            delay = 2 * params.sifs_us + cycle_airtimes(params).control
            actions.append(set_timer(tag, delay, "ack slot after destination"))

        return state.evolve(phase=Phase.AWAIT_ACK_D), actions

    def _peer_ack(
        self, state: NodeState, ack: Frame, params: SystemParameters
    ) -> Transition:
        if ack.packet != state.own_packet:
            return state, []

        state = state.evolve(acked=state.acked | {ack.packet})

        if state.role == NodeRole.SOURCE and state.phase == Phase.AWAIT_ACK_D:
            return state.evolve(phase=Phase.AWAIT_ACK_S), [
                transmit(self._ack(state, params), params.sifs_us, "ack after peer")
            ]

        return self._finish_if_done(state), []

    def _relay_step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        if (
            isinstance(event, FrameArrival)
            and event.frame.kind == FrameKind.CFC_PIGGYBACK
            and event.frame.addressed_to(state.role)
            and event.outcome == Outcome.DELIVERED
        ):
            cfc = event.frame
            assert cfc.payload is not None and cfc.request is not None

            state = state.evolve(store=state.store.store(cfc.payload))
            failed = self._stored(state, cfc.request, "code the requested packet")
            coded = xor_encode(failed, cfc.payload)

            frame = make_frame(
                FrameKind.CODED,
                NodeRole.RELAY,
                MULTICAST,
                params,
                carries=(failed.id, cfc.payload.id),
                payload=coded,
                cycle=state.current_cycle,
            )
            return self._cooperate(state, frame, params.difs_us + params.t_onc_us)

        return self._relay_common(state, event, params)


class CarqMachine(ProtocolMachine):
    """Plain cooperative ARQ: one unidirectional cooperative cycle per packet.

    The source's packet goes first; once the destination has acknowledged it,
    the destination sends its own packet and the same procedure repeats.
    """

    @property
    def variant(self) -> ProtocolVariant:
        return ProtocolVariant.C_ARQ

    def _endpoint_step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        if isinstance(event, FrameArrival):
            frame = event.frame

            if frame.kind == FrameKind.DATA and frame.addressed_to(state.role):
                if frame.src == NodeRole.RELAY:
                    return self._relayed(state, frame, event.outcome, params)

                if event.outcome == Outcome.DELIVERED:
                    raise ProtocolViolationError(
                        f"{state.role.name} received {frame.packet} over the direct "
                        "link; cooperation needs a corrupted original."
                    )

                new_state, action = self._cfc(state, frame, params)
                return new_state, [action]

            if frame.kind == FrameKind.ACK and frame.src == state.role.peer():
                if frame.packet != state.own_packet:
                    return state, []
                state = state.evolve(acked=state.acked | {frame.packet})
                return self._finish_if_done(state), []

            return state, []

        if isinstance(event, FrameSent) and event.frame.kind == FrameKind.ACK:
            state = state.evolve(acked=state.acked | {event.frame.packet})

            if state.pending_tx:
                own = state.pending_tx[0]
                state = state.evolve(pending_tx=(), phase=Phase.AWAIT_ACK_S)
                return state, [transmit(own, 0.0, f"original {own.packet}")]

            return self._finish_if_done(state), []

        return state, []

    def _relayed(
        self, state: NodeState, frame: Frame, outcome: Outcome, params: SystemParameters
    ) -> Transition:
        peer = state.peer_packet

        if outcome != Outcome.DELIVERED or peer in state.delivered:
            return state, []

        assert frame.payload is not None
        state = state.evolve(
            delivered=state.delivered | {peer}, phase=Phase.AWAIT_ACK_D
        )
        return state, [
            deliver(frame.payload, f"relayed {peer}"),
            transmit(self._ack(state, params), params.sifs_us, "ack"),
        ]

    def _relay_step(
        self, state: NodeState, event: ProtocolEvent, params: SystemParameters
    ) -> Transition:
        if (
            isinstance(event, FrameArrival)
            and event.frame.kind == FrameKind.CFC
            and event.frame.addressed_to(state.role)
            and event.outcome == Outcome.DELIVERED
        ):
            cfc = event.frame
            assert cfc.request is not None
            failed = self._stored(state, cfc.request, "relay the requested packet")

            frame = make_frame(
                FrameKind.DATA,
                NodeRole.RELAY,
                cfc.src,
                params,
                carries=(failed.id,),
                payload=failed,
                cycle=state.current_cycle,
            )
            return self._cooperate(state, frame, params.difs_us)

        return self._relay_common(state, event, params)


_MACHINES: dict[ProtocolVariant, IProtocolMachine] = {
    ProtocolVariant.NCC_ARQ: NccArqMachine(),
    ProtocolVariant.C_ARQ: CarqMachine(),
}


def machine_for(variant: ProtocolVariant) -> IProtocolMachine:
    """The shared state machine of a protocol variant."""
    return _MACHINES[variant]


def ncc_step(
    state: NodeState, event: ProtocolEvent, params: SystemParameters
) -> Transition:
    """Apply one event to an NCC-ARQ node."""
    return _MACHINES[ProtocolVariant.NCC_ARQ].step(state, event, params)


def carq_step(
    state: NodeState, event: ProtocolEvent, params: SystemParameters
) -> Transition:
    """Apply one event to a C-ARQ node."""
    return _MACHINES[ProtocolVariant.C_ARQ].step(state, event, params)
