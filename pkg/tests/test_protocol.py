# pylint: disable=C0116,W0621

"""Test the node state machines one transition at a time.

"""

from dataclasses import replace

import pytest

from nccarq.core import (
    FrameKind,
    NodeRole,
    Outcome,
    PacketId,
    ProtocolVariant,
    SystemParameters,
    cycle_airtimes,
    make_frame,
)
from nccarq.errors import MaxAttemptsExceededError, ProtocolViolationError
from nccarq.netcode import Payload, xor_encode
from nccarq.protocol import (
    ActionKind,
    CycleStart,
    FrameArrival,
    FrameSent,
    NodeState,
    Phase,
    ProtocolOptions,
    TimerExpired,
    TimerTag,
    TraceRecord,
    carq_step,
    machine_for,
    ncc_step,
    transmission_count,
)
from nccarq.protocol.machines import ACK_FALLBACK, COOP_TIMEOUT

S, D, R = NodeRole.SOURCE, NodeRole.DESTINATION, NodeRole.RELAY
A_ID, B_ID = PacketId(S, 0), PacketId(D, 0)
A = Payload.original(A_ID, b"\x11" * 8)
B = Payload.original(B_ID, b"\x22" * 8)

DELIVERED, CORRUPTED = Outcome.DELIVERED, Outcome.CORRUPTED


@pytest.fixture
def params():
    return SystemParameters()


def _opening(step, variant, params, options=ProtocolOptions()):
    """Start a cycle and let the original DATA end everywhere."""

    def node(role):
        return NodeState(role, variant, options=options)

    s, s_actions = step(node(S), CycleStart(0, A), params)
    d, d_actions = step(node(D), CycleStart(0, B), params)
    r, r_actions = step(node(R), CycleStart(0), params)

    assert not d_actions and not r_actions
    data = s_actions[0].frame

    s, _ = step(s, FrameSent(data, CORRUPTED), params)
    r, _ = step(r, FrameArrival(data, DELIVERED), params)
    d, d_actions = step(d, FrameArrival(data, CORRUPTED), params)

    return s, d, r, data, d_actions


def test_cycle_start(params):
    state = NodeState(S, ProtocolVariant.NCC_ARQ)
    s, actions = ncc_step(state, CycleStart(0, A), params)

    assert len(actions) == 1
    assert actions[0].kind == ActionKind.TRANSMIT
    assert actions[0].delay_from_now == 0.0
    assert actions[0].frame.kind == FrameKind.DATA
    assert actions[0].frame.dst == D
    assert s.phase == Phase.AWAIT_CODED
    assert A_ID in s.store

    d, actions = ncc_step(
        NodeState(D, ProtocolVariant.NCC_ARQ), CycleStart(0, B), params
    )
    assert not actions
    assert d.pending_tx[0].packet == B_ID

    r, actions = ncc_step(NodeState(R, ProtocolVariant.NCC_ARQ), CycleStart(0), params)
    assert not actions
    assert r.phase == Phase.AWAIT_CFC


def test_cycle_start_needs_the_own_packet(params):
    with pytest.raises(ProtocolViolationError):
        ncc_step(NodeState(S, ProtocolVariant.NCC_ARQ), CycleStart(0, B), params)


def test_cycle_start_while_busy_is_a_violation(params):
    s, _ = ncc_step(NodeState(S, ProtocolVariant.NCC_ARQ), CycleStart(0, A), params)

    with pytest.raises(ProtocolViolationError):
        ncc_step(s, CycleStart(1, Payload.original(PacketId(S, 1), b"x")), params)


def test_ncc_full_cycle(params):
    s, d, r, _, d_actions = _opening(ncc_step, ProtocolVariant.NCC_ARQ, params)

    cfc = d_actions[0].frame
    assert cfc.kind == FrameKind.CFC_PIGGYBACK
    assert cfc.request == A_ID
    assert cfc.carries == (B_ID,)
    assert d_actions[0].delay_from_now == params.sifs_us
    assert not d.pending_tx

    s, _ = ncc_step(s, FrameArrival(cfc, CORRUPTED), params)
    r, r_actions = ncc_step(r, FrameArrival(cfc, DELIVERED), params)

    coded = r_actions[0].frame
    assert coded.kind == FrameKind.CODED
    assert coded.is_multicast
    assert coded.payload == xor_encode(A, B)
    assert r_actions[0].delay_from_now == params.difs_us + params.t_onc_us
    assert r.phase == Phase.COOPERATING

    r, actions = ncc_step(r, FrameSent(coded, DELIVERED), params)
    assert not actions
    assert r.phase == Phase.AWAIT_ACK_D

    d, d_actions = ncc_step(d, FrameArrival(coded, DELIVERED), params)
    assert d_actions[0].kind == ActionKind.DELIVER_TO_APP
    assert d_actions[0].payload == A
    ack_d = d_actions[1].frame
    assert ack_d.kind == FrameKind.ACK and ack_d.packet == A_ID
    assert d_actions[1].delay_from_now == params.sifs_us

    s, s_actions = ncc_step(s, FrameArrival(coded, DELIVERED), params)
    assert [a.kind for a in s_actions] == [ActionKind.DELIVER_TO_APP]
    assert s_actions[0].payload == B

    d, _ = ncc_step(d, FrameSent(ack_d, DELIVERED), params)
    s, s_actions = ncc_step(s, FrameArrival(ack_d, DELIVERED), params)
    r, _ = ncc_step(r, FrameArrival(ack_d, DELIVERED), params)

    ack_s = s_actions[0].frame
    assert ack_s.packet == B_ID
    assert s_actions[0].delay_from_now == params.sifs_us
    assert r.phase == Phase.AWAIT_ACK_S

    s, _ = ncc_step(s, FrameSent(ack_s, DELIVERED), params)
    d, _ = ncc_step(d, FrameArrival(ack_s, DELIVERED), params)
    r, _ = ncc_step(r, FrameArrival(ack_s, DELIVERED), params)

    for state in (s, d, r):
        assert state.is_idle
        assert len(state.store) == 0


def test_relay_retransmits_corrupted_coded_frames(params):
    _, _, r, _, d_actions = _opening(ncc_step, ProtocolVariant.NCC_ARQ, params)
    r, r_actions = ncc_step(r, FrameArrival(d_actions[0].frame, DELIVERED), params)
    coded = r_actions[0].frame

    r, actions = ncc_step(r, FrameSent(coded, CORRUPTED), params)

    assert len(actions) == 1
    assert actions[0].delay_from_now == 0.0
    assert actions[0].frame.attempt == 2
    assert r.attempt_count == 2


def test_max_attempts_bound(params):
    options = ProtocolOptions(max_attempts=2)
    _, _, r, _, d_actions = _opening(
        ncc_step, ProtocolVariant.NCC_ARQ, params, options
    )
    r, r_actions = ncc_step(r, FrameArrival(d_actions[0].frame, DELIVERED), params)
    coded = r_actions[0].frame

    r, actions = ncc_step(r, FrameSent(coded, CORRUPTED), params)

    with pytest.raises(MaxAttemptsExceededError):
        ncc_step(r, FrameSent(actions[0].frame, CORRUPTED), params)


def test_decode_without_counterpart_is_a_violation(params):
    _, _, r, _, d_actions = _opening(ncc_step, ProtocolVariant.NCC_ARQ, params)
    _, r_actions = ncc_step(r, FrameArrival(d_actions[0].frame, DELIVERED), params)
    coded = r_actions[0].frame

    forgetful = NodeState(D, ProtocolVariant.NCC_ARQ, phase=Phase.AWAIT_CODED)

    with pytest.raises(ProtocolViolationError):
        ncc_step(forgetful, FrameArrival(coded, DELIVERED), params)


def test_relay_needs_the_requested_packet(params):
    _, d, _, _, d_actions = _opening(ncc_step, ProtocolVariant.NCC_ARQ, params)
    fresh_relay = NodeState(R, ProtocolVariant.NCC_ARQ, phase=Phase.AWAIT_CFC)

    with pytest.raises(ProtocolViolationError):
        ncc_step(fresh_relay, FrameArrival(d_actions[0].frame, DELIVERED), params)

    assert d.phase == Phase.AWAIT_CODED


def test_transitions_are_deterministic(params):
    state = NodeState(S, ProtocolVariant.NCC_ARQ)

    assert ncc_step(state, CycleStart(0, A), params) == ncc_step(
        state, CycleStart(0, A), params
    )


def test_both_legs_relay_waits_for_a_timeout(params):
    options = ProtocolOptions(await_both_acks=True)
    _, _, r, _, d_actions = _opening(
        ncc_step, ProtocolVariant.NCC_ARQ, params, options
    )
    r, r_actions = ncc_step(r, FrameArrival(d_actions[0].frame, DELIVERED), params)
    coded = r_actions[0].frame

    r, actions = ncc_step(r, FrameSent(coded, DELIVERED), params)

    assert actions[0].kind == ActionKind.SET_TIMER
    assert actions[0].tag == TimerTag(COOP_TIMEOUT, 0, 1)
    assert actions[0].delay_from_now == pytest.approx(
        3 * params.sifs_us + 2 * cycle_airtimes(params).control
    )

    r, actions = ncc_step(r, TimerExpired(actions[0].tag), params)
    assert actions[0].frame.attempt == 2

    r, actions = ncc_step(r, TimerExpired(TimerTag(COOP_TIMEOUT, 0, 1)), params)
    assert not actions


def test_source_falls_back_when_destination_stays_silent(params):
    options = ProtocolOptions(await_both_acks=True)
    s, _, r, _, d_actions = _opening(
        ncc_step, ProtocolVariant.NCC_ARQ, params, options
    )
    _, r_actions = ncc_step(r, FrameArrival(d_actions[0].frame, DELIVERED), params)
    coded = r_actions[0].frame

    s, actions = ncc_step(s, FrameArrival(coded, DELIVERED), params)

    timer = actions[1]
    assert timer.tag.name == ACK_FALLBACK
    assert timer.delay_from_now == pytest.approx(
        2 * params.sifs_us + cycle_airtimes(params).control
    )

    s, actions = ncc_step(s, TimerExpired(timer.tag), params)
    assert actions[0].frame.kind == FrameKind.ACK
    assert actions[0].frame.packet == B_ID
    assert actions[0].delay_from_now == 0.0


def test_carq_destination_sends_plain_cfc(params):
    _, d, r, _, d_actions = _opening(carq_step, ProtocolVariant.C_ARQ, params)

    cfc = d_actions[0].frame
    assert cfc.kind == FrameKind.CFC
    assert cfc.request == A_ID
    assert d.pending_tx[0].packet == B_ID

    r, r_actions = carq_step(r, FrameArrival(cfc, DELIVERED), params)
    relayed = r_actions[0].frame

    assert relayed.kind == FrameKind.DATA
    assert relayed.src == R and relayed.dst == D
    assert relayed.payload == A
    assert r_actions[0].delay_from_now == params.difs_us


def test_carq_destination_sends_its_packet_after_acking(params):
    _, d, r, _, d_actions = _opening(carq_step, ProtocolVariant.C_ARQ, params)
    _, r_actions = carq_step(r, FrameArrival(d_actions[0].frame, DELIVERED), params)
    relayed = r_actions[0].frame

    d, actions = carq_step(d, FrameArrival(relayed, DELIVERED), params)
    assert actions[0].payload == A
    ack = actions[1].frame

    d, actions = carq_step(d, FrameSent(ack, DELIVERED), params)

    assert actions[0].frame.kind == FrameKind.DATA
    assert actions[0].frame.packet == B_ID
    assert actions[0].delay_from_now == 0.0
    assert not d.pending_tx


def test_machine_for_variant():
    assert machine_for(ProtocolVariant.NCC_ARQ).variant == ProtocolVariant.NCC_ARQ
    assert machine_for(ProtocolVariant.C_ARQ).variant == ProtocolVariant.C_ARQ


def test_transmission_count():
    def record(kind, action=ActionKind.TRANSMIT, cycle=0):
        return TraceRecord(0.0, D, action, kind, 1, cycle)

    trace = [
        record(FrameKind.DATA),
        record(FrameKind.CFC_PIGGYBACK),
        record(FrameKind.CFC, cycle=1),
        record(FrameKind.CODED),
        record(None, action=ActionKind.DELIVER_TO_APP),
    ]

    assert transmission_count([]) == 0
    assert transmission_count(trace) == 4
    assert transmission_count(trace, FrameKind.CFC) == 2
    assert transmission_count(trace, FrameKind.CFC, cycle=1) == 1
    assert transmission_count(trace, [FrameKind.DATA, FrameKind.CODED]) == 2


def test_evolve_matches_replace():
    state = NodeState(S, ProtocolVariant.NCC_ARQ)
    changed = state.evolve(phase=Phase.AWAIT_CODED, current_cycle=4)

    assert changed == replace(state, phase=Phase.AWAIT_CODED, current_cycle=4)
    assert state.phase == Phase.IDLE
    assert changed.store is state.store


def test_evolve_rejects_unknown_fields():
    with pytest.raises(TypeError):
        NodeState(S, ProtocolVariant.NCC_ARQ).evolve(stage=Phase.IDLE)


def _ignored_frames(params):
    """Frames an endpoint neither receives nor needs to overhear."""

    return [
        (S, make_frame(FrameKind.CFC, D, R, params, request=A_ID)),
        (
            S,
            make_frame(
                FrameKind.CFC_PIGGYBACK, D, R, params, (B_ID,), B, request=A_ID
            ),
        ),
        (D, make_frame(FrameKind.DATA, R, S, params, (B_ID,), B)),
        (S, make_frame(FrameKind.DATA, R, D, params, (A_ID,), A)),
    ]


@pytest.mark.parametrize("variant", list(ProtocolVariant))
@pytest.mark.parametrize("outcome", [DELIVERED, CORRUPTED])
def test_arrivals_nodes_do_not_listen_to_change_nothing(params, variant, outcome):
    machine = machine_for(variant)

    for role, frame in _ignored_frames(params):
        assert not machine.listens_to(role, frame)

        state, _ = machine.step(
            NodeState(role, variant), CycleStart(0, A if role == S else B), params
        )
        after, actions = machine.step(state, FrameArrival(frame, outcome), params)

        assert after == state
        assert actions == []


@pytest.mark.parametrize("variant", list(ProtocolVariant))
def test_listeners(params, variant):
    machine = machine_for(variant)
    data = make_frame(FrameKind.DATA, S, D, params, (A_ID,), A)
    ack = make_frame(FrameKind.ACK, D, R, params, (A_ID,))

    assert machine.listens_to(D, data)
    assert machine.listens_to(R, data)
    assert machine.listens_to(R, ack)
    assert machine.listens_to(S, ack)
