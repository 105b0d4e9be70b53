# pylint: disable=C0116,W0621

"""Test the discrete-event engine against the closed form and the protocol rules.

"""

import time
from collections import defaultdict

import pytest

from nccarq.analytic import carq_cycle_delay, ncc_cycle_delay, ncc_throughput
from nccarq.channel import LinkErrorModel
from nccarq.core import FrameKind, NodeRole, ProtocolVariant, SystemParameters
from nccarq.engine import (
    RunStats,
    Simulator,
    confidence_halfwidth,
    export_trace,
    load_trace,
    mean_delay,
    run,
    throughput,
)
from nccarq.errors import (
    InvalidParameterError,
    MaxAttemptsExceededError,
    ProtocolViolationError,
    UndefinedMetricError,
)
from nccarq.protocol import ActionKind, ProtocolOptions, records_of, transmission_count

NCC, CARQ = ProtocolVariant.NCC_ARQ, ProtocolVariant.C_ARQ
S, D, R = NodeRole.SOURCE, NodeRole.DESTINATION, NodeRole.RELAY


@pytest.fixture
def params():
    return SystemParameters()


def _deterministic(params, variant, retx, cycles=20, **kwargs):
    return run(params, variant, LinkErrorModel.deterministic(retx), cycles, **kwargs)


def test_error_free_relay_cycle(params):
    stats, trace = _deterministic(params, NCC, 1, cycles=1)

    kinds = [r.frame_kind for r in records_of(trace, ActionKind.TRANSMIT)]
    assert kinds == [
        FrameKind.DATA,
        FrameKind.CFC_PIGGYBACK,
        FrameKind.CODED,
        FrameKind.ACK,
        FrameKind.ACK,
    ]
    assert stats.per_cycle_delay[0] == pytest.approx(3211.852, abs=1e-3)


def test_five_coded_attempts(params):
    _, trace = _deterministic(params, NCC, 5, cycles=1)

    assert transmission_count(trace, FrameKind.CODED) == 5
    assert transmission_count(trace) == 9


@pytest.mark.parametrize("retx", range(1, 11))
def test_simulation_matches_closed_form(params, retx):
    ncc_stats, _ = _deterministic(params, NCC, retx, cycles=1000)
    carq_stats, _ = _deterministic(params, CARQ, retx, cycles=1000)

    ncc_delay = ncc_cycle_delay(params, retx).total
    carq_delay = carq_cycle_delay(params, retx)

    assert mean_delay(ncc_stats) == pytest.approx(ncc_delay, rel=1e-9)
    assert mean_delay(carq_stats) == pytest.approx(carq_delay, rel=1e-9)
    assert throughput(ncc_stats) == pytest.approx(
        ncc_throughput(params, retx), rel=1e-9
    )
    assert throughput(carq_stats) == pytest.approx(
        2 * params.payload_bits / carq_delay * 1e6, rel=1e-9
    )


def test_headline_numbers(params):
    ncc_stats, _ = _deterministic(params, NCC, 1, cycles=1000)
    carq_stats, _ = _deterministic(params, CARQ, 1, cycles=1000)
    slow_stats, _ = _deterministic(params, NCC, 5, cycles=100)

    assert mean_delay(ncc_stats) == pytest.approx(3211.852, abs=1e-3)
    assert throughput(ncc_stats) == pytest.approx(7.4723e6, rel=1e-4)
    assert mean_delay(carq_stats) == pytest.approx(5527.852, abs=1e-3)
    assert throughput(slow_stats) == pytest.approx(5.3276e6, rel=1e-4)


def test_shared_preamble_matches_closed_form():
    params = SystemParameters(piggyback_shared_preamble=True, t_onc_us=12.5)
    stats, _ = _deterministic(params, NCC, 3, cycles=50)

    assert mean_delay(stats) == pytest.approx(
        ncc_cycle_delay(params, 3).total, rel=1e-9
    )


@pytest.mark.parametrize("retx", [1, 2, 3, 4, 5])
def test_transmission_counts_per_cycle(params, retx):
    cycles = 10
    _, ncc_trace = _deterministic(params, NCC, retx, cycles=cycles)
    _, carq_trace = _deterministic(params, CARQ, retx, cycles=cycles)

    for cycle in range(cycles):
        assert transmission_count(ncc_trace, FrameKind.DATA, cycle) == 1
        assert transmission_count(ncc_trace, FrameKind.CFC, cycle) == 1
        assert transmission_count(ncc_trace, FrameKind.CODED, cycle) == retx
        assert transmission_count(ncc_trace, FrameKind.ACK, cycle) == 2
        assert transmission_count(ncc_trace, cycle=cycle) == 4 + retx

        assert transmission_count(carq_trace, FrameKind.CFC, cycle) == 2
        assert transmission_count(carq_trace, cycle=cycle) == 6 + 2 * retx


def test_carq_error_free_exchange_has_eight_transmissions(params):
    _, trace = _deterministic(params, CARQ, 1, cycles=1)

    kinds = [r.frame_kind for r in records_of(trace, ActionKind.TRANSMIT)]
    assert kinds == [FrameKind.DATA, FrameKind.CFC, FrameKind.DATA, FrameKind.ACK] * 2


def test_destination_acknowledges_before_source(params):
    _, trace = _deterministic(params, NCC, 3, cycles=50)
    acks = defaultdict(list)

    for record in records_of(trace, ActionKind.TRANSMIT):
        if record.frame_kind == FrameKind.ACK:
            acks[record.cycle].append(record)

    assert len(acks) == 50
    for first, second in acks.values():
        assert first.node == D and second.node == S
        assert first.time_us < second.time_us


def test_packet_conservation(params):
    stats, trace = run(
        params,
        NCC,
        LinkErrorModel.from_parameters(SystemParameters(per_rd=0.4), seed=3),
        200,
        seed=3,
    )

    deliveries = records_of(trace, ActionKind.DELIVER_TO_APP)
    delivered = [(r.node, r.packets[0]) for r in deliveries]

    assert stats.deliveries == 2 * 200
    assert len(set(delivered)) == len(delivered)
    assert all(packet.origin == node.peer() for node, packet in delivered)
    assert stats.delivered_payload_bits == 2 * 200 * params.payload_bits


def test_sim_time_is_the_sum_of_cycle_delays(params):
    stats, _ = _deterministic(params, CARQ, 2, cycles=100)

    assert stats.sim_time == pytest.approx(sum(stats.per_cycle_delay), rel=1e-9)
    assert stats.cycles_completed == 100


def test_runs_are_reproducible():
    params = SystemParameters(per_rd=0.5, per_rs=0.5)

    def once():
        channel = LinkErrorModel.from_parameters(params, seed=11)
        return run(params, CARQ, channel, 300, seed=11)

    first_stats, first_trace = once()
    second_stats, second_trace = once()

    assert first_trace == second_trace
    assert first_stats.per_cycle_delay == second_stats.per_cycle_delay


def test_stochastic_convergence():
    params = SystemParameters(per_rd=0.5)
    channel = LinkErrorModel.from_parameters(params, seed=2024)

    started = time.perf_counter()
    stats, _ = run(params, NCC, channel, 100_000, seed=2024)
    elapsed = time.perf_counter() - started
    delay = mean_delay(stats)

    assert elapsed < 10.0

    assert delay == pytest.approx(3535.111, rel=0.01)
    assert stats.mean_attempts(FrameKind.CODED) == pytest.approx(2.0, rel=0.01)
    assert confidence_halfwidth(stats, 0.95) < 0.01 * delay


def test_deterministic_runs_have_no_spread(params):
    stats, _ = _deterministic(params, NCC, 2, cycles=30)

    assert confidence_halfwidth(stats) == pytest.approx(0.0, abs=1e-6)


def test_both_legs_delivers_every_packet_once():
    params = SystemParameters(per_rd=0.3, per_rs=0.3)
    channel = LinkErrorModel.from_parameters(params, seed=8, both_legs=True)

    stats, trace = run(params, NCC, channel, 500, seed=8)

    assert stats.cycles_completed == 500
    assert stats.deliveries == 1000
    assert transmission_count(trace, FrameKind.CODED) >= 500
    assert mean_delay(stats) > ncc_cycle_delay(params, 1).total


def test_max_attempts_abort_carries_the_trace(params):
    channel = LinkErrorModel.deterministic(5)

    with pytest.raises(MaxAttemptsExceededError) as info:
        run(params, NCC, channel, 3, options=ProtocolOptions(max_attempts=3))

    assert info.value.trace
    assert info.value.trace[-1].frame_kind == FrameKind.CODED


def test_short_cooperation_timeout_is_caught(params):
    channel = LinkErrorModel.deterministic(2, both_legs=True)
    options = ProtocolOptions(coop_timeout_us=20.0)

    with pytest.raises(ProtocolViolationError):
        run(params, NCC, channel, 1, options=options)


def test_metrics_need_samples():
    empty = RunStats()

    with pytest.raises(UndefinedMetricError):
        throughput(empty)

    with pytest.raises(UndefinedMetricError):
        mean_delay(empty)

    with pytest.raises(UndefinedMetricError):
        empty.mean_attempts(FrameKind.CODED)

    empty.sim_time = 10.0
    assert throughput(empty) == 0.0


def test_single_cycle_has_a_mean_but_no_interval(params):
    stats, _ = _deterministic(params, NCC, 1, cycles=1)

    assert mean_delay(stats) == pytest.approx(3211.852, abs=1e-3)

    with pytest.raises(UndefinedMetricError):
        confidence_halfwidth(stats)


def test_invalid_run_arguments(params):
    with pytest.raises(InvalidParameterError):
        _deterministic(params, NCC, 1, cycles=0)

    with pytest.raises(InvalidParameterError):
        Simulator(SystemParameters(sifs_us=60.0), NCC, LinkErrorModel.deterministic(1))


def test_trace_export_round_trip(params, tmp_path):
    _, trace = _deterministic(params, NCC, 2, cycles=3)
    path = tmp_path / "trace.jsonl"

    assert export_trace(trace, path) == len(trace)
    assert load_trace(path) == trace


@pytest.mark.parametrize("variant", [NCC, CARQ])
def test_every_node_ends_idle(params, variant):
    simulator = Simulator(params, variant, LinkErrorModel.deterministic(3))
    simulator.run(4)

    for role in NodeRole:
        state = simulator.state_of(role)
        assert state.role == role
        assert state.is_idle
        assert state.current_cycle == 3

    assert len(simulator.state_of(S).store) == 0
    assert len(simulator.state_of(R).store) == 0
