"""Discrete-event engine driving the node state machines over virtual time.

The engine owns the clock, the event queue and the shared medium. Nodes only
see the events the engine hands them and answer with actions; the engine turns
those actions into scheduled frame ends, timers and application deliveries.

"""

from __future__ import annotations

import json
import logging
import math
import pathlib
from collections import Counter
from dataclasses import replace
from enum import Enum, auto
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np
import simpy
from scipy.stats import norm

from nccarq.channel import LinkErrorModel
from nccarq.core.base_types import (
    Duration,
    FrameKind,
    NodeRole,
    PacketId,
    ProtocolVariant,
)
from nccarq.core.frames import Frame, frame_duration
from nccarq.core.params import SystemParameters, validate_parameters
from nccarq.errors import (
    InvalidParameterError,
    ProtocolViolationError,
    SimulationAbort,
    UndefinedMetricError,
)
from nccarq.netcode import Payload
from nccarq.protocol.base_types import (
    Action,
    ActionKind,
    CycleStart,
    FrameArrival,
    FrameSent,
    NodeState,
    ProtocolEvent,
    ProtocolOptions,
    TimerExpired,
    TimerTag,
    TraceRecord,
)
from nccarq.protocol.machines import machine_for

logger = logging.getLogger(__name__)

_TIME_EPSILON = 1e-9


class EventKind(Enum):
    """What happens when a queued event comes due."""

    FRAME_END = auto()
    TIMER = auto()
    CYCLE_START = auto()


class Event(NamedTuple):
    """An entry of the event queue.

    ``seq`` grows with every scheduled event; events due at the same time run
    in ``seq`` order.
    """

    time: Duration
    kind: EventKind
    payload: Union[Frame, TimerTag, int]
    seq: int
    node: Optional[NodeRole] = None


class RunStats:
    """Measurements accumulated over one run."""

    __slots__ = (
        "cycles_completed",
        "delivered_payload_bits",
        "deliveries",
        "per_cycle_delay",
        "tx_counts",
        "sim_time",
    )

    cycles_completed: int
    delivered_payload_bits: int
    deliveries: int
    per_cycle_delay: list[Duration]
    tx_counts: Counter[FrameKind]
    sim_time: Duration

    def __init__(self) -> None:
        self.cycles_completed = 0
        self.delivered_payload_bits = 0
        self.deliveries = 0
        self.per_cycle_delay = []
        self.tx_counts = Counter()
        self.sim_time = 0.0

    def mean_attempts(self, kind: FrameKind) -> float:
        """Mean number of ``kind`` transmissions per completed cycle.

        Both CFC forms count towards FrameKind.CFC.
        """

        if self.cycles_completed == 0:
            raise UndefinedMetricError("No cycle has completed yet.")

        if kind == FrameKind.CFC:
            total = sum(n for k, n in self.tx_counts.items() if k.is_cfc)
        else:
            total = self.tx_counts[kind]

        return total / self.cycles_completed

    def __repr__(self) -> str:
        return (
            f"RunStats(cycles_completed={self.cycles_completed}, "
            f"delivered_payload_bits={self.delivered_payload_bits}, "
            f"sim_time={self.sim_time!r})"
        )


def seed_streams(
    seed: int,
) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent seed sequences for the channel and for payload contents."""

    channel_seq, payload_seq = np.random.SeedSequence(seed).spawn(2)
    return channel_seq, payload_seq


class Simulator:
    """Executes one run of a protocol variant on the S-R-D topology.

    A simulator is used for a single run and is not thread safe; separate runs
    share nothing and may execute in parallel.
    """

    __slots__ = (
        "_params",
        "_variant",
        "_machine",
        "_channel",
        "_airtimes",
        "_env",
        "_states",
        "_payload_rng",
        "_trace",
        "_stats",
        "_seq",
        "_channel_free_at",
        "_cycle",
        "_cycle_start",
        "_in_cycle",
        "_cycles",
        "_injected",
        "_delivered",
        "_done",
    )

    _params: SystemParameters
    _variant: ProtocolVariant
    _channel: LinkErrorModel
    _airtimes: dict[tuple[FrameKind, bool], Duration]
    _env: simpy.Environment
    _states: dict[NodeRole, NodeState]
    _payload_rng: np.random.Generator
    _trace: list[TraceRecord]
    _stats: RunStats
    _seq: int
    _channel_free_at: Duration
    _cycle: int
    _cycle_start: Duration
    _in_cycle: bool
    _cycles: int
    _injected: dict[PacketId, Payload]
    _delivered: set[PacketId]
    _done: simpy.Event

    def __init__(
        self,
        params: SystemParameters,
        variant: ProtocolVariant,
        channel: LinkErrorModel,
        options: Optional[ProtocolOptions] = None,
        seed: int = 0,
    ) -> None:
        validation = validate_parameters(params)
        if not validation:
            raise InvalidParameterError("; ".join(validation.violations))

        options = options if options is not None else ProtocolOptions()
        if channel.both_legs and not options.await_both_acks:
            options = replace(options, await_both_acks=True)

        self._params = params
        self._variant = variant
        self._machine = machine_for(variant)
        self._channel = channel
        self._airtimes = {}
        self._env = simpy.Environment()
        self._states = {
            role: NodeState(role, variant, options=options) for role in NodeRole
        }
        self._payload_rng = np.random.default_rng(seed_streams(seed)[1])
        self._trace = []
        self._stats = RunStats()
        self._seq = 0
        self._channel_free_at = 0.0
        self._cycle = -1
        self._cycle_start = 0.0
        self._in_cycle = False
        self._cycles = 0
        self._injected = {}
        self._delivered = set()
        self._done = self._env.event()

    @property
    def now(self) -> Duration:
        """Current virtual time in microseconds."""
        return float(self._env.now)

    @property
    def trace(self) -> list[TraceRecord]:
        """Every action taken so far."""
        return self._trace

    @property
    def stats(self) -> RunStats:
        """Measurements so far."""
        return self._stats

    def state_of(self, role: NodeRole) -> NodeState:
        """The current state of one node."""
        return self._states[role]

    def run(self, cycles: int) -> tuple[RunStats, list[TraceRecord]]:
        """Execute ``cycles`` complete exchanges and return stats and trace."""

        if cycles < 1:
            raise InvalidParameterError(f"cycles must be at least 1, got {cycles!r}.")

        if self._cycles:
            raise RuntimeError("A Simulator executes a single run.")

        self._cycles = cycles
        logger.info(
            "Running %d %s cycles (%s channel).",
            cycles,
            self._variant.name,
            self._channel.mode.name.lower(),
        )

        self._schedule(0.0, EventKind.CYCLE_START, 0)

        try:
            self._env.run(until=self._done)
        except SimulationAbort as err:
            err.trace = list(self._trace)
            logger.warning(
                "Run aborted at %.3f us in cycle %d: %s", self.now, self._cycle, err
            )
            raise
        except RuntimeError as err:
            if self._done.triggered:
                raise
            raise ProtocolViolationError(
                f"Run stalled at {self.now:.3f} us in cycle {self._cycle}: no event "
                "is pending but some node is still busy.",
                self._trace,
            ) from err

        logger.info(
            "Finished %d cycles in %.3f us.",
            self._stats.cycles_completed,
            self._stats.sim_time,
        )

        return self._stats, self._trace

    def _schedule(
        self,
        delay: Duration,
        kind: EventKind,
        payload: Union[Frame, TimerTag, int],
        node: Optional[NodeRole] = None,
    ) -> None:
        self._seq += 1
        event = Event(self._env.now + delay, kind, payload, self._seq, node)
        timeout = self._env.timeout(delay, value=event)
        timeout.callbacks.append(self._handle)

    def _handle(self, timeout: simpy.Event) -> None:
        event: Event = timeout.value

        if event.kind == EventKind.CYCLE_START:
            assert isinstance(event.payload, int)
            self._start_cycle(event.payload)

        elif event.kind == EventKind.FRAME_END:
            assert isinstance(event.payload, Frame) and event.node is not None
            self._frame_end(event.payload, event.node)
            self._complete_cycle_if_idle()

        else:
            assert isinstance(event.payload, TimerTag) and event.node is not None
            self._step(event.node, TimerExpired(event.payload), event.payload.attempt)
            self._complete_cycle_if_idle()

    def _start_cycle(self, cycle: int) -> None:
        self._channel.reset_cycle()
        self._cycle = cycle
        self._cycle_start = self.now
        self._in_cycle = True
        self._injected = {}
        self._delivered = set()

        for role in NodeRole:
            payload = None

            if role.is_endpoint:
                payload = Payload.random(
                    PacketId(role, cycle),
                    self._params.data_payload_bytes,
                    self._payload_rng,
                )
                self._injected[payload.id] = payload

            self._step(role, CycleStart(cycle, payload), 0)

    def _frame_end(self, frame: Frame, sender: NodeRole) -> None:
        listeners = [
            role
            for role in NodeRole
            if role != sender and self._machine.listens_to(role, frame)
        ]

        outcomes = {
            role: self._channel.deliver_outcome(
                sender, role, frame.kind, frame.attempt, frame.addressed_to(role)
            )
            for role in listeners
        }

        addressee = NodeRole.DESTINATION if frame.is_multicast else frame.dst
        assert addressee in outcomes

        self._step(sender, FrameSent(frame, outcomes[addressee]), frame.attempt)

        for role in listeners:
            self._step(role, FrameArrival(frame, outcomes[role]), frame.attempt)

    def _complete_cycle_if_idle(self) -> None:
        if not self._in_cycle or not all(s.is_idle for s in self._states.values()):
            return

        for packet in self._injected:
            if packet not in self._delivered:
                raise ProtocolViolationError(
                    f"Cycle {self._cycle} ended without delivering {packet}."
                )

        delay = self.now - self._cycle_start
        self._in_cycle = False
        self._stats.cycles_completed += 1
        self._stats.per_cycle_delay.append(delay)
        self._stats.sim_time = self.now

        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("Cycle %d done after %.4f us.", self._cycle, delay)

        if self._stats.cycles_completed >= self._cycles:
            self._done.succeed()
        else:
            self._schedule(0.0, EventKind.CYCLE_START, self._cycle + 1)

    def _step(self, role: NodeRole, event: ProtocolEvent, attempt: int) -> None:
        current = self._states[role]
        state, actions = self._machine.step(current, event, self._params)

        if state is not current:
            self._states[role] = state

        if actions:
            self._apply(role, actions, attempt)

    def _apply(self, role: NodeRole, actions: list[Action], attempt: int) -> None:
        for action in actions:
            if action.kind == ActionKind.TRANSMIT:
                assert action.frame is not None
                self._transmit(role, action)

            elif action.kind == ActionKind.SET_TIMER:
                assert action.tag is not None
                self._schedule(
                    action.delay_from_now, EventKind.TIMER, action.tag, role
                )
                self._record(
                    self.now + action.delay_from_now,
                    role,
                    action,
                    action.tag.attempt,
                    action.tag.cycle,
                )

            else:
                assert action.payload is not None
                self._deliver(role, action.payload)
                self._record(
                    self.now,
                    role,
                    action,
                    attempt,
                    self._cycle,
                    tuple(action.payload.ids),
                )

    def _airtime(self, frame: Frame) -> Duration:
        key = (frame.kind, frame.src == NodeRole.RELAY)
        duration = self._airtimes.get(key)

        if duration is None:
            duration = self._airtimes[key] = frame_duration(frame, self._params)

        return duration

    def _transmit(self, role: NodeRole, action: Action) -> None:
        frame = action.frame
        assert frame is not None

        if frame.src != role:
            raise ProtocolViolationError(
                f"{role.name} tried to send a frame from {frame.src.name}."
            )

        start = self.now + action.delay_from_now

        if start < self._channel_free_at - _TIME_EPSILON:
            raise ProtocolViolationError(
                f"{role.name} starts {frame.kind.name} at {start:.3f} us while the "
                f"medium is busy until {self._channel_free_at:.3f} us."
            )

        duration = self._airtime(frame)
        self._channel_free_at = start + duration
        self._stats.tx_counts[frame.kind] += 1

        self._schedule(
            action.delay_from_now + duration, EventKind.FRAME_END, frame, role
        )
        self._record(start, role, action, frame.attempt, frame.cycle, frame.carries)

    def _deliver(self, role: NodeRole, payload: Payload) -> None:
        packet = payload.id
        injected = self._injected.get(packet)

        if injected is None or packet.origin == role:
            raise ProtocolViolationError(
                f"{role.name} delivered {packet}, which is not addressed to it in "
                f"cycle {self._cycle}."
            )

        if packet in self._delivered:
            raise ProtocolViolationError(f"{packet} was delivered twice.")

        if payload.data != injected.data:
            raise ProtocolViolationError(
                f"{role.name} delivered {packet} with corrupted contents."
            )

        self._delivered.add(packet)
        self._stats.deliveries += 1
        self._stats.delivered_payload_bits += 8 * len(payload)

    def _record(
        self,
        time_us: Duration,
        role: NodeRole,
        action: Action,
        attempt: int,
        cycle: int,
        packets: tuple[PacketId, ...] = (),
    ) -> None:
        self._trace.append(
            TraceRecord(
                time_us=time_us,
                node=role,
                action=action.kind,
                frame_kind=action.frame.kind if action.frame is not None else None,
                attempt=attempt,
                cycle=cycle,
                packets=packets,
                note=action.note,
            )
        )


def run(
    params: SystemParameters,
    variant: ProtocolVariant,
    channel: LinkErrorModel,
    cycles: int,
    options: Optional[ProtocolOptions] = None,
    seed: int = 0,
) -> tuple[RunStats, list[TraceRecord]]:
    """Simulate ``cycles`` exchanges and return the stats and the event trace."""

    return Simulator(params, variant, channel, options, seed).run(cycles)


def throughput(stats: RunStats) -> float:
    """Delivered payload bits per second of virtual time."""

    if not stats.sim_time > 0:
        raise UndefinedMetricError("Throughput is undefined for zero elapsed time.")

    return stats.delivered_payload_bits / stats.sim_time * 1e6


def mean_delay(stats: RunStats) -> Duration:
    """Mean duration of a cycle in microseconds."""

    if stats.cycles_completed < 1:
        raise UndefinedMetricError("Mean delay needs at least one completed cycle.")

    return float(np.mean(stats.per_cycle_delay))


def confidence_halfwidth(stats: RunStats, level: float = 0.95) -> Duration:
    """Half-width of the normal-approximation confidence interval of mean_delay."""

    if not 0.0 < level < 1.0:
        raise InvalidParameterError(
            f"Confidence level must lie in (0, 1), got {level!r}."
        )

    if stats.cycles_completed < 2:
        raise UndefinedMetricError(
            "A confidence interval needs at least two completed cycles, got "
            f"{stats.cycles_completed}."
        )

    samples = np.asarray(stats.per_cycle_delay, dtype=float)
    z = norm.ppf(0.5 + level / 2)

    return float(z * samples.std(ddof=1) / math.sqrt(len(samples)))


def export_trace(trace: Iterable[TraceRecord], path: Union[str, pathlib.Path]) -> int:
    """Write one JSON object per trace record and return the number written."""

    count = 0

    with open(path, "w", encoding="utf-8") as stream:
        for record in trace:
            entry = {
                "time_us": record.time_us,
                "node": record.node.name,
                "action": record.action.name,
                "frame_kind": record.frame_kind.name if record.frame_kind else None,
                "attempt": record.attempt,
                "cycle": record.cycle,
                "packets": [[p.origin.name, p.seq] for p in record.packets],
                "note": record.note,
            }
            stream.write(json.dumps(entry) + "\n")
            count += 1

    return count


def load_trace(path: Union[str, pathlib.Path]) -> list[TraceRecord]:
    """Read a trace written by export_trace."""

    trace: list[TraceRecord] = []

    with open(path, "r", encoding="utf-8") as stream:
        for line in stream:
            if not line.strip():
                continue

            entry = json.loads(line)
            frame_kind = entry["frame_kind"]

            trace.append(
                TraceRecord(
                    time_us=float(entry["time_us"]),
                    node=NodeRole[entry["node"]],
                    action=ActionKind[entry["action"]],
                    frame_kind=FrameKind[frame_kind] if frame_kind else None,
                    attempt=int(entry["attempt"]),
                    cycle=int(entry["cycle"]),
                    packets=tuple(
                        PacketId(NodeRole[origin], int(seq))
                        for origin, seq in entry["packets"]
                    ),
                    note=entry["note"],
                )
            )

    return trace
