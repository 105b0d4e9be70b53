"""Queries over recorded protocol traces.

"""

from __future__ import annotations

from typing import Iterable, Optional, Union

from nccarq.core.base_types import FrameKind
from nccarq.protocol.base_types import ActionKind, TraceRecord


def transmission_count(
    trace: Iterable[TraceRecord],
    kind_filter: Optional[Union[FrameKind, Iterable[FrameKind]]] = None,
    cycle: Optional[int] = None,
) -> int:
    """Count the transmissions in ``trace``, optionally of some frame kinds.

    Filtering on CFC also counts CFCs with a piggybacked packet.
    """

    if kind_filter is None:
        kinds = set(FrameKind)
    elif isinstance(kind_filter, FrameKind):
        kinds = {kind_filter}
    else:
        kinds = set(kind_filter)

    if FrameKind.CFC in kinds:
        kinds.add(FrameKind.CFC_PIGGYBACK)

    return sum(
        1
        for record in trace
        if record.action == ActionKind.TRANSMIT
        and record.frame_kind in kinds
        and (cycle is None or record.cycle == cycle)
    )


def records_of(
    trace: Iterable[TraceRecord], action: ActionKind, cycle: Optional[int] = None
) -> list[TraceRecord]:
    """Records of one action kind, optionally restricted to one cycle."""

    return [
        record
        for record in trace
        if record.action == action and (cycle is None or record.cycle == cycle)
    ]
