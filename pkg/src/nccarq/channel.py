"""Per-link error model deciding the outcome of every frame reception.

"""

from __future__ import annotations

import logging
from enum import Enum, auto
from itertools import permutations
from typing import Mapping, Optional, Union

import numpy as np

from nccarq.core.base_types import FrameKind, NodeRole, Outcome
from nccarq.core.params import SystemParameters
from nccarq.errors import ConfigurationError

logger = logging.getLogger(__name__)

Link = tuple[NodeRole, NodeRole]

LINKS: tuple[Link, ...] = tuple(permutations(NodeRole, 2))
"""Every directed link of the three-node topology."""

_LINK_SET = frozenset(LINKS)


class ChannelMode(Enum):
    """How relayed frames fail."""

    DETERMINISTIC = auto()
    STOCHASTIC = auto()


class LinkErrorModel:
    """Decides whether a frame reaches a receiver intact.

    Only frames relayed by the relay are subject to the mode. Original data on
    the direct source/destination link always fails, data sent to the relay and
    control frames always succeed.

    In deterministic mode the first ``scripted_failures[link]`` relayed frames
    on a link fail in every cycle. In stochastic mode each relayed frame fails
    with probability ``per[link]`` drawn from a seeded PCG64 stream.
    """

    __slots__ = (
        "_mode",
        "_per",
        "_scripted_failures",
        "_seed_sequence",
        "_rng",
        "_both_legs",
        "_attempts",
    )

    _mode: ChannelMode
    _per: dict[Link, float]
    _scripted_failures: dict[Link, int]
    _seed_sequence: np.random.SeedSequence
    _rng: np.random.Generator
    _both_legs: bool
    _attempts: dict[Link, int]

    def __init__(
        self,
        mode: ChannelMode,
        per: Optional[Mapping[Link, float]] = None,
        scripted_failures: Optional[Mapping[Link, int]] = None,
        seed: Union[int, np.random.SeedSequence] = 0,
        both_legs: bool = False,
    ) -> None:
        self._mode = mode
        self._per = {link: 0.0 for link in LINKS}
        self._scripted_failures = {link: 0 for link in LINKS}
        self._seed_sequence = (
            seed
            if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(seed)
        )
        self._rng = np.random.default_rng(self._seed_sequence)
        self._both_legs = both_legs
        self._attempts = {}

        for link, value in (per or {}).items():
            self._check_link(link)
            if not 0.0 <= value < 1.0:
                raise ConfigurationError(
                    f"PER of link {_link_name(link)} must lie in [0, 1), got {value!r}."
                )
            self._per[link] = float(value)

        for link, count in (scripted_failures or {}).items():
            self._check_link(link)
            if count < 0:
                raise ConfigurationError(
                    f"Scripted failures of link {_link_name(link)} must be "
                    f"non-negative, got {count!r}."
                )
            self._scripted_failures[link] = int(count)

    @classmethod
    def deterministic(
        cls, retransmissions: int, both_legs: bool = False
    ) -> LinkErrorModel:
        """Every relayed frame needs exactly ``retransmissions`` attempts."""

        if retransmissions < 1:
            raise ConfigurationError(
                f"At least one transmission is required, got {retransmissions!r}."
            )

        failures = retransmissions - 1
        return cls(
            ChannelMode.DETERMINISTIC,
            scripted_failures={
                (NodeRole.RELAY, NodeRole.DESTINATION): failures,
                (NodeRole.RELAY, NodeRole.SOURCE): failures,
            },
            both_legs=both_legs,
        )

    @classmethod
    def from_parameters(
        cls,
        params: SystemParameters,
        seed: Union[int, np.random.SeedSequence] = 0,
        both_legs: bool = False,
    ) -> LinkErrorModel:
        """A stochastic model using the PER values of ``params``.

        The direct link is symmetric; links towards the relay are error free.
        """

        return cls(
            ChannelMode.STOCHASTIC,
            per={
                (NodeRole.SOURCE, NodeRole.DESTINATION): params.per_sd,
                (NodeRole.DESTINATION, NodeRole.SOURCE): params.per_sd,
                (NodeRole.RELAY, NodeRole.DESTINATION): params.per_rd,
                (NodeRole.RELAY, NodeRole.SOURCE): params.per_rs,
            },
            seed=seed,
            both_legs=both_legs,
        )

    @property
    def mode(self) -> ChannelMode:
        """Deterministic or stochastic."""
        return self._mode

    @property
    def both_legs(self) -> bool:
        """Whether the relay-to-source leg of a coded multicast can fail."""
        return self._both_legs

    @property
    def seed_sequence(self) -> np.random.SeedSequence:
        """Seed sequence of the stochastic stream, spawn key included.

        Streams spawned from one parent share its entropy and differ only in
        ``spawn_key``.
        """
        return self._seed_sequence

    @property
    def per(self) -> dict[Link, float]:
        """Packet error rate of every directed link."""
        return dict(self._per)

    @property
    def scripted_failures(self) -> dict[Link, int]:
        """Initial failures per cycle of every directed link."""
        return dict(self._scripted_failures)

    @staticmethod
    def _check_link(link: Link) -> None:
        if link not in _LINK_SET:
            raise ConfigurationError(f"Unknown link {link!r}.")

    def deliver_outcome(
        self,
        src: NodeRole,
        dst: NodeRole,
        frame_kind: FrameKind,
        attempt_index: int = 1,
        addressed: bool = True,
    ) -> Outcome:
        """Outcome of one reception of a ``frame_kind`` frame on ``src -> dst``.

        ``addressed`` is False when ``dst`` merely overhears the frame.
        """

        link = (src, dst)
        self._check_link(link)

        if not frame_kind.carries_data:
            return Outcome.DELIVERED

        if src.is_endpoint and dst.is_endpoint:
            return Outcome.CORRUPTED

        if src.is_endpoint or not addressed:
            return Outcome.DELIVERED

        if (
            frame_kind == FrameKind.CODED
            and dst == NodeRole.SOURCE
            and not self._both_legs
        ):
            return Outcome.DELIVERED

        if self._mode == ChannelMode.DETERMINISTIC:
            attempt = self._attempts.get(link, 0) + 1
            self._attempts[link] = attempt
            failed = attempt <= self._scripted_failures[link]
        else:
            failed = bool(self._rng.random() < self._per[link])

        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                "%s on %s, attempt %d: %s",
                frame_kind.name,
                _link_name(link),
                attempt_index,
                "corrupted" if failed else "delivered",
            )

        return Outcome.CORRUPTED if failed else Outcome.DELIVERED

    def reset_cycle(self) -> LinkErrorModel:
        """Start a new cooperation cycle.

        Scripted failures replay from the beginning; the random stream is left
        where it is.
        """

        self._attempts.clear()
        return self


def _link_name(link: Link) -> str:
    return f"{link[0].short_name}->{link[1].short_name}"
