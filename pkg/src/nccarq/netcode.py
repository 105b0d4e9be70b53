"""XOR network coding and the promiscuous store of overheard packets.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from nccarq.core.base_types import PacketId
from nccarq.errors import (
    InvalidParameterError,
    LengthMismatchError,
    NotDecodableError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Payload:
    """Application data: an original packet (one id) or an XOR of two (two ids)."""

    data: bytes
    ids: frozenset[PacketId]

    @property
    def id(self) -> PacketId:
        """The identifier of an original, uncoded payload."""

        if len(self.ids) != 1:
            raise ValueError("A coded payload has no single identifier.")

        return next(iter(self.ids))

    @property
    def is_coded(self) -> bool:
        """True if the payload is the XOR of two packets."""
        return len(self.ids) == 2

    def __len__(self) -> int:
        return len(self.data)

    @classmethod
    def original(cls, packet_id: PacketId, data: bytes) -> Payload:
        """Wrap the bytes of an uncoded packet."""
        return cls(bytes(data), frozenset((packet_id,)))

    @classmethod
    def random(
        cls, packet_id: PacketId, length: int, rng: np.random.Generator
    ) -> Payload:
        """Draw ``length`` uniformly random bytes for a fresh packet."""
        return cls(rng.bytes(length), frozenset((packet_id,)))


def _xor_bytes(a: bytes, b: bytes) -> bytes:
    return np.bitwise_xor(
        np.frombuffer(a, dtype=np.uint8), np.frombuffer(b, dtype=np.uint8)
    ).tobytes()


def xor_encode(a: Payload, b: Payload) -> Payload:
    """Combine two original payloads into one coded payload."""

    if len(a) != len(b):
        raise LengthMismatchError(
            f"Cannot XOR payloads of {len(a)} and {len(b)} bytes."
        )

    if a.ids & b.ids:
        raise InvalidParameterError(
            f"Cannot code packet {sorted(str(i) for i in a.ids & b.ids)} with "
            "itself; identifiers must differ."
        )

    return Payload(_xor_bytes(a.data, b.data), a.ids | b.ids)


def xor_decode(coded: Payload, known: Payload) -> Payload:
    """Recover the unknown half of a coded payload using the known half."""

    if not coded.is_coded or not known.ids <= coded.ids:
        raise NotDecodableError(
            f"Payload {sorted(str(i) for i in known.ids)} is not part of coded "
            f"payload {sorted(str(i) for i in coded.ids)}."
        )

    if len(coded) != len(known):
        raise LengthMismatchError(
            f"Cannot decode a {len(coded)}-byte payload with {len(known)} bytes."
        )

    return Payload(_xor_bytes(coded.data, known.data), coded.ids - known.ids)


class OverheardStore:
    """Copies of overheard and own packets kept until their ACK is observed.

    Stores are immutable: ``store`` and ``release`` return a new instance so
    they can sit inside pure protocol state. With a capacity the oldest entry
    is evicted first.
    """

    __slots__ = ("_entries", "_capacity", "_missed_releases")

    _entries: dict[PacketId, Payload]
    _capacity: Optional[int]
    _missed_releases: int

    def __init__(
        self,
        entries: Optional[Iterable[Payload]] = None,
        capacity: Optional[int] = None,
        missed_releases: int = 0,
    ) -> None:
        if capacity is not None and capacity <= 0:
            raise ValueError(f"Store capacity must be positive, got {capacity}.")

        self._capacity = capacity
        self._missed_releases = missed_releases
        self._entries = {}

        for payload in entries if entries else []:
            self._insert(payload)

    def _insert(self, payload: Payload) -> None:
        self._entries.pop(payload.id, None)
        self._entries[payload.id] = payload

        while self._capacity is not None and len(self._entries) > self._capacity:
            evicted = next(iter(self._entries))
            del self._entries[evicted]
            logger.debug("Evicted %s from a full store.", evicted)

    @property
    def capacity(self) -> Optional[int]:
        """Maximum number of entries, or None if unbounded."""
        return self._capacity

    @property
    def missed_releases(self) -> int:
        """How many releases named an id that was not stored."""
        return self._missed_releases

    def _copy(self, missed_releases: int) -> OverheardStore:
        clone = OverheardStore.__new__(OverheardStore)
        clone._entries = dict(self._entries)
        clone._capacity = self._capacity
        clone._missed_releases = missed_releases
        return clone

    def store(self, payload: Payload) -> OverheardStore:
        """Return a store that also holds ``payload``."""

        result = self._copy(self._missed_releases)
        result._insert(payload)
        return result

    def release(self, packet_id: PacketId) -> OverheardStore:
        """Return a store without ``packet_id``.

        Releasing an absent id is a no-op that bumps ``missed_releases``.
        """

        if packet_id not in self._entries:
            logger.warning("Release of %s, which is not stored.", packet_id)
            return self._copy(self._missed_releases + 1)

        result = self._copy(self._missed_releases)
        del result._entries[packet_id]
        return result

    def lookup(self, packet_id: PacketId) -> Optional[Payload]:
        """The payload stored under ``packet_id``, or None."""
        return self._entries.get(packet_id)

    def __contains__(self, packet_id: object) -> bool:
        return packet_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[PacketId]:
        return iter(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OverheardStore):
            return NotImplemented

        return (
            self._entries == other._entries
            and self._capacity == other._capacity
            and self._missed_releases == other._missed_releases
        )

    def __hash__(self) -> int:
        return hash(tuple(self._entries))

    def __repr__(self) -> str:
        return f"OverheardStore({[str(k) for k in self._entries]})"
