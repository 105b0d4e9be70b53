"""System parameters and their validation.

Defaults reproduce the IEEE 802.11g configuration used throughout: 34-byte MAC
header, 96 us PHY header, 1500-byte payloads, 14-byte control frames, SIFS 10 us,
DIFS 50 us, 6 Mb/s on every endpoint rate and 54 Mb/s for relay data.

"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Optional

from nccarq.core.base_types import Duration


@dataclass(frozen=True)
class SystemParameters:
    """Timing, size, rate and channel constants of a scenario."""

    mac_header_bytes: int = 34
    phy_header_us: Duration = 96.0
    data_payload_bytes: int = 1500
    ctrl_packet_bytes: int = 14
    sifs_us: Duration = 10.0
    difs_us: Duration = 50.0
    source_control_rate_bps: float = 6e6
    source_data_rate_bps: float = 6e6
    relay_control_rate_bps: float = 6e6
    relay_data_rate_bps: float = 54e6
    t_onc_us: Duration = 0.0
    per_sd: float = 0.0
    per_rd: float = 0.0
    per_rs: float = 0.0
    piggyback_shared_preamble: bool = False

    @property
    def payload_bits(self) -> int:
        """E[P], the payload of one data packet in bits."""
        return 8 * self.data_payload_bytes

    @property
    def data_frame_bytes(self) -> int:
        """Size of a DATA or CODED frame: MAC header plus payload."""
        return self.mac_header_bytes + self.data_payload_bytes


class ValidationResult:
    """Returned by validate_parameters, listing every violated invariant."""

    __slots__ = ("_violations",)

    _violations: list[str]

    def __init__(self, violations: Optional[list[str]] = None) -> None:
        self._violations = violations if violations else []

    @property
    def success(self) -> bool:
        """Did every invariant hold."""
        return len(self._violations) == 0

    @property
    def violations(self) -> list[str]:
        """Human-readable descriptions of the violated invariants."""
        return self._violations

    def __bool__(self) -> bool:
        return self.success

    def __iter__(self) -> Iterator[str]:
        return iter(self._violations)


_BYTE_FIELDS = ("mac_header_bytes", "data_payload_bytes", "ctrl_packet_bytes")
_RATE_FIELDS = (
    "source_control_rate_bps",
    "source_data_rate_bps",
    "relay_control_rate_bps",
    "relay_data_rate_bps",
)
_DURATION_FIELDS = ("phy_header_us", "sifs_us", "difs_us", "t_onc_us")
_PER_FIELDS = ("per_sd", "per_rd", "per_rs")


def validate_parameters(params: SystemParameters) -> ValidationResult:
    """Check every SystemParameters invariant and collect the violations."""

    violations: list[str] = []

    for name in _BYTE_FIELDS:
        value = getattr(params, name)
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            violations.append(f"{name} must be a positive integer, got {value!r}")

    for name in _RATE_FIELDS:
        value = getattr(params, name)
        if not value > 0:
            violations.append(f"{name} must be positive, got {value!r}")

    for name in _DURATION_FIELDS:
        value = getattr(params, name)
        if not value >= 0:
            violations.append(f"{name} must be non-negative, got {value!r}")

    if not params.sifs_us < params.difs_us:
        violations.append(
            f"sifs_us ({params.sifs_us!r}) must be shorter than "
            f"difs_us ({params.difs_us!r})"
        )

    for name in _PER_FIELDS:
        value = getattr(params, name)
        if not 0.0 <= value < 1.0:
            violations.append(f"{name} must lie in [0, 1), got {value!r}")

    return ValidationResult(violations)


def parameter_names() -> list[str]:
    """Names of every SystemParameters field, in declaration order."""
    return [f.name for f in fields(SystemParameters)]
