"""Closed-form delay and throughput of NCC-ARQ and the C-ARQ baseline.

NCC-ARQ exchanges two packets per cycle::

    E[D]      = E[T_A] + E[T_COOP]
    E[T_COOP] = SIFS + T_CFC + T_B + DIFS + T_ONC + E[r] * T_AxB
                + SIFS + T_ACK + SIFS + T_ACK
    E[r]      = 1 / (1 - PER_RD)
    S         = 2 * E[P] / E[D]

C-ARQ needs two unidirectional cooperative cycles for the same two packets.

"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from nccarq.core.base_types import Duration, FrameKind, ProtocolVariant
from nccarq.core.frames import cycle_airtimes, piggyback_data_airtime
from nccarq.core.params import SystemParameters
from nccarq.errors import InvalidParameterError


@dataclass(frozen=True)
class CycleBreakdown:
    """Terms of one NCC-ARQ cycle, all in microseconds."""

    t_a: Duration
    t_coop: Duration
    total: Duration
    expected_retx: float


@dataclass(frozen=True)
class SweepRow:
    """Analytic comparison of both schemes at one retransmission count."""

    retx: float
    ncc_delay_us: Duration
    carq_delay_us: Duration
    ncc_throughput_bps: float
    carq_throughput_bps: float
    gain_ratio: float
    ncc_transmissions: float
    carq_transmissions: float


def _check_retx(e_r: float) -> None:
    if not e_r >= 1:
        raise InvalidParameterError(
            f"Expected transmissions E[r] must be at least 1, got {e_r!r}."
        )


def expected_retransmissions(per_rd: float) -> float:
    """Mean number of coded transmissions until the destination decodes."""

    if not 0.0 <= per_rd < 1.0:
        raise InvalidParameterError(f"PER must lie in [0, 1), got {per_rd!r}.")

    return 1.0 / (1.0 - per_rd)


def ncc_cooperation_delay(params: SystemParameters, e_r: float) -> Duration:
    """E[T_COOP]: from the corrupted original to the second ACK."""

    _check_retx(e_r)
    airtimes = cycle_airtimes(params)

    return (
        params.sifs_us
        + airtimes.control
        + piggyback_data_airtime(params)
        + params.difs_us
        + params.t_onc_us
        + e_r * airtimes.relay_data
        + params.sifs_us
        + airtimes.control
        + params.sifs_us
        + airtimes.control
    )


def ncc_cycle_delay(params: SystemParameters, e_r: float) -> CycleBreakdown:
    """E[D] of one NCC-ARQ cycle with its decomposition."""

    t_coop = ncc_cooperation_delay(params, e_r)
    t_a = cycle_airtimes(params).direct_data

    return CycleBreakdown(t_a=t_a, t_coop=t_coop, total=t_a + t_coop, expected_retx=e_r)


def ncc_throughput(params: SystemParameters, e_r: float) -> float:
    """Aggregated NCC-ARQ throughput in bits per second."""

    delay = ncc_cycle_delay(params, e_r).total
    return 2 * params.payload_bits / delay * 1e6


def carq_cycle_delay(params: SystemParameters, e_r: float) -> Duration:
    """Time C-ARQ needs to exchange one packet in each direction."""

    _check_retx(e_r)
    airtimes = cycle_airtimes(params)

    one_direction = (
        airtimes.direct_data
        + params.sifs_us
        + airtimes.control
        + params.difs_us
        + e_r * airtimes.relay_data
        + params.sifs_us
        + airtimes.control
    )

    return 2 * one_direction


def carq_throughput(params: SystemParameters, e_r: float) -> float:
    """Aggregated C-ARQ throughput in bits per second."""
    return 2 * params.payload_bits / carq_cycle_delay(params, e_r) * 1e6


def expected_frame_counts(
    variant: ProtocolVariant, e_r: float
) -> dict[FrameKind, float]:
    """Expected frames of each kind per exchanged packet pair.

    Both call-for-cooperation forms count under ``FrameKind.CFC``.
    """

    _check_retx(e_r)

    if variant == ProtocolVariant.NCC_ARQ:
        return {
            FrameKind.DATA: 1.0,
            FrameKind.CFC: 1.0,
            FrameKind.CODED: e_r,
            FrameKind.ACK: 2.0,
        }

    return {
        FrameKind.DATA: 2.0 + 2.0 * e_r,
        FrameKind.CFC: 2.0,
        FrameKind.CODED: 0.0,
        FrameKind.ACK: 2.0,
    }


def expected_transmissions(variant: ProtocolVariant, e_r: float) -> float:
    """Frames sent per exchanged packet pair.

    NCC-ARQ sends DATA, CFC, E[r] coded frames and two ACKs. C-ARQ repeats
    DATA, CFC, E[r] relayed copies and one ACK in each direction.
    """

    return sum(expected_frame_counts(variant, e_r).values())


def sweep(params: SystemParameters, retx_values: Iterable[float]) -> list[SweepRow]:
    """One comparison row per expected transmission count."""

    rows: list[SweepRow] = []

    for e_r in retx_values:
        ncc_s = ncc_throughput(params, e_r)
        carq_s = carq_throughput(params, e_r)

        rows.append(
            SweepRow(
                retx=e_r,
                ncc_delay_us=ncc_cycle_delay(params, e_r).total,
                carq_delay_us=carq_cycle_delay(params, e_r),
                ncc_throughput_bps=ncc_s,
                carq_throughput_bps=carq_s,
                gain_ratio=ncc_s / carq_s,
                ncc_transmissions=expected_transmissions(ProtocolVariant.NCC_ARQ, e_r),
                carq_transmissions=expected_transmissions(ProtocolVariant.C_ARQ, e_r),
            )
        )

    return rows
