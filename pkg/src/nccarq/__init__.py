"""NCC-ARQ

A closed-form model and a discrete-event simulator of network coding-based
cooperative ARQ on a three-node IEEE 802.11 topology. A relay that overhears a
failed packet XOR-combines it with the packet travelling in the opposite
direction and multicasts the result, so one cooperation phase serves both
endpoints. Plain cooperative ARQ, which relays each direction separately, is
modeled alongside as the baseline.

"""

from nccarq.analytic import (
    carq_cycle_delay,
    carq_throughput,
    ncc_cycle_delay,
    ncc_throughput,
    sweep,
)
from nccarq.channel import ChannelMode, LinkErrorModel
from nccarq.core import NodeRole, ProtocolVariant, SystemParameters
from nccarq.engine import RunStats, Simulator, run

MAJOR_VERSION = 0
MINOR_VERSION = 1
PATCH_VERSION = 0
__version__ = f"{MAJOR_VERSION}.{MINOR_VERSION}.{PATCH_VERSION}"

__all__ = [
    "carq_cycle_delay",
    "carq_throughput",
    "ncc_cycle_delay",
    "ncc_throughput",
    "sweep",
    "ChannelMode",
    "LinkErrorModel",
    "NodeRole",
    "ProtocolVariant",
    "SystemParameters",
    "RunStats",
    "Simulator",
    "run",
]
