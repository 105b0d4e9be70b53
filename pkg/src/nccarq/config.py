"""Scenario configuration: a flat ``key = value`` text format.

One entry per line, ``#`` starts a comment and blank lines are ignored::

    # default 802.11a settings with a larger payload
    data_payload_bytes = 2000
    variant = ncc_arq
    retx_list = 1..5
    per_rd_list = 0.1, 0.3, 0.5
    both_legs = false

Values are integers, floats, ``true``/``false``, bare words, comma separated
lists or inclusive integer ranges ``A..B``. Keys not given keep their defaults.

"""

from __future__ import annotations

import pathlib
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Callable, Optional, Union

from nccarq.core.base_types import ProtocolVariant
from nccarq.core.params import SystemParameters, parameter_names, validate_parameters
from nccarq.errors import ConfigurationError
from nccarq.protocol.base_types import ProtocolOptions

DEFAULT_RETX: tuple[int, ...] = (1, 2, 3, 4, 5)

Scalar = Union[int, float, bool, str]


class VariantChoice(Enum):
    """Which protocol variants a scenario covers."""

    NCC_ARQ = "ncc_arq"
    C_ARQ = "c_arq"
    BOTH = "both"

    @property
    def variants(self) -> tuple[ProtocolVariant, ...]:
        """The protocol variants selected."""

        if self == VariantChoice.NCC_ARQ:
            return (ProtocolVariant.NCC_ARQ,)

        if self == VariantChoice.C_ARQ:
            return (ProtocolVariant.C_ARQ,)

        return (ProtocolVariant.NCC_ARQ, ProtocolVariant.C_ARQ)


class ModeChoice(Enum):
    """Whether to evaluate the closed form, the simulator or both."""

    ANALYTIC = "analytic"
    SIM = "sim"
    BOTH = "both"

    @property
    def analytic(self) -> bool:
        """True if closed-form rows are produced."""
        return self != ModeChoice.SIM

    @property
    def sim(self) -> bool:
        """True if simulated rows are produced."""
        return self != ModeChoice.ANALYTIC


class OutputFormat(Enum):
    """Table output format."""

    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one invocation of the comparison needs.

    Exactly one of ``retx_list`` (deterministic sweep over retransmission
    counts) and ``per_rd_list`` (stochastic sweep over relay PER) is set.
    """

    params: SystemParameters = field(default_factory=SystemParameters)
    variant: VariantChoice = VariantChoice.BOTH
    mode: ModeChoice = ModeChoice.BOTH
    retx_list: Optional[tuple[int, ...]] = DEFAULT_RETX
    per_rd_list: Optional[tuple[float, ...]] = None
    cycles: int = 10_000
    seed: int = 0
    output_format: OutputFormat = OutputFormat.CSV
    out: Optional[str] = None
    both_legs: bool = False
    max_attempts: int = 100
    coop_timeout_us: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.retx_list is None) == (self.per_rd_list is None):
            raise ConfigurationError(
                "Exactly one of retx_list and per_rd_list must be given."
            )

        if self.retx_list is not None:
            if not self.retx_list or any(r < 1 for r in self.retx_list):
                raise ConfigurationError(
                    f"retx_list needs values of at least 1, got {self.retx_list!r}.",
                    key="retx_list",
                )

        if self.per_rd_list is not None:
            if not self.per_rd_list or any(
                not 0.0 <= p < 1.0 for p in self.per_rd_list
            ):
                raise ConfigurationError(
                    f"per_rd_list needs values in [0, 1), got {self.per_rd_list!r}.",
                    key="per_rd_list",
                )

        if self.cycles < 1:
            raise ConfigurationError(
                f"cycles must be at least 1, got {self.cycles!r}.", key="cycles"
            )

        if self.seed < 0:
            raise ConfigurationError(
                f"seed must be non-negative, got {self.seed!r}.", key="seed"
            )

        if self.max_attempts < 1:
            raise ConfigurationError(
                f"max_attempts must be at least 1, got {self.max_attempts!r}.",
                key="max_attempts",
            )

        if self.coop_timeout_us is not None and not self.coop_timeout_us > 0:
            raise ConfigurationError(
                f"coop_timeout_us must be positive, got {self.coop_timeout_us!r}.",
                key="coop_timeout_us",
            )

        validation = validate_parameters(self.params)
        if not validation:
            raise ConfigurationError("; ".join(validation.violations))

    @property
    def stochastic(self) -> bool:
        """True for a sweep over relay PER values."""
        return self.per_rd_list is not None

    @property
    def sweep_points(self) -> tuple[float, ...]:
        """The retransmission counts or PER values swept over."""

        if self.per_rd_list is not None:
            return self.per_rd_list

        assert self.retx_list is not None
        return tuple(float(r) for r in self.retx_list)

    @property
    def options(self) -> ProtocolOptions:
        """Protocol options of every simulated node."""

        return ProtocolOptions(
            max_attempts=self.max_attempts,
            await_both_acks=self.both_legs,
            coop_timeout_us=self.coop_timeout_us,
        )


def _try_parse_int(token: str) -> Optional[int]:
    try:
        return int(token)
    except ValueError:
        return None


def _try_parse_float(token: str) -> Optional[float]:
    try:
        return float(token)
    except ValueError:
        return None


def scalar_from_token(token: str) -> Scalar:
    """Type a single value token: int, then float, then bool, then bare word."""

    if isinstance(value := _try_parse_int(token), int):
        return value

    if isinstance(value := _try_parse_float(token), float):
        return value

    if token.lower() in ("true", "false"):
        return token.lower() == "true"

    return token


def parse_value(text: str) -> list[Scalar]:
    """Break a value into its comma separated items, expanding ``A..B`` ranges."""

    items: list[Scalar] = []
    current_token = ""

    for char in text + ",":
        if char == ",":
            token = current_token.strip()

            if not token:
                raise ValueError(f"Empty item in value {text!r}.")

            items.extend(_expand(token))
            current_token = ""
        else:
            current_token += char

    return items


def _expand(token: str) -> list[Scalar]:
    if ".." not in token:
        return [scalar_from_token(token)]

    low_text, _, high_text = token.partition("..")
    low, high = _try_parse_int(low_text.strip()), _try_parse_int(high_text.strip())

    if low is None or high is None or low > high:
        raise ValueError(f"Invalid integer range {token!r}.")

    return list(range(low, high + 1))


def _single(items: list[Scalar], key: str) -> Scalar:
    if len(items) != 1:
        raise ValueError(f"{key} takes a single value, got {len(items)}.")
    return items[0]


def _to_int(items: list[Scalar], key: str) -> int:
    value = _single(items, key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{key} must be an integer, got {value!r}.")
    return value


def _to_float(items: list[Scalar], key: str) -> float:
    value = _single(items, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{key} must be a number, got {value!r}.")
    return float(value)


def _to_bool(items: list[Scalar], key: str) -> bool:
    value = _single(items, key)
    if not isinstance(value, bool):
        raise ValueError(f"{key} must be true or false, got {value!r}.")
    return value


def _to_int_list(items: list[Scalar], key: str) -> tuple[int, ...]:
    return tuple(_to_int([item], key) for item in items)


def _to_float_list(items: list[Scalar], key: str) -> tuple[float, ...]:
    return tuple(_to_float([item], key) for item in items)


def parse_int_list(text: str, key: str) -> tuple[int, ...]:
    """Integers of a list or range value such as ``1..5`` or ``1, 3``."""

    try:
        return _to_int_list(parse_value(text), key)
    except ValueError as err:
        raise ConfigurationError(str(err), key=key) from err


def parse_float_list(text: str, key: str) -> tuple[float, ...]:
    """Numbers of a list value such as ``0.1, 0.5``."""

    try:
        return _to_float_list(parse_value(text), key)
    except ValueError as err:
        raise ConfigurationError(str(err), key=key) from err


def _to_enum(enum_type: type[Enum]) -> Callable[[list[Scalar], str], Any]:
    def convert(items: list[Scalar], key: str) -> Any:
        value = str(_single(items, key)).lower().replace("-", "_")
        try:
            return enum_type(value)
        except ValueError:
            choices = ", ".join(str(member.value) for member in enum_type)
            raise ValueError(
                f"{key} must be one of {choices}, got {value!r}."
            ) from None

    return convert


def _param_converter(name: str) -> Callable[[list[Scalar], str], Any]:
    default = getattr(SystemParameters(), name)

    if isinstance(default, bool):
        return _to_bool

    if isinstance(default, int):
        return _to_int

    return _to_float


_SCENARIO_KEYS: dict[str, tuple[str, Callable[[list[Scalar], str], Any]]] = {
    "variant": ("variant", _to_enum(VariantChoice)),
    "mode": ("mode", _to_enum(ModeChoice)),
    "retx_list": ("retx_list", _to_int_list),
    "per_rd_list": ("per_rd_list", _to_float_list),
    "cycles": ("cycles", _to_int),
    "seed": ("seed", _to_int),
    "format": ("output_format", _to_enum(OutputFormat)),
    "both_legs": ("both_legs", _to_bool),
    "max_attempts": ("max_attempts", _to_int),
    "coop_timeout_us": ("coop_timeout_us", _to_float),
}
"""Config key -> (ScenarioConfig field, converter). ``out`` is read verbatim."""


def config_keys() -> list[str]:
    """Every key the config format accepts."""
    return [*parameter_names(), *_SCENARIO_KEYS, "out"]


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    """Build a ScenarioConfig from the text of a config file."""

    param_values: dict[str, Any] = {}
    scenario_values: dict[str, Any] = {}
    seen: dict[str, int] = {}

    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()

        if not line:
            continue

        key, sep, value_text = line.partition("=")
        key, value_text = key.strip(), value_text.strip()

        if not sep or not key:
            raise ConfigurationError(
                f"expected 'key = value' in {source}, got {raw_line.strip()!r}",
                line=line_number,
            )

        if key in seen:
            raise ConfigurationError(
                f"key {key!r} repeats line {seen[key]}", key=key, line=line_number
            )
        seen[key] = line_number

        if not value_text:
            raise ConfigurationError(
                f"missing value for {key!r}", key=key, line=line_number
            )

        try:
            if key == "out":
                scenario_values["out"] = value_text
            elif key in _SCENARIO_KEYS:
                name, convert = _SCENARIO_KEYS[key]
                scenario_values[name] = convert(parse_value(value_text), key)
            elif key in parameter_names():
                convert = _param_converter(key)
                param_values[key] = convert(parse_value(value_text), key)
            else:
                raise ConfigurationError(
                    f"unknown key {key!r}", key=key, line=line_number
                )
        except ValueError as err:
            if isinstance(err, ConfigurationError):
                raise
            raise ConfigurationError(str(err), key=key, line=line_number) from err

    if "per_rd_list" in scenario_values and "retx_list" not in scenario_values:
        scenario_values["retx_list"] = None

    params = SystemParameters(**param_values)
    validation = validate_parameters(params)

    if not validation:
        message = validation.violations[0]
        key = message.split(" ", 1)[0]
        raise ConfigurationError(message, key=key, line=seen.get(key))

    try:
        return ScenarioConfig(params=params, **scenario_values)
    except ConfigurationError as err:
        if err.key is not None and err.key in seen:
            raise ConfigurationError(
                str(err), key=err.key, line=seen[err.key]
            ) from err
        raise


def load_config(
    path: Optional[Union[str, pathlib.Path]] = None,
) -> ScenarioConfig:
    """Read a config file, or return the defaults when ``path`` is None."""

    if path is None:
        return ScenarioConfig()

    try:
        text = pathlib.Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigurationError(f"cannot read config file {str(path)!r}: {err}")

    return parse_config(text, source=str(path))


def _format_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"

    if isinstance(value, Enum):
        return str(value.value)

    return repr(value) if isinstance(value, float) else str(value)


def dump_config(config: ScenarioConfig) -> str:
    """Render ``config`` in the config format; parse_config reads it back equal."""

    lines = ["# nccarq scenario"]

    for param in fields(SystemParameters):
        value = getattr(config.params, param.name)
        lines.append(f"{param.name} = {_format_scalar(value)}")

    for key, (name, _) in _SCENARIO_KEYS.items():
        value = getattr(config, name)

        if value is None:
            continue

        if isinstance(value, tuple):
            text = ", ".join(_format_scalar(v) for v in value)
        else:
            text = _format_scalar(value)

        lines.append(f"{key} = {text}")

    if config.out is not None:
        lines.append(f"out = {config.out}")

    return "\n".join(lines) + "\n"


def with_overrides(config: ScenarioConfig, **changes: Any) -> ScenarioConfig:
    """Copy of ``config`` with the non-None entries of ``changes`` applied.

    Setting one sweep list clears the other.
    """

    changes = {k: v for k, v in changes.items() if v is not None}

    if "per_rd_list" in changes:
        changes.setdefault("retx_list", None)
    elif "retx_list" in changes:
        changes["per_rd_list"] = None

    return replace(config, **changes)
