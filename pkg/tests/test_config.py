# pylint: disable=C0116,W0621

"""Test the scenario config format.

"""

import pytest

from nccarq.config import (
    DEFAULT_RETX,
    ModeChoice,
    OutputFormat,
    ScenarioConfig,
    VariantChoice,
    config_keys,
    dump_config,
    load_config,
    parse_config,
    parse_int_list,
    parse_value,
    scalar_from_token,
    with_overrides,
)
from nccarq.core import ProtocolVariant, SystemParameters
from nccarq.errors import ConfigurationError


def test_defaults():
    config = load_config()

    assert config.params == SystemParameters()
    assert config.retx_list == DEFAULT_RETX
    assert config.per_rd_list is None
    assert config.cycles == 10_000
    assert config.variant == VariantChoice.BOTH
    assert config.mode == ModeChoice.BOTH
    assert not config.stochastic


def test_scalar_tokens():
    assert scalar_from_token("12") == 12
    assert scalar_from_token("1.5e-3") == pytest.approx(0.0015)
    assert scalar_from_token("TRUE") is True
    assert scalar_from_token("ncc_arq") == "ncc_arq"


def test_value_lists_and_ranges():
    assert parse_value("1..5") == [1, 2, 3, 4, 5]
    assert parse_value("1, 3..4, 0.5") == [1, 3, 4, 0.5]

    with pytest.raises(ValueError):
        parse_value("5..1")

    with pytest.raises(ValueError):
        parse_value("1,,2")


def test_override_a_single_parameter():
    config = parse_config("data_payload_bytes = 500\n")

    assert config.params.data_payload_bytes == 500
    assert config.params.sifs_us == 10.0
    assert config.retx_list == DEFAULT_RETX


def test_full_file(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(
        "# stochastic sweep\n"
        "\n"
        "variant = ncc-arq   # only the coded scheme\n"
        "mode = sim\n"
        "per_rd_list = 0.1, 0.5\n"
        "cycles = 2000\n"
        "seed = 42\n"
        "format = json\n"
        "both_legs = true\n"
        "piggyback_shared_preamble = true\n"
        "out = results/run 1.json\n",
        encoding="utf-8",
    )

    config = load_config(path)

    assert config.variant.variants == (ProtocolVariant.NCC_ARQ,)
    assert config.mode == ModeChoice.SIM
    assert config.per_rd_list == (0.1, 0.5)
    assert config.retx_list is None
    assert config.stochastic
    assert config.cycles == 2000
    assert config.seed == 42
    assert config.output_format == OutputFormat.JSON
    assert config.both_legs
    assert config.options.await_both_acks
    assert config.params.piggyback_shared_preamble
    assert config.out == "results/run 1.json"


def test_out_of_range_per_is_rejected():
    with pytest.raises(ConfigurationError) as info:
        parse_config("sifs_us = 10\nper_rd = 1.2\n")

    assert info.value.key == "per_rd"
    assert info.value.line == 2
    assert "line 2" in str(info.value)


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("\npayload = 3\n", "payload", 2),
        ("cycles = 1.5\n", "cycles", 1),
        ("variant = tcp\n", "variant", 1),
        ("both_legs = 1\n", "both_legs", 1),
        ("seed = 1\nseed = 2\n", "seed", 2),
        ("retx_list = 0..3\n", "retx_list", 1),
        ("cycles =\n", "cycles", 1),
    ],
)
def test_invalid_entries_name_key_and_line(text, key, line):
    with pytest.raises(ConfigurationError) as info:
        parse_config(text)

    assert info.value.key == key
    assert info.value.line == line


def test_line_without_separator():
    with pytest.raises(ConfigurationError) as info:
        parse_config("cycles 10\n")

    assert info.value.line == 1


def test_both_sweeps_are_rejected():
    with pytest.raises(ConfigurationError):
        parse_config("retx_list = 1..3\nper_rd_list = 0.5\n")

    with pytest.raises(ConfigurationError):
        ScenarioConfig(retx_list=None)


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/scenario.cfg")


def test_dump_round_trip():
    config = ScenarioConfig(
        params=SystemParameters(sifs_us=9.0, relay_data_rate_bps=48e6, t_onc_us=0.1),
        variant=VariantChoice.C_ARQ,
        per_rd_list=(0.1, 0.25),
        retx_list=None,
        cycles=123,
        seed=9,
        out="table.csv",
        coop_timeout_us=300.5,
    )

    assert parse_config(dump_config(config)) == config
    assert parse_config(dump_config(ScenarioConfig())) == ScenarioConfig()


def test_dump_lists_every_key_in_use():
    text = dump_config(ScenarioConfig())
    keys = {line.split(" = ")[0] for line in text.splitlines()[1:]}

    assert keys <= set(config_keys())
    assert "retx_list" in keys and "per_rd_list" not in keys


def test_overrides_switch_sweeps():
    config = with_overrides(ScenarioConfig(), per_rd_list=(0.5,), seed=None)

    assert config.stochastic
    assert config.retx_list is None
    assert config.seed == 0

    back = with_overrides(config, retx_list=(2, 3))
    assert back.retx_list == (2, 3)
    assert back.per_rd_list is None


def test_parse_int_list_rejects_fractions():
    assert parse_int_list("2..4", "--retx") == (2, 3, 4)

    with pytest.raises(ConfigurationError):
        parse_int_list("1.5", "--retx")
