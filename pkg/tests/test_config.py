"""
Scenario YAML: validation diagnostics, overrides, scenario resolution
"""

import math

import numpy as np
import pytest

from src.codec.expansion import check_rate_condition
from src.config.scenario_config import (
    BUILTIN_SCENARIOS,
    ScenarioConfig,
    build_scenario,
    load_builtin,
    parse_config,
    resolve_config_arg,
    serialize_config,
    with_overrides,
)
from src.errors import ConfigError

MINIMAL = """\
name: minimal
exo:
  model: van_der_pol
  W0: [[-3.0, 3.0], [-3.0, 3.0]]
channel:
  N_b: 2
  T: 0.15
  M_T: 1.2
gains:
  kappa: 3.0
  c: [4.0, 4.0]
  k: 8.0
simulation:
  t_end: 1.5
initial:
  w0: [1.0, 0.0]
  y0: 5.0
"""


def test_builtins_load():
    for name in BUILTIN_SCENARIOS:
        cfg = load_builtin(name)
        assert cfg.name == name
        assert cfg.thresholds.t_tail == 25.0
    s1, s2 = load_builtin("scenario1"), load_builtin("scenario2")
    assert (s1.channel.N_b, s1.channel.T) == (2, 0.15)
    assert (s2.channel.N_b, s2.channel.T) == (4, 0.5)


def test_resolve_config_arg_accepts_path_or_name(tmp_path):
    path = tmp_path / "minimal.yaml"
    path.write_text(MINIMAL)
    assert resolve_config_arg(str(path)).name == "minimal"
    assert resolve_config_arg("scenario2").name == "scenario2"
    with pytest.raises(ConfigError):
        resolve_config_arg(str(tmp_path / "missing.yaml"))


def test_serialize_round_trip():
    cfg = load_builtin("scenario1")
    again = parse_config(serialize_config(cfg))
    assert again.model_dump() == cfg.model_dump()


def test_unknown_key_reports_line():
    text = MINIMAL.replace("  T: 0.15\n", "  T: 0.15\n  bandwidth: 3\n")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    diagnostics = info.value.diagnostics
    assert [d[0] for d in diagnostics] == ["channel.bandwidth"]
    assert diagnostics[0][1] == 8


def test_missing_key_has_no_line():
    text = MINIMAL.replace("  T: 0.15\n", "")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert ("channel.T", None) in [(d[0], d[1]) for d in info.value.diagnostics]
    assert "missing" in str(info.value)


def test_invalid_yaml():
    with pytest.raises(ConfigError) as info:
        parse_config("exo: [unterminated\n")
    assert info.value.diagnostics[0][0] == "<document>"


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        parse_config("- 1\n- 2\n")


def test_unknown_model_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("model: van_der_pol", "model: lorenz"))
    assert info.value.diagnostics[0][0] == "exo.model"


def test_model_aliases_normalized():
    cfg = parse_config(MINIMAL.replace("model: van_der_pol", "model: vdp"))
    assert cfg.exo.model == "van_der_pol"


def test_overrides_and_aliases():
    cfg = parse_config(MINIMAL)
    updated = with_overrides(cfg, {"k": 4.0, "T": 0.3, "simulation.t_end": 3.0})
    assert updated.gains.k == 4.0
    assert updated.channel.T == 0.3
    assert updated.simulation.t_end == 3.0
    assert cfg.gains.k == 8.0


def test_setting_levels_sets_budget():
    cfg = with_overrides(parse_config(MINIMAL), {"N": 3})
    assert cfg.channel.N == 3
    assert cfg.channel.N_b == 4


def test_override_rejects_unknown_section():
    with pytest.raises(ConfigError):
        with_overrides(parse_config(MINIMAL), {"nowhere.k": 1})


def test_override_revalidates():
    with pytest.raises(ConfigError):
        with_overrides(parse_config(MINIMAL), {"k": -1.0})


def test_build_minimal_scenario():
    sc = build_scenario(parse_config(MINIMAL))
    assert sc.channel.N == 2
    assert sc.channel.L0 == 6.0
    assert sc.channel.M_T == 1.2
    assert sc.exo.W_margin == pytest.approx(math.sqrt(2) * 6.0 / 4 + 0.5)
    assert sc.gains.G.tolist() == [12.0, 36.0]
    assert np.array_equal(sc.initial.w_hat0, [0.0, 0.0])
    assert np.array_equal(sc.initial.xi0, [0.0, 0.0])
    assert sc.second_level is None


def test_dwell_estimate_picks_ell():
    text = MINIMAL + "second_level:\n  T_bar: 0.1\n  T_star_estimate: 0.7\n"
    cfg = parse_config(text)
    assert cfg.second_level.resolved_ell() == 7


def test_explicit_ell_wins():
    text = MINIMAL + "second_level:\n  T_bar: 0.15\n  ell: 2\n  T_star_estimate: 0.7\n"
    sc = build_scenario(parse_config(text))
    assert sc.second_level.ell == 2
    assert sc.second_level.period == pytest.approx(0.3)


def test_mu_range_draw_is_seeded():
    text = MINIMAL.replace("model: van_der_pol", "model: harmonic").replace(
        "  t_end: 1.5\n", "  t_end: 1.5\nplant:\n  model: lag\n  mu_range: [0.2, 0.8]\n"
    )
    text += "internal_model:\n  support_box: [[-4.0, 4.0], [-4.0, 4.0]]\n  support_growth: 0.25\n"
    text = text.replace("  y0: 5.0\n", "  y0: 5.0\n  z0: [0.0]\n")
    cfg = parse_config(text)
    first = build_scenario(cfg, seed=3).plant.mu[0]
    second = build_scenario(cfg, seed=3).plant.mu[0]
    assert first == second
    assert 0.2 <= first <= 0.8


def test_mu_range_needs_uncertain_plant():
    text = MINIMAL + "plant:\n  model: integrator\n  mu_range: [0.2, 0.8]\n"
    with pytest.raises(ConfigError):
        parse_config(text)


def test_gain_length_must_match_order():
    cfg = parse_config(MINIMAL.replace("c: [4.0, 4.0]", "c: [6.0, 11.0, 6.0]"))
    with pytest.raises(ConfigError) as info:
        build_scenario(cfg)
    key, line, _ = info.value.diagnostics[0]
    assert key == "gains.c"
    assert line == 11


def test_non_hurwitz_gains_are_config_errors():
    cfg = parse_config(MINIMAL.replace("c: [4.0, 4.0]", "c: [0.0, 1.0]"))
    with pytest.raises(ConfigError) as info:
        build_scenario(cfg)
    assert info.value.diagnostics[0][0] == "gains.c"


def test_point_box_needs_explicit_zoom():
    cfg = parse_config(MINIMAL.replace("W0: [[-3.0, 3.0], [-3.0, 3.0]]", "W0: [[1.0, 1.0], [0.0, 0.0]]"))
    with pytest.raises(ConfigError):
        build_scenario(cfg)


def test_defaults_fill_optional_sections():
    cfg = ScenarioConfig.model_validate(parse_config(MINIMAL).model_dump())
    assert cfg.expansion.n_pairs == 2000
    assert cfg.internal_model.support_box == "auto"
    assert cfg.output.trajectory == "trajectory.csv"
    assert cfg.simulation.h == 0.001


@pytest.mark.parametrize("seed", [0, 1, 5, 13])
def test_scenario1_channel_contracts_for_any_seed(seed):
    channel = build_scenario(load_builtin("scenario1"), seed=seed).channel
    assert channel.M_T <= math.exp(1.5 * 0.15) + 1e-9
    assert check_rate_condition(channel.N, channel.r, channel.M_T)
    assert channel.zoom_ratio < 1.0
