from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from config import (
    DEFAULT_CONFIG,
    build_run_config,
    dump_config,
    get_effective_config,
    load_config,
    parse_keyvalue,
    save_config,
)
from errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / "lab.conf"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_without_a_file() -> None:
    config = load_config()
    assert config["_path"] is None
    assert config["_lines"] == {}
    for key, value in DEFAULT_CONFIG.items():
        assert config[key] == value
    assert config["potential"] is not DEFAULT_CONFIG["potential"]


def test_parse_keyvalue_skips_comments() -> None:
    text = "# header\n\nm = 16   # first power\n  degree=32\n"
    assert parse_keyvalue(text) == [(3, "m", "16"), (4, "degree", "32")]
    with pytest.raises(ConfigError) as info:
        parse_keyvalue("m 16\n", "lab.conf")
    assert str(info.value).startswith("lab.conf:1: ")


def test_load_config_reads_lists_and_scalars(tmp_path) -> None:
    path = _write(tmp_path, "\n".join([
        "potential = 2 0.1",
        "potential = 3 -0.01",
        "m = 16",
        "m = 32",
        "lift = sl",
        "inject = 1 2 0.1",
        "check_character = no",
        "tol_a1 = 0.05",
    ]) + "\n")
    config = load_config(path)
    assert config["potential"] == [(2, 0.1), (3, -0.01)]
    assert config["m"] == [16, 32]
    assert config["lift"] == ["sl"]
    assert config["inject"] == [(1, 2, 0.1)]
    assert config["check_character"] is False
    assert config["tol_a1"] == 0.05
    assert config["_lines"]["m"] == 3


@pytest.mark.parametrize("text, line, field", [
    ("m = 16\ncolour = red\n", 2, "colour"),
    ("degree = 32\ndegree = 48\n", 2, "degree"),
    ("seed = 0\nsteps = two\n", 2, "steps"),
    ("potential = 2\n", 1, "potential"),
])
def test_load_config_errors_name_line_and_field(tmp_path, text, line, field) -> None:
    path = _write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line == line
    assert info.value.field == field
    assert f":{line}: field '{field}'" in str(info.value)


def test_missing_file_is_a_config_error(tmp_path) -> None:
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf")


def test_overrides_replace_file_values(tmp_path) -> None:
    file_config = load_config(_write(tmp_path, "steps = 3\nseed = 7\n"))
    effective = get_effective_config(file_config, {"steps": 1, "seed": None})
    assert effective["steps"] == 1
    assert effective["seed"] == 7
    assert "steps" not in effective["_lines"]
    assert file_config["steps"] == 3
    with pytest.raises(ConfigError):
        get_effective_config(file_config, {"colour": "red"})


def test_build_run_config_resolves_defaults(tmp_path) -> None:
    effective = get_effective_config(load_config(), {"out": str(tmp_path)})
    cfg = build_run_config(effective, default_m=(2, 8, 32))
    assert cfg.m_list == (2, 8, 32)
    assert cfg.db_path == tmp_path / "runs.db"
    assert cfg.tol("tol_exact") == 1e-10
    assert cfg.grid().node_count == 320
    assert cfg.echo()["nodes_resolved"] == 320

    effective["db_path"] = "none"
    assert build_run_config(effective, default_m=(2,)).db_path is None


def test_build_run_config_rejects_unordered_powers(tmp_path) -> None:
    path = _write(tmp_path, "m = 32\nm = 16\n")
    with pytest.raises(ConfigError) as info:
        build_run_config(load_config(path))
    assert "strictly increasing" in str(info.value)
    assert info.value.line == 1


def test_build_run_config_rejects_inadmissible_potential() -> None:
    effective = get_effective_config(load_config(), {"potential": [(2, 0.3)]})
    with pytest.raises(ConfigError) as info:
        build_run_config(effective, default_m=(8,))
    assert "Kähler cone" in str(info.value)


@pytest.mark.parametrize("key, value", [
    ("workers", 0),
    ("fit_order", 4),
    ("tol_slope", 0.0),
    ("d0_scale", 0.0),
    ("lift", ["half"]),
])
def test_build_run_config_rejects_bad_scalars(key, value) -> None:
    effective = get_effective_config(load_config(), {key: value})
    with pytest.raises(ConfigError) as info:
        build_run_config(effective, default_m=(8,))
    assert info.value.field == key


def test_lift_for_expands_per_power() -> None:
    base = load_config()
    cfg = build_run_config(base, default_m=(4, 8, 16))
    assert cfg.lift_for().is_sl(cfg.m_list)

    single = build_run_config(get_effective_config(base, {"lift": ["0"]}), default_m=(4, 8, 16))
    assert single.lift_for().constant_at(8) == 0

    per_power = build_run_config(get_effective_config(base, {"lift": ["1/2", "1/2", "0"]}), default_m=(4, 8, 16))
    assert per_power.lift_for().constant_at(16) == Fraction(0)
    with pytest.raises(ConfigError):
        per_power.lift_for((4, 8))


def test_injections_group_by_order() -> None:
    effective = get_effective_config(load_config(), {"inject": [(1, 2, 0.1), (2, 3, 0.05), (1, 4, 0.01)]})
    cfg = build_run_config(effective, default_m=(16,))
    orders = cfg.injections()
    assert [order for order, _ in orders] == [1, 2]
    assert orders[0][1].pairs() == [(2, 0.1), (4, 0.01)]


def test_saved_config_loads_back(tmp_path) -> None:
    effective = get_effective_config(load_config(), {
        "potential": [(2, 0.1)], "m": [16, 32], "inject": [(1, 2, 0.1)], "tol_a1": 0.03, "check_character": False,
    })
    path = Path(tmp_path) / "saved.conf"
    save_config(effective, path)
    loaded = load_config(path)
    for key in DEFAULT_CONFIG:
        assert loaded[key] == effective[key], key
    assert dump_config(loaded) == path.read_text(encoding="utf-8")
