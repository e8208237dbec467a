import json

import pytest

from seedbank.config import ConfigError, parse_config

MINIMAL = """
[measure]
kind = "discrete"
atoms = [[1.0, 1.0]]
"""


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.section("sim")["dt"] == 1e-3 and cfg.section("sim")["reps"] == 1
    assert cfg.section("init") == {"x": 0.5, "y": 0.5}
    assert cfg.section("wf")["reps"] == 1 and cfg.section("wf")["t_max"] == 1.0
    assert cfg.seed == 0
    assert cfg.discretized().rates.tolist() == [1.0]


def test_negative_mass_is_named():
    with pytest.raises(ConfigError) as info:
        parse_config('[measure]\nkind = "discrete"\natoms = [[1.0, -1.0]]\n')
    assert any("measure.atoms[0].mass" in e for e in info.value.errors)


def test_y_length_must_match_atoms():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "[init]\nx = 0.5\ny = [0.1, 0.2]\n")
    assert any("init.y" in e for e in info.value.errors)


def test_every_violation_is_reported():
    text = MINIMAL + "[sim]\ndt = -1\nreps = 0\nseed = -3\nbogus = 1\n[duality]\ntarget = 'maybe'\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    joined = " | ".join(info.value.errors)
    for field in ("sim.dt", "sim.reps", "sim.seed", "sim.bogus", "duality.target"):
        assert field in joined
    assert len(info.value.errors) >= 5


def test_parse_error_has_line_number():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "[sim\n")
    assert info.value.line == 5
    with pytest.raises(ConfigError) as info:
        parse_config('{"measure": \n  {"kind": }}')
    assert info.value.line == 2


def test_gamma_measure_needs_binning_for_simulation():
    cfg = parse_config('[measure]\nkind = "gamma"\ngamma = {shape = 2.0, scale = 1.0, mass = 2.0}\n')
    with pytest.raises(ConfigError):
        cfg.discretized()
    cfg = parse_config('[measure]\nkind = "gamma"\ngamma = {shape = 2.0, scale = 1.0, mass = 2.0}\n'
                       'bins = 8\ncutoff = 4.0\n')
    assert len(cfg.discretized()) == 8


def test_dual_flags_must_be_atoms():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "[dual.initial]\nn = 1\nm = [[2.0, 1]]\n")
    assert "not an atom" in info.value.errors[0]


def test_overrides_and_hash():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL, {"sim.seed": 2**64 - 1})
    assert b.seed == 2**64 - 1 and a.hash() != b.hash()
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, {"sim.seed": 2**64})


def test_round_trip_through_report():
    cfg = parse_config(MINIMAL + "[sim]\nseed = 7\nreps = 3\n")
    report = json.dumps({"z": 0.0, "config": cfg.to_dict()}, indent=2)
    again = parse_config(report)
    assert again == cfg and again.hash() == cfg.hash()
    assert parse_config(cfg.canonical_json()) == cfg
