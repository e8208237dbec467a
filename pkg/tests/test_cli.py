import csv
import json

import pytest

from seedbank.cli import COMMANDS, main

BASE = """
[measure]
kind = "discrete"
atoms = [[1.0, 1.0]]

[init]
x = {x}
y = {x}

[sim]
dt = 0.01
t_max = 1.0
reps = {reps}
seed = 5
workers = {workers}

[wf]
N = 200
records = 4

[dual.initial]
n = 2
"""


def write_config(tmp_path, name="run.toml", x=0.5, reps=200, workers=1):
    path = tmp_path / name
    path.write_text(BASE.format(x=x, reps=reps, workers=workers))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("command", COMMANDS)
def test_every_command_runs_and_writes_a_manifest(tmp_path, command):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out)])
    assert code in (0, 1)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == command and manifest["exit_code"] == code
    for name in manifest["outputs"]:
        assert (out / name).stat().st_size > 0


def test_usage_errors_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["nonsense", "--config", str(cfg)]) == 2
    assert main(["forward"]) == 2
    assert main(["forward", "--config", str(tmp_path / "missing.toml")]) == 2
    assert main(["forward", "--config", str(cfg), "--seed", "-1"]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('[measure]\nkind = "discrete"\natoms = [[1.0, -1.0]]\n[sim]\nreps = 0\n')
    assert main(["forward", "--config", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "measure.atoms[0].mass" in err and "sim.reps" in err


def test_forward_from_all_ones_is_constant(tmp_path):
    cfg = write_config(tmp_path, x=1.0)
    main(["forward", "--config", str(cfg), "--out", str(tmp_path), "--reps", "1"])
    rows = read_csv(tmp_path / "forward.csv")
    assert rows[0] == ["t", "x", "y_1"] and len(rows) == 102
    assert all(r[1:] == ["1", "1"] for r in rows[1:])
    main(["forward", "--config", str(cfg), "--out", str(tmp_path), "--reps", "50"])
    rows = read_csv(tmp_path / "forward.csv")
    assert rows[0] == ["t", "mean_x", "var_x", "se_x"]
    assert all(r[1:] == ["1", "0", "0"] for r in rows[1:])


def test_outputs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    serial = write_config(tmp_path, "par.toml", workers=3)
    for command in ("forward", "wf", "dual", "coalescent", "duality-check"):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        main([command, "--config", str(cfg), "--out", str(a)])
        main([command, "--config", str(cfg), "--out", str(b)])
        main([command, "--config", str(serial), "--out", str(c)])
        for f in a.iterdir():
            assert f.read_bytes() == (b / f.name).read_bytes()
            if f.name != "manifest.json" and not f.name.endswith("report.json"):
                assert f.read_bytes() == (c / f.name).read_bytes()  # worker count is not an input to the numbers


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path)
    main(["dual", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "5"])
    main(["dual", "--config", str(cfg), "--out", str(tmp_path / "b")])
    main(["dual", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "0x10"])
    a, b, c = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in "abc")
    assert a == b and c["seed"] == 16 and c["config_hash"] != a["config_hash"]


def test_report_round_trip(tmp_path):
    cfg = write_config(tmp_path, reps=400)
    code = main(["duality-check", "--config", str(cfg), "--out", str(tmp_path / "a")])
    report_path = tmp_path / "a" / "duality_report.json"
    report = json.loads(report_path.read_text())
    assert set(report) >= {"forward", "dual", "z", "pass", "seed", "config_hash", "config"}
    assert code == (0 if report["pass"] else 1)
    again = main(["duality-check", "--config", str(report_path), "--out", str(tmp_path / "b")])
    assert again == code
    assert report_path.read_bytes() == (tmp_path / "b" / "duality_report.json").read_bytes()


def test_duality_check_fails_with_exit_1(tmp_path):
    cfg = tmp_path / "tight.toml"
    cfg.write_text(BASE.format(x=0.5, reps=2000, workers=1).replace("[dual.initial]",
                   "[duality]\nthreshold = 1e-9\n\n[dual.initial]"))
    assert main(["duality-check", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert json.loads((tmp_path / "duality_report.json").read_text())["pass"] is False


def test_event_logs(tmp_path):
    cfg = write_config(tmp_path)
    main(["coalescent", "--config", str(cfg), "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "coalescent_events.csv")
    assert rows[0] == ["time", "event_kind", "detail"]
    assert {r[1] for r in rows[1:]} <= {"deactivate", "reactivate", "merge"}
    part = json.loads((tmp_path / "partition.json").read_text())
    assert sorted(i for b in part["blocks"] for i in b) == [1, 2] and len(part["flags"]) == len(part["blocks"])
