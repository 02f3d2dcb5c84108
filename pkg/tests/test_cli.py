import csv
import io
import json

import pytest

from mtuc.cli import main


def test_linkbudget(capsys):
    assert main(["linkbudget", "--f", "30", "--dist", "500"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 1
    assert float(rows[0]["absorption_db_per_km"]) == pytest.approx(8.280378, abs=1e-6)
    assert float(rows[0]["combined_db"]) == pytest.approx(21.2689, abs=1e-4)


def test_gen_then_baseline_and_field(tmp_path, capsys):
    sc = tmp_path / "s.json"
    assert main(["gen", "--k", "3", "--m", "1", "--devices", "6", "--seed", "2", "--out", str(sc)]) == 0
    assert json.loads(sc.read_text())["groups"]
    assert main(["baseline", "--scenario", str(sc), "--scheme", "none"]) == 0
    row = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]
    assert float(row["Pr"]) == -float(row["CF"])
    out = tmp_path / "field.csv"
    assert main(["field", "--scenario", str(sc), "--grid", "4", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "x,y,Vx,Vy,Vz,speed"
    assert len(out.read_text().splitlines()) == 17


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", "--k", "2", "--m", "1", "--devices-per-dg", "1", "--grid", "0.5"]) == 0
    row = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]
    assert row["algo"] == "oracle"
    assert main(["oracle", "--k", "7", "--m", "1", "--devices-per-dg", "1"]) == 2
    assert "K=7" in capsys.readouterr().err


def test_train_command(tmp_path):
    ck = tmp_path / "net.txt"
    curve = tmp_path / "curve.csv"
    assert main(["train", "--k", "2", "--m", "1", "--devices-per-dg", "1", "--steps", "40", "--out", str(curve),
                 "--checkpoint", str(ck)]) == 0
    assert curve.read_text().startswith("update_index,")
    assert ck.read_text().startswith("# mtuc-a3c v1")


def test_experiment_command(tmp_path):
    out = tmp_path / "fig7"
    assert main(["experiment", "fig7_trajectories", "--seeds", "0", "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    assert main(["experiment", "--manifest", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    assert (out / "fig7_energy.csv").read_bytes() == (tmp_path / "again" / "fig7_energy.csv").read_bytes()


def test_experiment_failure_exit_code(tmp_path):
    assert main(["experiment", "fig8_offload", "--seeds", "0", "--scenario", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "x")]) == 1


def test_bad_scenario_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    assert main(["baseline", "--scenario", str(bad)]) == 2


def test_global_flags_before_subcommand(tmp_path):
    before, after = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--seed", "5", "--out", str(before), "gen", "--k", "3", "--m", "1", "--devices", "6"]) == 0
    assert main(["gen", "--k", "3", "--m", "1", "--devices", "6", "--seed", "5", "--out", str(after)]) == 0
    assert before.read_text() == after.read_text()
