import csv
import io
import json

import pytest

from mtuc import experiments as E

SMALL = dict(seeds=(0,), num_groups=3, num_auvs=2, num_devices=6, train_steps=60)


def read(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_spec_validation():
    with pytest.raises(ValueError):
        E.ExperimentSpec("fig99")
    with pytest.raises(ValueError):
        E.ExperimentSpec("fig8_offload", seeds=())
    with pytest.raises(ValueError):
        E.ExperimentSpec("fig6_profit_vs_auvs", auv_counts=())


def test_full_scale_sizes():
    spec = E.ExperimentSpec.full_scale("fig8_offload")
    assert (spec.num_groups, spec.num_devices) == (15, 190)


@pytest.mark.parametrize("exp", ["fig7_trajectories", "fig8_offload", "fig9_cache", "fig10_alloc"])
def test_rows_carry_seed_and_hash(tmp_path, exp):
    out = E.run_experiment(E.ExperimentSpec(exp, out_dir=str(tmp_path), **SMALL))
    assert out.ok
    for p in out.files:
        if p.suffix == ".csv":
            rows = read(p)
            assert rows and {"seed", "scenario_hash"} <= set(rows[0])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == [0] and manifest["failed_cells"] == []


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    first = tmp_path / "a"
    E.run_experiment(E.ExperimentSpec("fig8_offload", out_dir=str(first), **SMALL))
    spec = E.with_output(E.spec_from_manifest(first / "manifest.json"), tmp_path / "b")
    E.run_experiment(spec)
    for name in ("fig8_offload.csv", "manifest.json"):
        a = (first / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        if name == "manifest.json":
            a, b = (json.loads(x) for x in (a, b))
            a["config"].pop("out_dir"), b["config"].pop("out_dir")
        assert a == b


def test_auv_sweep_summary(tmp_path):
    spec = E.ExperimentSpec("fig6_profit_vs_auvs", out_dir=str(tmp_path), auv_counts=(1, 2), **SMALL)
    E.run_experiment(spec)
    rows = read(tmp_path / "fig6_summary.csv")
    assert [int(r["M"]) for r in rows] == [1, 2]
    assert {"mean_profit", "std_profit", "seed", "scenario_hash"} <= set(rows[0])


def test_failed_cells_are_reported(tmp_path):
    spec = E.ExperimentSpec("fig8_offload", out_dir=str(tmp_path), scenario_path=str(tmp_path / "missing.json"),
                            **SMALL)
    out = E.run_experiment(spec)
    assert not out.ok
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["failed_cells"][0]["seed"] == 0


def test_lr_and_oracle_cells(tmp_path):
    out = E.run_experiment(E.ExperimentSpec("fig12_lr", out_dir=str(tmp_path / "lr"), **SMALL))
    modes = {r["mode"] for r in read(tmp_path / "lr" / "fig12_final.csv")}
    assert modes == {"fixed", "adaptive"} and out.ok
    out = E.run_experiment(E.ExperimentSpec("oracle_gap", out_dir=str(tmp_path / "og"), **SMALL))
    row = read(tmp_path / "og" / "oracle_gap.csv")[0]
    assert float(row["a3c_profit"]) <= float(row["oracle_profit"]) + abs(float(row["oracle_profit"]))
