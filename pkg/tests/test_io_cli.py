import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mzmem import pipeline
from mzmem.cli import main
from mzmem.config import ExperimentConfig, available_configs, load_config
from mzmem.io import SnapshotFile, SnapshotFormatError, load_kernel_table, read_csv, save_kernel_table, write_csv
from mzmem.kernel import KernelTable

CAMPAIGNS = ["brusselator_lco", "brusselator_stable", "burgers", "burgers_desk", "ks", "ks_desk", "linear",
             "linear_toy"]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(2, 9), st.booleans(), st.integers(0, 2**63 - 1))
def test_snapshot_roundtrip_bit_exact(n_snap, n, complex_data, seed):
    rng = np.random.default_rng(seed % 1000)
    data = rng.standard_normal((n_snap, n))
    if complex_data:
        data = data + 1j * rng.standard_normal((n_snap, n))
    snap = SnapshotFile("burgers", n, 1, 1e-3, seed, data)
    back = SnapshotFile.from_bytes(snap.to_bytes())
    assert back.data.tobytes() == snap.data.tobytes()
    assert (back.model, back.N, back.m, back.dt, back.seed, back.layout) == ("burgers", n, 1, 1e-3, seed, "full")


def test_snapshot_resolved_layout_and_errors(tmp_path):
    snap = SnapshotFile("ks", 8, 3, 1e-4, 0, np.ones((4, 3), dtype=complex), "resolved")
    path = tmp_path / "r.mzk"
    snap.write(path)
    back = SnapshotFile.read(path)
    assert back.layout == "resolved" and back.n_steps == 3
    assert np.allclose(back.times, [0, 1e-4, 2e-4, 3e-4])
    blob = snap.to_bytes()
    with pytest.raises(SnapshotFormatError):
        SnapshotFile.from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(SnapshotFormatError):
        SnapshotFile.from_bytes(blob[:-1])
    with pytest.raises(ValueError):
        SnapshotFile("ks", 8, 3, 1e-4, 0, np.ones((4, 8)), "resolved")


def test_shipped_configs_load_and_roundtrip():
    assert available_configs() == CAMPAIGNS
    for name in CAMPAIGNS:
        cfg = load_config(name)
        assert cfg.name == name
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg
        cfg.system()


def test_shipped_config_step_counts():
    assert load_config("linear").n_steps == 1600
    assert load_config("brusselator_stable").n_steps == 2000
    assert load_config("brusselator_lco").snapshot_indices() == [800, 900, 1000, 1500]
    assert load_config("ks_desk").stepper.scheme == "etdrk4"


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig("brusselator", 3, 1, 0.01, 1.0)
    with pytest.raises(ValueError):
        ExperimentConfig("burgers", 16, 16, 0.01, 1.0)
    with pytest.raises(ValueError):
        ExperimentConfig("burgers", 16, 4, 0.3, 1.0)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"model": "linear", "N": 2, "m": 1, "dt": 0.1, "t_f": 1.0, "colour": "red"})
    with pytest.raises(FileNotFoundError):
        load_config("no_such_campaign")
    cfg = ExperimentConfig("linear", 2, 1, 0.1, 1.0)
    cfg.save(tmp_path / "c.json")
    assert load_config(str(tmp_path / "c.json")) == cfg


def test_csv_metadata_header(tmp_path):
    cfg = load_config("brusselator_lco")
    path = tmp_path / "x.csv"
    write_csv(path, pipeline.metadata_line(cfg, status="ok"), ["t", "v"], np.array([[0.1, 1 / 3]]))
    meta, cols, data = read_csv(path)
    assert meta.startswith("# mzmem=")
    fields = dict(item.split("=", 1) for item in meta[2:].split())
    assert fields["model"] == "brusselator" and fields["dt"] == "0.01" and fields["status"] == "ok"
    assert fields["params"] == "A:1.0;B:3.0"
    assert cols == ["t", "v"]
    assert data[0, 1] == 1 / 3
    with pytest.raises(ValueError):
        write_csv(path, "#", ["a"], np.ones((2, 2)))


def test_kernel_table_archive_roundtrip(tmp_path):
    table = KernelTable.from_rows([[1.0, 2.0, 3.0], [4.0, 5.0], [6.0]], 0.1, snapshot_indices=(2,))
    table.failures = {3: 1}
    save_kernel_table(tmp_path / "t.npz", table)
    back = load_kernel_table(tmp_path / "t.npz")
    assert np.array_equal(back.memory_sum, table.memory_sum)
    assert [r.tolist() for r in back.rows] == [r.tolist() for r in table.rows]
    assert back.failures == {3: 1}
    assert np.array_equal(back.snapshots[2], table.snapshots[2])


def test_fom_header_mismatch_is_refused(tmp_path):
    cfg = load_config("linear_toy")
    pipeline.run_fom(cfg, tmp_path)
    other = cfg.replace(t_f=0.04)
    with pytest.raises(pipeline.ConfigMismatchError):
        pipeline.load_fom(other, tmp_path / "fom.mzk")
    with pytest.raises(pipeline.ConfigMismatchError):
        pipeline.load_fom(cfg.replace(dt=0.005, t_f=0.025), tmp_path / "fom.mzk")
    assert pipeline.load_fom(cfg, tmp_path / "fom.mzk").n_steps == 5


def test_cli_pipeline_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "toy"
    assert main(["fom", "--config", "linear_toy", "--output-dir", str(out)]) == 0
    assert main(["subgrid", "--config", "linear_toy", "--output-dir", str(out)]) == 0
    assert main(["kernel", "--config", "linear_toy", "--output-dir", str(out), "--workers", "1"]) == 0
    for name in ("memory.csv", "errors.csv", "decay_profiles.csv", "memory_lengths.csv", "kernel_snapshots.csv",
                 "subgrid.csv", "overlay.svg", "kernel_table.npz", "config.json"):
        assert (out / name).exists(), name
    assert json.loads((out / "config.json").read_text())["name"] == "linear_toy"
    assert main(["plot", "--output-dir", str(out)]) == 0
    # mismatched snapshot file
    assert main(["kernel", "--config", "linear_toy", "--output-dir", str(out), "--set", "t_f=0.04"]) == 1
    assert main(["kernel", "--config", "nonexistent"]) == 1
    assert main(["plot", "--output-dir", str(tmp_path / "empty")]) == 1


def test_cli_partial_exit_code(tmp_path):
    # an absurd perturbation size makes rows blow up
    args = ["kernel", "--config", "brusselator_lco", "--output-dir", str(tmp_path),
            "--set", "t_f=2.0", "--set", "epsilon=50"]
    with np.errstate(all="ignore"):
        assert main(args) == 2
    assert (tmp_path / "failed_rows.csv").exists()
    assert "status=partial" in (tmp_path / "memory.csv").read_text().splitlines()[0]


def test_cli_scaling(tmp_path):
    args = ["scaling", "--config", "burgers_desk", "--output-dir", str(tmp_path), "--m-list", "8,16",
            "--set", "N=32", "--set", "m=8", "--set", "t_f=0.02"]
    assert main(args) == 0
    meta, cols, data = read_csv(tmp_path / "scaling.csv")
    assert cols == ["m", "tau", "non_decaying"]
    assert data[:, 0].tolist() == [8, 16]
    assert "slope=" in meta


def test_workers_from_environment(tmp_path, monkeypatch):
    seen = {}
    real = pipeline.run_kernel

    def spy(config, fom_path, out, workers):
        seen["workers"] = workers
        return real(config, fom_path, out, workers)

    monkeypatch.setattr(pipeline, "run_kernel", spy)
    monkeypatch.setenv("MZMEM_WORKERS", "3")
    assert main(["kernel", "--config", "linear_toy", "--output-dir", str(tmp_path)]) == 0
    assert seen["workers"] == 3
