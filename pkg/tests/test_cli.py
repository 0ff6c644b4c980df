import json
import shutil

import numpy as np
import pytest

from mfwlab.cli import (ConfigError, METRICS_HEADER, compare, load_config, main,
                        read_metrics_csv, resolve_config, run)

SMALL_TOML = """
output_dir = "{out}"

[dataset]
kind = "synthetic"
profile = "step"
rho = 20.0
n_max = 60
C = 3
dim = 4
noise = 0.6
separation = 1.5
test_per_class = 30

[model]
layer_widths = [8, 6]
injection_index = 1

[train]
epochs = 4
batch_size = 16
base_lr = 0.1
warmup_epochs = 1
mode = "{mode}"
seed = 11

[metrics]
R = 5
"""


def write_cfg(tmp_path, mode="MFW", name="cfg.toml"):
    out = tmp_path / f"artifact_{mode.lower()}"
    path = tmp_path / name
    path.write_text(SMALL_TOML.format(out=out, mode=mode))
    return path, out


def test_validation_lists_all_errors():
    with pytest.raises(ConfigError) as exc:
        resolve_config({"dataset": {"kind": "csv", "rho": 0.5},
                        "train": {"mode": "ADAM"}})
    msg = str(exc.value)
    assert "dataset.kind" in msg
    assert "dataset.rho" in msg
    assert "train.mode" in msg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        resolve_config({"train": {"learningrate": 0.1}})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_run_writes_artifact(tmp_path):
    cfg_path, out = write_cfg(tmp_path)
    run(cfg_path)
    for name in ("config.resolved.json", "metrics.csv", "checkpoint.json",
                 "features_train.csv", "features_test.csv", "summary.json"):
        assert (out / name).exists(), name
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok"
    assert len(summary["final_per_class_test_acc"]) == 3
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == METRICS_HEADER
    # 4 epochs x 3 classes x 2 splits
    assert len(lines) == 1 + 4 * 3 * 2


def test_run_deterministic_bytes(tmp_path):
    cfg_path, out = write_cfg(tmp_path)
    run(cfg_path)
    first = (out / "metrics.csv").read_bytes()
    run(cfg_path)
    assert (out / "metrics.csv").read_bytes() == first


def test_resolved_config_round_trip(tmp_path):
    cfg_path, out = write_cfg(tmp_path)
    run(cfg_path)
    metrics_bytes = (out / "metrics.csv").read_bytes()
    resolved = out / "config.resolved.json"
    rerun_dir = tmp_path / "rerun"
    shutil.copy(resolved, tmp_path / "resolved.json")
    run(tmp_path / "resolved.json", out=rerun_dir)
    assert (rerun_dir / "metrics.csv").read_bytes() == metrics_bytes


def test_erm_and_mfw_share_data_order(tmp_path):
    cfg_a, out_a = write_cfg(tmp_path, mode="ERM", name="a.toml")
    cfg_b, out_b = write_cfg(tmp_path, mode="MFW", name="b.toml")
    run(cfg_a)
    run(cfg_b)
    sum_a = json.loads((out_a / "summary.json").read_text())
    sum_b = json.loads((out_b / "summary.json").read_text())
    assert sum_a["data_order_hash"] == sum_b["data_order_hash"]
    assert sum_a["dataset_fingerprint"] == sum_b["dataset_fingerprint"]


def test_compare_self_all_zero(tmp_path):
    cfg_path, out = write_cfg(tmp_path)
    run(cfg_path)
    report = compare(out, out)
    for row in report["per_epoch"]:
        for key in ("accuracy", "ratio", "grad_norm", "deviation", "loss"):
            if key in row:
                assert row[key] == 0.0
    assert report["final_mean_test_acc_delta"] == 0.0


def test_compare_erm_vs_mfw(tmp_path):
    cfg_a, out_a = write_cfg(tmp_path, mode="ERM", name="a.toml")
    cfg_b, out_b = write_cfg(tmp_path, mode="MFW", name="b.toml")
    run(cfg_a)
    run(cfg_b)
    report = compare(out_a, out_b)
    assert report["mode_a"] == "ERM"
    assert report["mode_b"] == "MFW"
    assert len(report["final_per_class"]) > 0


def test_compare_mismatched_datasets_refused(tmp_path):
    cfg_a, out_a = write_cfg(tmp_path, mode="ERM", name="a.toml")
    run(cfg_a)
    other = tmp_path / "other.toml"
    other.write_text(SMALL_TOML.format(out=tmp_path / "other_out", mode="ERM")
                     .replace("seed = 11", "seed = 12"))
    run(other)
    with pytest.raises(ValueError, match="refusing"):
        compare(out_a, tmp_path / "other_out")


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[train]\nmode = 'NOPE'\n")
    assert main(["run", str(bad)]) == 1
    cfg_path, out = write_cfg(tmp_path)
    assert main(["run", str(cfg_path)]) == 0
    assert main(["compare", str(out), str(out), "--out", str(tmp_path / "rep.json")]) == 0
    assert (tmp_path / "rep.json").exists()


def test_cli_seed_override(tmp_path):
    cfg_path, out = write_cfg(tmp_path)
    assert main(["run", str(cfg_path), "--seed", "99", "--out", str(tmp_path / "o99")]) == 0
    resolved = json.loads((tmp_path / "o99" / "config.resolved.json").read_text())
    assert resolved["train"]["seed"] == 99


def test_metrics_csv_reader_rejects_bad_header(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("epoch,who\n0,1\n")
    with pytest.raises(ValueError, match="header"):
        read_metrics_csv(path)


def test_features_dump_schema(tmp_path):
    cfg_path, out = write_cfg(tmp_path)
    run(cfg_path)
    lines = (out / "features_train.csv").read_text().splitlines()
    assert lines[0].startswith("label,f0,")
    n_cols = len(lines[0].split(","))
    assert all(len(l.split(",")) == n_cols for l in lines[1:])
