"""Seeded experiment runner.

``mfwlab run config.toml`` builds the dataset, trains in the requested
mode and writes a self-describing artifact directory:

    config.resolved.json   fully materialized config (re-runnable)
    metrics.csv            long format, one row per epoch x class x split
    checkpoint.json        final model parameters
    features_train.csv     final-epoch features (seeded cap of 2000 rows)
    features_test.csv
    summary.json           final accuracies, deviations, hashes, timing

``mfwlab compare dirA dirB`` diffs two artifacts of the same dataset.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import imbalance, metrics as metrics_mod, mfw, model as model_mod
from .rng import seeded_rng

METRICS_HEADER = "epoch,class,split,accuracy,ratio,grad_norm,deviation,loss"
FEATURE_DUMP_CAP = 2000


class ConfigError(ValueError):
    pass


DATASET_DEFAULTS = {
    "kind": "synthetic", "profile": "long_tailed", "rho": 100.0, "n_max": 1000,
    "C": 10, "dim": 16, "noise": 1.0, "separation": 1.0, "test_per_class": 200,
    "images": "", "labels": "", "test_images": "", "test_labels": "",
}
MODEL_DEFAULTS = {
    "layer_widths": [64, 64, 32], "injection_index": 2, "bias": True,
}
TRAIN_DEFAULTS = {
    "epochs": 80, "batch_size": 128, "base_lr": 0.1, "warmup_epochs": 5,
    "momentum": 0.9, "alpha": 1.0, "beta_softness": 0.01, "drw_enabled": False,
    "drw_fraction": 0.8, "drw_beta_en": 0.9999, "mode": "MFW", "seed": 0,
    "s_override": None,
}
METRICS_DEFAULTS = {"R": 200, "eval_every": 1}


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        raw = json.loads(path.read_text())
    else:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    errors = []
    cfg = {}
    for section, defaults in [("dataset", DATASET_DEFAULTS), ("model", MODEL_DEFAULTS),
                              ("train", TRAIN_DEFAULTS), ("metrics", METRICS_DEFAULTS)]:
        given = raw.get(section, {})
        merged = dict(defaults)
        for key, val in given.items():
            if key not in defaults:
                errors.append(f"{section}.{key}: unknown key")
            else:
                merged[key] = val
        cfg[section] = merged
    cfg["output_dir"] = raw.get("output_dir", "artifact")

    d = cfg["dataset"]
    if d["kind"] not in ("synthetic", "idx"):
        errors.append(f"dataset.kind: must be synthetic or idx, got {d['kind']!r}")
    if d["profile"] not in ("long_tailed", "step"):
        errors.append(f"dataset.profile: must be long_tailed or step, got {d['profile']!r}")
    if d["rho"] < 1:
        errors.append(f"dataset.rho: must be >= 1, got {d['rho']}")
    if d["kind"] == "idx":
        for key in ("images", "labels", "test_images", "test_labels"):
            if not d[key] or not Path(d[key]).exists():
                errors.append(f"dataset.{key}: missing or nonexistent path {d[key]!r}")
    if cfg["train"]["mode"] not in ("ERM", "MFW", "MIXUP"):
        errors.append(f"train.mode: must be ERM, MFW or MIXUP, got {cfg['train']['mode']!r}")
    if cfg["train"]["epochs"] < 1:
        errors.append(f"train.epochs: must be >= 1, got {cfg['train']['epochs']}")
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
    return cfg


def build_datasets(cfg: dict) -> tuple[imbalance.Dataset, imbalance.Dataset]:
    d = cfg["dataset"]
    seed = cfg["train"]["seed"]
    if d["profile"] == "long_tailed":
        counts = imbalance.longtail_counts(d["n_max"], d["rho"], d["C"])
    else:
        counts = imbalance.step_counts(d["n_max"], d["rho"], d["C"])
    if d["kind"] == "synthetic":
        return imbalance.synth_gaussian(
            d["C"], d["dim"], d["separation"], d["noise"], counts,
            seeded_rng(seed, stream=10), test_per_class=d["test_per_class"])
    full = imbalance.read_idx(d["images"], d["labels"])
    train = imbalance.subsample_to_profile(full, counts, seeded_rng(seed, stream=10))
    test = imbalance.read_idx(d["test_images"], d["test_labels"])
    return train, test


def _fmt(x) -> str:
    return repr(float(x))


def write_metrics_csv(path: Path, history, C: int) -> None:
    lines = [METRICS_HEADER]
    for snap in history:
        for c in range(C):
            lines.append(",".join([
                str(snap.epoch), str(c), "train",
                _fmt(snap.per_class_train_acc[c]),
                _fmt(snap.classification_ratio[c]),
                _fmt(snap.grad_norm_per_class[c]),
                _fmt(snap.feature_deviation[c]),
                _fmt(snap.mean_train_loss),
            ]))
        for c in range(C):
            lines.append(",".join([
                str(snap.epoch), str(c), "test",
                _fmt(snap.per_class_test_acc[c]), "", "", "", "",
            ]))
    path.write_text("\n".join(lines) + "\n")


def write_features_csv(path: Path, feats: np.ndarray, labels: np.ndarray,
                       seed: int) -> bool:
    """Dump final features, capped at FEATURE_DUMP_CAP seeded-subsampled rows.

    Returns True if the dump was truncated."""
    n = len(labels)
    truncated = n > FEATURE_DUMP_CAP
    if truncated:
        keep = np.sort(seeded_rng(seed, stream=99).generator().choice(
            n, size=FEATURE_DUMP_CAP, replace=False))
        feats, labels = feats[keep], labels[keep]
    header = "label," + ",".join(f"f{i}" for i in range(feats.shape[1]))
    lines = [header]
    for lab, row in zip(labels, feats):
        lines.append(str(int(lab)) + "," + ",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return truncated


def run(config_path: str | Path, seed: int | None = None,
        out: str | Path | None = None) -> Path:
    cfg = load_config(config_path)
    if seed is not None:
        cfg["train"]["seed"] = seed
    if out is not None:
        cfg["output_dir"] = str(out)
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved.json").write_text(
        json.dumps(cfg, indent=2, sort_keys=True) + "\n")

    t0 = time.monotonic()
    train_set, test_set = build_datasets(cfg)
    model_config = model_mod.ModelConfig(
        input_dim=train_set.features.shape[1],
        layer_widths=list(cfg["model"]["layer_widths"]),
        num_classes=train_set.num_classes,
        injection_index=cfg["model"]["injection_index"],
        bias=cfg["model"]["bias"])
    train_config = mfw.TrainConfig(
        **cfg["train"], eval_R=cfg["metrics"]["R"],
        eval_every=cfg["metrics"]["eval_every"])

    try:
        result = mfw.train(train_config, model_config, train_set, test_set)
    except FloatingPointError as e:
        (out_dir / "summary.json").write_text(json.dumps(
            {"status": "failed", "error": str(e)}, indent=2) + "\n")
        raise

    write_metrics_csv(out_dir / "metrics.csv", result.history, train_set.num_classes)
    model_mod.save_checkpoint(result.params, out_dir / "checkpoint.json")
    f_train = metrics_mod.eval_features(result.params, train_set)
    f_test = metrics_mod.eval_features(result.params, test_set)
    seed_val = cfg["train"]["seed"]
    trunc_train = write_features_csv(out_dir / "features_train.csv",
                                     f_train, train_set.labels, seed_val)
    trunc_test = write_features_csv(out_dir / "features_test.csv",
                                    f_test, test_set.labels, seed_val)

    final = result.history[-1]
    summary = {
        "status": "ok",
        "mode": cfg["train"]["mode"],
        "final_per_class_test_acc": final.per_class_test_acc.tolist(),
        "final_mean_test_acc": float(final.per_class_test_acc.mean()),
        "final_feature_deviation": final.feature_deviation.tolist(),
        "class_counts": train_set.counts.tolist(),
        "dataset_fingerprint": train_set.fingerprint(),
        "data_order_hash": result.data_order_hash,
        "feature_dump_truncated": {"train": trunc_train, "test": trunc_test},
        "wall_clock_seconds": time.monotonic() - t0,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return out_dir


def read_metrics_csv(path: Path) -> list[dict]:
    rows = []
    lines = path.read_text().splitlines()
    if lines[0] != METRICS_HEADER:
        raise ValueError(f"{path}: unexpected header {lines[0]!r}")
    keys = lines[0].split(",")
    for line in lines[1:]:
        vals = line.split(",")
        rows.append(dict(zip(keys, vals)))
    return rows


def compare(dir_a: str | Path, dir_b: str | Path) -> dict:
    """Per-epoch metric deltas (B minus A) for two same-dataset artifacts."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    sum_a = json.loads((dir_a / "summary.json").read_text())
    sum_b = json.loads((dir_b / "summary.json").read_text())
    if sum_a["dataset_fingerprint"] != sum_b["dataset_fingerprint"]:
        raise ValueError("artifacts were produced from different datasets; refusing to compare")
    rows_a = read_metrics_csv(dir_a / "metrics.csv")
    rows_b = read_metrics_csv(dir_b / "metrics.csv")
    if len(rows_a) != len(rows_b):
        raise ValueError("artifacts have different numbers of metric rows")
    deltas = []
    for ra, rb in zip(rows_a, rows_b):
        if (ra["epoch"], ra["class"], ra["split"]) != (rb["epoch"], rb["class"], rb["split"]):
            raise ValueError("metric row keys do not align between artifacts")
        delta = {"epoch": int(ra["epoch"]), "class": int(ra["class"]), "split": ra["split"]}
        for key in ("accuracy", "ratio", "grad_norm", "deviation", "loss"):
            if ra[key] and rb[key]:
                delta[key] = float(rb[key]) - float(ra[key])
        deltas.append(delta)
    final_epoch = max(d["epoch"] for d in deltas)
    return {
        "a": str(dir_a), "b": str(dir_b),
        "mode_a": sum_a["mode"], "mode_b": sum_b["mode"],
        "final_mean_test_acc_delta": sum_b["final_mean_test_acc"] - sum_a["final_mean_test_acc"],
        "final_epoch": final_epoch,
        "final_per_class": [d for d in deltas if d["epoch"] == final_epoch],
        "per_epoch": deltas,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfwlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one training experiment")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_cmp = sub.add_parser("compare", help="diff two artifact directories")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")
    p_cmp.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            out_dir = run(args.config, seed=args.seed, out=args.out)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        except FloatingPointError as e:
            print(f"training aborted: {e}", file=sys.stderr)
            return 2
        print(f"artifact written to {out_dir}")
        return 0

    try:
        report = compare(args.dir_a, args.dir_b)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"report written to {args.out}")
    else:
        print(text, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
