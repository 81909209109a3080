"""
# TA_Main.py
Main entry point of the tongue attribute pipeline. Each stage is a subcommand:

- synth      write a synthetic tongue dataset and its manifest
- normalize  upright orientation of every manifest image
- separate   body / edge region images for every manifest image
- split      subject-disjoint k-fold + hold-out plan
- train      cross-validated SignNet training with checkpoints and per-epoch logs
- eval       metric report from a predictions file or a checkpoint
- predict    per-image attribute bits and scores from a checkpoint
- roc        per-attribute ROC point files and the AUC summary

Exit codes: 0 on success, 1 on a data or validation failure (the diagnostic names the
offending path/row), 2 on a usage error.

Usage Example:
    $ python TA_Main.py synth --count 64 --seed 7 --out d/
    $ python TA_Main.py normalize --manifest d/manifest.csv --out n/
"""

import argparse
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from TA_Config import COMMANDS, RunConfig, print_config, resolve_config
from TA_Data_Ingestion import load_manifest
from TA_Errors import ConfigError, LengthMismatchError, TongueAttrError
from TA_Fold_Split import FoldPlan, fold_attribute_counts, holdout_records, split_folds
from TA_Metrics import evaluate, report_to_frame, roc_curve, summarize_folds
from TA_Orientation import normalize_manifest
from TA_Output_Storage import (
    store_output, write_json, write_manifest, write_predictions, write_roc_points, write_table,
)
from TA_Regions import separate_batch
from TA_SignNet import ATTRIBUTES
from TA_Synthetic import export_dataset, synth_generate
from TA_Training import encode_records, load_model, predict, score, train


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file whose keys match the long flag names")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, help="worker pool size for per-image stages")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="TA_Main", description="Tongue attribute pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    p = {name: sub.add_parser(name, argument_default=argparse.SUPPRESS) for name in COMMANDS}
    for name in COMMANDS:
        _common(p[name])
        if name != "synth":
            p[name].add_argument("--manifest")

    p["synth"].add_argument("--count", type=int)
    p["synth"].add_argument("--side", type=int)
    p["synth"].add_argument("--rotation-min", type=float)
    p["synth"].add_argument("--rotation-max", type=float)
    p["synth"].add_argument("--attr-prob", type=float, help="probability of every attribute bit")
    p["synth"].add_argument("--noise", type=float)
    p["synth"].add_argument("--pair-rate", type=float)

    p["normalize"].add_argument("--alpha", type=float, help="contour angle threshold in degrees")
    p["normalize"].add_argument("--smooth", type=int, help="odd smoothing window in pixels")
    p["normalize"].add_argument("--margin", type=int)
    p["normalize"].add_argument("--refine", type=int)
    p["normalize"].add_argument("--debug", action="store_true", help="write contour overlays")

    for name in ("separate", "train", "eval", "predict", "roc"):
        p[name].add_argument("--edge-ratio", type=float)

    p["split"].add_argument("--k", type=int)
    p["split"].add_argument("--holdout", type=float, help="fraction of subjects held out")
    p["split"].add_argument("--holdout-count", type=int)

    t = p["train"]
    t.add_argument("--folds", help="fold plan JSON written by 'split'")
    t.add_argument("--fold", type=int, help="train only this fold (1-based)")
    t.add_argument("--k", type=int)
    t.add_argument("--holdout", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--input-side", type=int)
    t.add_argument("--widths", help="comma-separated backbone stage widths")
    t.add_argument("--blocks", type=int)
    t.add_argument("--d-model", type=int)
    t.add_argument("--ffn-mult", type=int)
    t.add_argument("--w-color", type=float)
    t.add_argument("--w-fur", type=float)
    t.add_argument("--no-fuse-color", dest="fuse_color", action="store_false")
    t.add_argument("--no-fuse-fur", dest="fuse_fur", action="store_false")
    t.add_argument("--fur-includes-redspot", action="store_true")

    for name in ("eval", "predict", "roc"):
        p[name].add_argument("--checkpoint")
    for name in ("eval", "roc"):
        p[name].add_argument("--predictions", help="CSV written by 'predict'")
    return parser


# --- subcommands ------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> None:
    samples = synth_generate(cfg.synth_config(), workers=cfg.workers)
    export_dataset(samples, cfg.out)


def cmd_normalize(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    new_records, angles = normalize_manifest(records, cfg.out, cfg.orientation_params(),
                                             workers=cfg.workers, debug=cfg.debug)
    write_manifest(new_records, os.path.join(cfg.out, "manifest.csv"))
    write_table(angles, os.path.join(cfg.out, "angles.csv"))


def cmd_separate(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    rows = separate_batch(records, cfg.out, cfg.region_params(), workers=cfg.workers)
    write_table(pd.DataFrame(rows), os.path.join(cfg.out, "regions.csv"))


def cmd_split(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    plan = split_folds(records, k=cfg.k, holdout_fraction=cfg.holdout, seed=cfg.seed,
                       holdout_count=cfg.holdout_count)
    os.makedirs(cfg.out, exist_ok=True)
    plan.to_json(os.path.join(cfg.out, "folds.json"))
    counts = fold_attribute_counts(records, plan)
    write_table(counts, os.path.join(cfg.out, "fold_counts.csv"), index=True)
    print(f"✅ {plan.k} folds of {[len(f) for f in plan.folds]} subjects, {len(plan.holdout)} held out")
    print(counts)


def cmd_train(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    if cfg.folds:
        plan = FoldPlan.from_json(cfg.folds)
    else:
        plan = split_folds(records, k=cfg.k, holdout_fraction=cfg.holdout, seed=cfg.seed)
    if cfg.fold is not None and not 1 <= cfg.fold <= plan.k:
        raise ConfigError(f"--fold must lie in 1..{plan.k}")
    folds = [cfg.fold - 1] if cfg.fold is not None else None
    # alpha is recomputed from each fold's training split
    results, summary = train(records, plan, cfg.signnet_config(), cfg.loss_weights(), cfg.train_hyper(),
                             cfg.out, cfg.region_params(), cfg.workers, folds, derive_alpha=True)
    store_output(summary, cfg.out, "summary.csv")

    test = holdout_records(records, plan)
    if test:
        data = encode_records(test, cfg.input_side, cfg.region_params(), cfg.workers)
        reports = [score(r.model(), data) for r in results]
        store_output(summarize_folds(reports), cfg.out, "holdout_summary.csv")


def _aligned_bits(records, frame: pd.DataFrame, base_dir: str):
    def norm(p: str) -> str:
        return os.path.normpath(p if os.path.isabs(p) else os.path.join(base_dir, p))

    by_path = {norm(p): i for i, p in enumerate(frame["image_path"])}
    rows = []
    for r in records:
        key = os.path.normpath(os.path.abspath(r.image_path))
        if key not in by_path:
            raise LengthMismatchError(f"no prediction for {r.image_path}")
        rows.append(by_path[key])
    picked = frame.iloc[rows]
    bits = picked[list(ATTRIBUTES)].to_numpy(dtype=np.int64)
    score_cols = [f"{a}_score" for a in ATTRIBUTES]
    scores = picked[score_cols].to_numpy(dtype=np.float64) if set(score_cols) <= set(frame.columns) else None
    return bits, scores


def _predicted(cfg: RunConfig, records):
    if cfg.predictions:
        frame = pd.read_csv(cfg.predictions)
        base_dir = os.path.dirname(os.path.abspath(cfg.predictions))
        return _aligned_bits(records, frame, base_dir)
    net = load_model(cfg.checkpoint)
    probs, bits = predict(net, encode_records(records, net.cfg.side, cfg.region_params(), cfg.workers))
    return bits, probs


def cmd_eval(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    bits, scores = _predicted(cfg, records)
    truth = np.asarray([r.attrs.to_bits() for r in records], dtype=np.int64)
    report = evaluate(bits, truth, scores)
    store_output(report.to_dict(), cfg.out, "report.json")
    store_output(report_to_frame(report), cfg.out, "report.csv")
    print(f"✅ average accuracy {report.average_accuracy:.4f}, average F1 {report.average_f1:.4f}, "
          f"Jaccard {report.jaccard:.4f}")


def cmd_predict(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    net = load_model(cfg.checkpoint)
    data = encode_records(records, net.cfg.side, cfg.region_params(), cfg.workers)
    probs, bits = predict(net, data)
    path = os.path.join(cfg.out, "predictions.csv")
    write_predictions([os.path.abspath(p) for p in data.image_paths], probs, bits, path)
    print(f"✅ Predictions for {len(records)} images stored at {path}")


def cmd_roc(cfg: RunConfig) -> None:
    records = load_manifest(cfg.manifest)
    _, scores = _predicted(cfg, records)
    if scores is None:
        raise LengthMismatchError(f"{cfg.predictions} has no <attribute>_score columns")
    truth = np.asarray([r.attrs.to_bits() for r in records], dtype=np.int64)
    aucs: Dict[str, float] = {}
    for j, name in enumerate(ATTRIBUTES):
        if truth[:, j].min() == truth[:, j].max():
            print(f"⚠️ Skipping ROC for '{name}': only one class present")
            continue
        points, aucs[name] = roc_curve(scores[:, j], truth[:, j])
        write_roc_points(points, os.path.join(cfg.out, f"roc_{name}.txt"))
    write_json({"auc": aucs}, os.path.join(cfg.out, "auc.json"))
    print(f"✅ ROC curves for {len(aucs)} attributes stored in {cfg.out}")


HANDLERS = {
    "synth": cmd_synth, "normalize": cmd_normalize, "separate": cmd_separate, "split": cmd_split,
    "train": cmd_train, "eval": cmd_eval, "predict": cmd_predict, "roc": cmd_roc,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2

    try:
        cfg = resolve_config(vars(ns))
    except ConfigError as e:
        print(f"❌ Usage error: {e}")
        return 2
    print_config(cfg)

    try:
        HANDLERS[cfg.command](cfg)
    except ConfigError as e:
        print(f"❌ Usage error: {e}")
        return 2
    except (TongueAttrError, OSError, ValueError) as e:
        print(f"❌ {type(e).__name__}: {e}")
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
