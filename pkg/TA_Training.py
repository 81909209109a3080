"""
TA_Training.py

Training, model selection and prediction for SignNet.

Every image is turned into three network inputs: the masked whole tongue, the body region
and the edge region, each resized to the configured side and scaled to [0, 1]. Training is
deterministic for a given seed: parameter init and the shuffle order each come from their
own seeded stream, torch runs in deterministic mode, and the learning rate decays linearly
to 0 over all steps. After every epoch the model is scored on the validation split at
threshold 0.5 and the state with the best average F1 is kept.

Dependencies:
    - torch: forward/backward passes and parameter snapshots.
    - numpy: label counts and prediction arrays.
    - pandas: cross-fold summary tables.
    - joblib / tqdm: parallel image encoding, progress over epochs.

Usage Example:
    >>> train_set = encode_records(train_records, side=256)
    >>> result = train_fold(train_set, val_set, SignNetConfig(), LossWeights(), TrainHyper(epochs=30))
"""

import copy
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from joblib import Parallel, delayed
from tqdm import tqdm

from TA_Errors import EmptySplitError
from TA_Fold_Split import FoldPlan, records_for_subjects
from TA_Image_Core import apply_mask, read_image, read_mask, resize, to_grayscale
from TA_Metrics import MetricReport, evaluate, summarize_folds
from TA_Output_Storage import append_jsonl
from TA_Regions import RegionParams, separate_regions
from TA_SignNet import (
    LossWeights, SignNet, SignNetConfig, attr_weights, aux_from_targets,
    effective_weights, loss_terms,
)
from TA_Tensor_AD import DTYPE, AdamW, Rng, adamw_step, backward, load_checkpoint, save_checkpoint


@dataclass
class TrainHyper:
    lr: float = 2e-4
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    weight_decay: float = 0.01
    betas: Tuple[float, float] = (0.9, 0.999)
    eval_every: int = 1

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1 or self.eval_every < 1:
            raise ValueError(f"invalid training hyperparameters: {self}")


@dataclass
class EncodedSet:
    whole: torch.Tensor
    body: torch.Tensor
    edge: torch.Tensor
    targets: torch.Tensor
    image_paths: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.targets.shape[0])


@dataclass
class TrainResult:
    state: Dict[str, torch.Tensor]
    best_epoch: int
    best_f1: float
    history: List[dict]
    alpha: Tuple[float, ...]
    config: SignNetConfig
    report: Optional[MetricReport] = None

    def model(self) -> SignNet:
        net = SignNet(self.config)
        net.load_state_dict(self.state)
        return net


# --- input encoding ---------------------------------------------------------

def _to_tensor(img: np.ndarray, side: int) -> torch.Tensor:
    return torch.from_numpy(resize(img, side).astype(np.float64) / 255.0).permute(2, 0, 1)


def encode_image(img: np.ndarray, mask: np.ndarray, side: int, p: Optional[RegionParams] = None):
    """(whole, body, edge) tensors of shape 3 x side x side."""
    whole = apply_mask(img, mask)
    pair = separate_regions(whole, mask, p)
    return _to_tensor(whole, side), _to_tensor(pair.body, side), _to_tensor(pair.edge, side)


def encode_samples(items: Sequence[Tuple[np.ndarray, np.ndarray, Sequence[int]]], side: int,
                   p: Optional[RegionParams] = None, image_paths: Optional[List[str]] = None) -> EncodedSet:
    """items: (image, mask, attribute bits) triples."""
    if not items:
        raise EmptySplitError("no samples to encode")
    encoded = [encode_image(img, mask, side, p) for img, mask, _ in items]
    targets = torch.tensor([list(bits) for _, _, bits in items], dtype=DTYPE)
    return EncodedSet(
        whole=torch.stack([e[0] for e in encoded]),
        body=torch.stack([e[1] for e in encoded]),
        edge=torch.stack([e[2] for e in encoded]),
        targets=targets,
        image_paths=list(image_paths or []),
    )


def _load_one(record, side: int, p: Optional[RegionParams]):
    img = read_image(record.image_path)
    mask = read_mask(record.mask_path) if record.mask_path else (to_grayscale(img) > 0).astype(np.uint8)
    return encode_image(img, mask, side, p)


def encode_records(records: Sequence, side: int, p: Optional[RegionParams] = None, workers: int = 1) -> EncodedSet:
    if not records:
        raise EmptySplitError("no manifest rows to encode")
    encoded = Parallel(n_jobs=workers)(
        delayed(_load_one)(r, side, p) for r in tqdm(records, desc="encode")
    )
    return EncodedSet(
        whole=torch.stack([e[0] for e in encoded]),
        body=torch.stack([e[1] for e in encoded]),
        edge=torch.stack([e[2] for e in encoded]),
        targets=torch.tensor([r.attrs.to_bits() for r in records], dtype=DTYPE),
        image_paths=[r.image_path for r in records],
    )


# --- training ---------------------------------------------------------------

def _batches(n: int, batch_size: int, order: torch.Tensor):
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


@torch.no_grad()
def predict_logits(net: SignNet, data: EncodedSet, batch_size: int = 32) -> torch.Tensor:
    net.eval()
    out = [net(data.whole[i:i + batch_size], data.body[i:i + batch_size], data.edge[i:i + batch_size]).attr_logits
           for i in range(0, len(data), batch_size)]
    return torch.cat(out)


def predict(net: SignNet, data: EncodedSet, batch_size: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Sigmoid probabilities and 0/1 bits (logit > 0, i.e. probability > 0.5)."""
    logits = predict_logits(net, data, batch_size)
    return torch.sigmoid(logits).numpy(), (logits > 0).numpy().astype(np.int64)


def score(net: SignNet, data: EncodedSet, batch_size: int = 32) -> MetricReport:
    probs, bits = predict(net, data, batch_size)
    return evaluate(bits, data.targets.numpy().astype(np.int64), probs)


def _epoch_record(epoch: int, split: str, loss: float, report: MetricReport, lr: float) -> dict:
    return {
        "epoch": epoch, "split": split, "loss": loss, "lr": lr,
        "f1": report.f1, "average_f1": report.average_f1,
        "average_accuracy": report.average_accuracy, "jaccard": report.jaccard,
    }


def train_fold(train_set: EncodedSet, val_set: Optional[EncodedSet], cfg: SignNetConfig,
               weights: Optional[LossWeights] = None, hyper: Optional[TrainHyper] = None,
               log_path: Optional[str] = None, derive_alpha: bool = True) -> TrainResult:
    """
    Train one model. With derive_alpha the per-attribute weights are recomputed from
    train_set's positive counts, replacing weights.alpha. val_set=None selects on the
    training split.
    """
    hyper = hyper or TrainHyper()
    if len(train_set) == 0:
        raise EmptySplitError("training split is empty")
    if val_set is not None and len(val_set) == 0:
        raise EmptySplitError("validation split is empty")
    select_on = val_set if val_set is not None else train_set
    split_name = "val" if val_set is not None else "train"

    weights = weights or LossWeights()
    if derive_alpha:
        weights = replace(weights, alpha=tuple(attr_weights(train_set.targets.sum(dim=0).numpy())))
    weights = effective_weights(weights, cfg)

    torch.use_deterministic_algorithms(True)
    net = SignNet(cfg, seed=hyper.seed)
    shuffle = Rng(hyper.seed + 1)
    opt = AdamW(net.parameters(), lr=hyper.lr, betas=hyper.betas, weight_decay=hyper.weight_decay)
    color_all, fur_all = aux_from_targets(train_set.targets, cfg.fur_includes_redspot)

    n = len(train_set)
    total_steps = hyper.epochs * math.ceil(n / hyper.batch_size)
    step = 0
    best_f1, best_epoch, best_state, best_report = -1.0, 0, None, None
    history: List[dict] = []
    if log_path and os.path.exists(log_path):
        os.remove(log_path)

    print(f"\n🔍 Training on {n} images, selecting on {len(select_on)} ({split_name}); "
          f"{hyper.epochs} epochs x {math.ceil(n / hyper.batch_size)} steps, lr={hyper.lr}")
    for epoch in tqdm(range(1, hyper.epochs + 1), desc="epochs"):
        net.train()
        running, seen = 0.0, 0
        lr = hyper.lr
        for idx in _batches(n, hyper.batch_size, shuffle.permutation(n)):
            lr = hyper.lr * (1.0 - step / total_steps)
            pred = net(train_set.whole[idx], train_set.body[idx], train_set.edge[idx])
            terms = loss_terms(pred, train_set.targets[idx], color_all[idx], fur_all[idx], weights)
            opt.zero_grad()
            backward(terms["total"], opt.params)
            adamw_step(opt, lr)
            running += float(terms["total"]) * len(idx)
            seen += len(idx)
            step += 1

        if epoch % hyper.eval_every and epoch != hyper.epochs:
            continue
        report = score(net, select_on, hyper.batch_size)
        record = _epoch_record(epoch, split_name, running / seen, report, lr)
        history.append(record)
        if log_path:
            append_jsonl(record, log_path)
        if report.average_f1 > best_f1:
            best_f1, best_epoch, best_report = report.average_f1, epoch, report
            best_state = copy.deepcopy(net.state_dict())

    print(f"✅ Best average F1 {best_f1:.4f} at epoch {best_epoch}")
    return TrainResult(state=best_state, best_epoch=best_epoch, best_f1=best_f1, history=history,
                       alpha=weights.alpha, config=cfg, report=best_report)


def save_result(result: TrainResult, path: str, seed: int) -> None:
    config = {"signnet": result.config.to_dict(), "alpha": list(result.alpha),
              "best_epoch": result.best_epoch, "best_f1": result.best_f1}
    save_checkpoint(path, result.state, seed, config)


def load_model(path: str) -> SignNet:
    params, seed, config = load_checkpoint(path)
    net = SignNet(SignNetConfig.from_dict(config["signnet"]), seed=seed)
    net.load_state_dict(params)
    return net


def train(records: Sequence, plan: FoldPlan, cfg: SignNetConfig, weights: Optional[LossWeights] = None,
          hyper: Optional[TrainHyper] = None, out_dir: Optional[str] = None,
          region_params: Optional[RegionParams] = None, workers: int = 1,
          folds: Optional[Sequence[int]] = None, derive_alpha: bool = True) -> Tuple[List[TrainResult], pd.DataFrame]:
    """
    Cross-validation: fold i validates on plan.folds[i] and trains on the others.
    Writes fold<i>.ckpt and fold<i>.jsonl into out_dir when given.

    Returns:
        Tuple[List[TrainResult], pd.DataFrame]: per-fold results and the mean/std summary.
    """
    hyper = hyper or TrainHyper()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    results: List[TrainResult] = []
    for i in (folds if folds is not None else range(plan.k)):
        train_records = records_for_subjects(records, plan.train_subjects(i))
        val_records = records_for_subjects(records, plan.val_subjects(i))
        if not train_records or not val_records:
            raise EmptySplitError(f"fold {i + 1} has an empty train or validation split")
        print(f"\n🔍 Fold {i + 1}/{plan.k}: {len(train_records)} train / {len(val_records)} val images")
        train_set = encode_records(train_records, cfg.side, region_params, workers)
        val_set = encode_records(val_records, cfg.side, region_params, workers)
        log_path = os.path.join(out_dir, f"fold{i + 1}.jsonl") if out_dir else None
        result = train_fold(train_set, val_set, cfg, weights, hyper, log_path, derive_alpha)
        if out_dir:
            save_result(result, os.path.join(out_dir, f"fold{i + 1}.ckpt"), hyper.seed)
        results.append(result)
    summary = summarize_folds([r.report for r in results])
    print("\n🔍 Cross-fold summary (mean / std):")
    print(summary.loc[["average_accuracy", "average_f1", "jaccard"]])
    return results, summary
