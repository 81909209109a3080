"""
TA_Metrics.py

Evaluation metrics for the eight binary attributes: confusion counts, accuracy and F1 per
attribute, sample-mean Jaccard over label sets, ROC curves with trapezoidal AUC, and the
cross-fold mean/std summary.

Conventions:
    - precision, recall or F1 with a zero denominator evaluate to 0
    - a sample whose predicted and true label sets are both empty has Jaccard 1
    - predicted bit = 1 iff score > 0.5

Dependencies:
    - numpy: vectorized counting.
    - pandas: per-attribute report tables and fold summaries.

Usage Example:
    >>> report = evaluate(pred_bits, true_bits, scores)
    >>> print(report.average_f1, report.jaccard)
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from TA_Errors import LengthMismatchError, ShapeMismatchError, SingleClassError
from TA_SignNet import ATTRIBUTES

THRESHOLD = 0.5


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_bits(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return arr.astype(np.int64)


def confusion(pred_bits: Sequence[int], true_bits: Sequence[int]) -> Confusion:
    pred, true = _as_bits(pred_bits, "pred_bits"), _as_bits(true_bits, "true_bits")
    if pred.shape != true.shape:
        raise LengthMismatchError(f"{pred.size} predictions vs {true.size} labels")
    if pred.size == 0:
        raise LengthMismatchError("cannot score an empty prediction list")
    return Confusion(
        tp=int(np.sum((pred == 1) & (true == 1))),
        tn=int(np.sum((pred == 0) & (true == 0))),
        fp=int(np.sum((pred == 1) & (true == 0))),
        fn=int(np.sum((pred == 0) & (true == 1))),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def accuracy_f1(c: Confusion) -> Tuple[float, float]:
    if c.total == 0:
        raise ValueError("confusion has no samples")
    acc = (c.tp + c.tn) / c.total
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    return acc, _ratio(2 * precision * recall, precision + recall)


def jaccard(pred_sets, true_sets) -> float:
    """Mean over samples of |A & B| / |A | B|; empty/empty scores 1."""
    pred, true = _as_bits(pred_sets, "pred_sets"), _as_bits(true_sets, "true_sets")
    if pred.shape[0] != true.shape[0]:
        raise LengthMismatchError(f"{pred.shape[0]} predicted samples vs {true.shape[0]} true samples")
    if pred.shape != true.shape:
        raise ShapeMismatchError(f"label widths differ: {pred.shape} vs {true.shape}")
    if pred.shape[0] == 0:
        raise LengthMismatchError("cannot score zero samples")
    inter = np.sum(pred & true, axis=1)
    union = np.sum(pred | true, axis=1)
    per_sample = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    return float(per_sample.mean())


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> Tuple[List[Tuple[float, float]], float]:
    """
    ROC points for thresholds at every distinct score, descending; tied scores move
    together. Anchored at (0, 0) and (1, 1); AUC by the trapezoidal rule.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _as_bits(labels, "labels")
    if s.shape != y.shape:
        raise LengthMismatchError(f"{s.size} scores vs {y.size} labels")
    pos = int(y.sum())
    neg = int(y.size - pos)
    if pos == 0 or neg == 0:
        raise SingleClassError("ROC needs at least one positive and one negative label")

    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tps = np.cumsum(y)[ends]
    fps = (ends + 1) - tps
    fpr = np.r_[0.0, fps / neg]
    tpr = np.r_[0.0, tps / pos]
    points = [(float(f), float(t)) for f, t in zip(fpr, tpr)]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return points, auc


@dataclass
class MetricReport:
    accuracy: Dict[str, float]
    f1: Dict[str, float]
    average_accuracy: float
    average_f1: float
    jaccard: float
    roc: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)
    auc: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_roc: bool = False) -> dict:
        out = {
            "accuracy": dict(self.accuracy),
            "f1": dict(self.f1),
            "average_accuracy": self.average_accuracy,
            "average_f1": self.average_f1,
            "jaccard": self.jaccard,
            "auc": dict(self.auc),
        }
        if include_roc:
            out["roc"] = {k: [list(p) for p in v] for k, v in self.roc.items()}
        return out


def evaluate(pred_bits, true_bits, scores=None) -> MetricReport:
    """
    Per-attribute accuracy/F1, their macro averages, and the sample-mean Jaccard.
    With scores (N x 8 probabilities), ROC/AUC is added for every attribute that has
    both classes present.
    """
    pred, true = _as_bits(pred_bits, "pred_bits"), _as_bits(true_bits, "true_bits")
    if pred.ndim != 2 or pred.shape[1] != len(ATTRIBUTES) or pred.shape != true.shape:
        raise ShapeMismatchError(f"expected matching N x {len(ATTRIBUTES)} bit arrays, "
                                 f"got {pred.shape} and {true.shape}")
    accuracy, f1 = {}, {}
    for j, name in enumerate(ATTRIBUTES):
        accuracy[name], f1[name] = accuracy_f1(confusion(pred[:, j], true[:, j]))

    report = MetricReport(
        accuracy=accuracy,
        f1=f1,
        average_accuracy=float(np.mean(list(accuracy.values()))),
        average_f1=float(np.mean(list(f1.values()))),
        jaccard=jaccard(pred, true),
    )
    if scores is not None:
        s = np.asarray(scores, dtype=np.float64)
        if s.shape != true.shape:
            raise ShapeMismatchError(f"scores {s.shape} vs labels {true.shape}")
        for j, name in enumerate(ATTRIBUTES):
            if 0 < true[:, j].sum() < true.shape[0]:
                report.roc[name], report.auc[name] = roc_curve(s[:, j], true[:, j])
    return report


def report_to_frame(report: MetricReport) -> pd.DataFrame:
    """One row per attribute plus an 'average' row."""
    frame = pd.DataFrame({
        "accuracy": pd.Series(report.accuracy),
        "f1": pd.Series(report.f1),
        "auc": pd.Series({name: report.auc.get(name, np.nan) for name in ATTRIBUTES}),
    }).reindex(list(ATTRIBUTES))
    frame.loc["average"] = [report.average_accuracy, report.average_f1,
                            np.nanmean(list(report.auc.values())) if report.auc else np.nan]
    frame["jaccard"] = np.nan
    frame.loc["average", "jaccard"] = report.jaccard
    return frame


def summarize_folds(reports: Sequence[MetricReport]) -> pd.DataFrame:
    """Mean and sample standard deviation of every metric across folds."""
    if not reports:
        raise ValueError("no fold reports to summarize")
    rows = []
    for report in reports:
        row = {f"acc_{k}": v for k, v in report.accuracy.items()}
        row.update({f"f1_{k}": v for k, v in report.f1.items()})
        row.update(average_accuracy=report.average_accuracy, average_f1=report.average_f1,
                   jaccard=report.jaccard)
        rows.append(row)
    frame = pd.DataFrame(rows)
    return pd.DataFrame({"mean": frame.mean(), "std": frame.std(ddof=1).fillna(0.0)})
