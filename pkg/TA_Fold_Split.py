"""
TA_Fold_Split.py

Subject-disjoint k-fold + hold-out partition. The hold-out subjects are drawn first and
contribute exactly one image each (a seeded draw picks it when a subject has two). The
remaining subjects are shuffled by the same seed and dealt round-robin into k folds, so
fold sizes differ by at most one subject.

Dependencies:
    - numpy: seeded Generator for the shuffle and image draws.
    - pandas: per-fold attribute count table.

Usage Example:
    >>> plan = split_folds(records, k=5, holdout_fraction=0.2, seed=1)
    >>> plan.to_json("folds.json")
"""

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from TA_Errors import TooFewSubjectsError
from TA_SignNet import ATTRIBUTES


@dataclass
class FoldPlan:
    folds: List[List[str]]
    holdout: List[str] = field(default_factory=list)
    holdout_images: Dict[str, str] = field(default_factory=dict)
    seed: int = 0

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_subjects(self, i: int) -> List[str]:
        return [s for j, fold in enumerate(self.folds) if j != i for s in fold]

    def val_subjects(self, i: int) -> List[str]:
        return list(self.folds[i])

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "folds": [list(f) for f in self.folds],
            "holdout": list(self.holdout),
            "holdout_images": dict(self.holdout_images),
        }

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "FoldPlan":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return cls(folds=[list(f) for f in data["folds"]], holdout=list(data.get("holdout", [])),
                   holdout_images=dict(data.get("holdout_images", {})), seed=int(data.get("seed", 0)))


def _images_by_subject(records) -> "OrderedDict[str, List[str]]":
    grouped: "OrderedDict[str, List[str]]" = OrderedDict()
    for r in records:
        grouped.setdefault(r.subject_id, []).append(r.image_path)
    return grouped


def split_folds(records: Sequence, k: int = 5, holdout_fraction: float = 0.0, seed: int = 0,
                holdout_count: Optional[int] = None) -> FoldPlan:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not 0 <= holdout_fraction < 1:
        raise ValueError(f"holdout fraction must lie in [0, 1), got {holdout_fraction}")

    grouped = _images_by_subject(records)
    subjects = sorted(grouped)
    n_hold = int(round(holdout_fraction * len(subjects))) if holdout_count is None else int(holdout_count)
    if n_hold < 0 or len(subjects) - n_hold < k:
        raise TooFewSubjectsError(
            f"{len(subjects)} subjects cannot fill {k} folds after holding out {n_hold}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subjects))
    holdout = [subjects[i] for i in order[:n_hold]]
    remaining = [subjects[i] for i in order[n_hold:]]
    folds = [remaining[i::k] for i in range(k)]

    holdout_images = {}
    for subject in holdout:
        images = grouped[subject]
        holdout_images[subject] = images[int(rng.integers(len(images)))] if len(images) > 1 else images[0]

    return FoldPlan(folds=folds, holdout=holdout, holdout_images=holdout_images, seed=seed)


def records_for_subjects(records: Iterable, subjects: Iterable[str]) -> List:
    wanted = set(subjects)
    return [r for r in records if r.subject_id in wanted]


def holdout_records(records: Iterable, plan: FoldPlan) -> List:
    """The single evaluated image of every hold-out subject."""
    chosen = set(plan.holdout_images.values())
    return [r for r in records if r.image_path in chosen]


def fold_attribute_counts(records: Sequence, plan: FoldPlan) -> pd.DataFrame:
    """Positive counts per attribute for every fold and the hold-out, plus subject/image totals."""
    groups = [(f"Fold{i + 1}", records_for_subjects(records, fold)) for i, fold in enumerate(plan.folds)]
    groups.append(("Test", holdout_records(records, plan)))
    rows = []
    for name, rs in groups:
        row = {"split": name, "subjects": len({r.subject_id for r in rs}), "images": len(rs)}
        row.update({attr: sum(getattr(r.attrs, attr) for r in rs) for attr in ATTRIBUTES})
        rows.append(row)
    return pd.DataFrame(rows).set_index("split")
