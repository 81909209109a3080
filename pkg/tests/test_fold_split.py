import numpy as np
import pytest

from TA_Data_Ingestion import SampleRecord
from TA_Errors import TooFewSubjectsError
from TA_Fold_Split import (
    FoldPlan, fold_attribute_counts, holdout_records, records_for_subjects, split_folds,
)
from TA_SignNet import AttributeVector


def _records(n_subjects: int, doubles: int = 0, seed: int = 0):
    gen = np.random.default_rng(seed)
    records = []
    for s in range(n_subjects):
        for k in range(2 if s < doubles else 1):
            bits = gen.integers(0, 2, size=8)
            records.append(SampleRecord(f"/data/s{s:05d}_{k}.png", None, f"s{s:05d}",
                                        AttributeVector.from_bits(bits)))
    return records


def _check_plan(plan: FoldPlan, records, k: int):
    subjects = {r.subject_id for r in records}
    in_folds = [s for fold in plan.folds for s in fold]
    assert len(in_folds) == len(set(in_folds))
    assert not set(in_folds) & set(plan.holdout)
    assert set(in_folds) | set(plan.holdout) == subjects
    sizes = [len(f) for f in plan.folds]
    assert len(sizes) == k and max(sizes) - min(sizes) <= 1
    by_image = {r.image_path: r.subject_id for r in records}
    assert sorted(plan.holdout_images) == sorted(plan.holdout)
    for subject, image in plan.holdout_images.items():
        assert by_image[image] == subject


def test_ten_subjects_five_folds():
    records = _records(10)
    plan = split_folds(records, k=5, seed=0)
    assert [len(f) for f in plan.folds] == [2] * 5
    assert plan.holdout == []
    _check_plan(plan, records, 5)


def test_train_and_validation_subjects_partition():
    records = _records(12)
    plan = split_folds(records, k=3, seed=1)
    for i in range(3):
        train, val = set(plan.train_subjects(i)), set(plan.val_subjects(i))
        assert not train & val
        assert len(train) + len(val) == 12


def test_images_of_a_subject_stay_together():
    records = _records(20, doubles=8)
    plan = split_folds(records, k=4, seed=2)
    for fold in plan.folds:
        chosen = records_for_subjects(records, fold)
        assert {r.subject_id for r in chosen} == set(fold)
        assert len(chosen) == sum(2 if int(s[1:]) < 8 else 1 for s in fold)


def test_same_seed_same_plan(tmp_path):
    records = _records(40, doubles=10)
    a = split_folds(records, k=5, holdout_fraction=0.2, seed=9)
    b = split_folds(records, k=5, holdout_fraction=0.2, seed=9)
    assert a == b
    path = str(tmp_path / "folds.json")
    a.to_json(path)
    assert FoldPlan.from_json(path) == a
    assert split_folds(records, k=5, holdout_fraction=0.2, seed=10) != a


def test_plans_hold_over_many_seeds():
    for seed in range(30):
        gen = np.random.default_rng(seed)
        n = int(gen.integers(10, 60))
        records = _records(n, doubles=int(gen.integers(0, n)), seed=seed)
        k = int(gen.integers(2, 6))
        plan = split_folds(records, k=k, holdout_fraction=float(gen.uniform(0, 0.5)), seed=seed)
        _check_plan(plan, records, k)


def test_too_few_subjects():
    with pytest.raises(TooFewSubjectsError):
        split_folds(_records(4), k=5)
    with pytest.raises(TooFewSubjectsError):
        split_folds(_records(6), k=5, holdout_count=2)


def test_k_below_two_is_rejected():
    with pytest.raises(ValueError):
        split_folds(_records(6), k=1)


def test_count_table_rows():
    records = _records(30, doubles=5)
    plan = split_folds(records, k=5, holdout_count=5, seed=3)
    table = fold_attribute_counts(records, plan)
    assert list(table.index) == ["Fold1", "Fold2", "Fold3", "Fold4", "Fold5", "Test"]
    assert table.loc["Test", "images"] == 5 == table.loc["Test", "subjects"]
    assert table["subjects"].sum() == 30
    held = holdout_records(records, plan)
    assert table.loc["Test", "pale"] == sum(r.attrs.pale for r in held)


@pytest.mark.slow
def test_full_cohort_proportions():
    records = _records(4650, doubles=459)
    assert len(records) == 5109
    plan = split_folds(records, k=5, holdout_fraction=895 / 4650, seed=0)
    assert len(plan.holdout) == 895
    assert [len(f) for f in plan.folds] == [751] * 5
    assert len(holdout_records(records, plan)) == 895
    _check_plan(plan, records, 5)
