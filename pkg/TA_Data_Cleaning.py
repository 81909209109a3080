"""
TA_Data_Cleaning.py

Row-level validation of a manifest DataFrame. Converts raw text cells into typed values
(attribute bits, optional age, normalized gender) and rejects anything malformed with an
error that names the file, row and column.

Dependencies:
    - pandas: the raw manifest frame (all cells as strings).

Usage Example:
    >>> rows = validate_manifest(pd.read_csv(path, dtype=str, keep_default_na=False), path)
"""

import os
from typing import Dict, List, Optional

import pandas as pd

from TA_Errors import BadBitError, DuplicatePathError, ManifestError, MissingColumnError
from TA_SignNet import ATTRIBUTES, AttributeVector

MANIFEST_COLUMNS = ("image_path", "mask_path", "subject_id") + ATTRIBUTES + ("age", "gender")
REQUIRED_COLUMNS = ("image_path", "subject_id") + ATTRIBUTES

GENDERS = {"f": "F", "female": "F", "m": "M", "male": "M", "o": "O", "other": "O"}


def _line(index: int) -> int:
    # header occupies line 1
    return int(index) + 2


def _resolve(value: str, base: str) -> str:
    if not value or os.path.isabs(value):
        return value
    return os.path.normpath(os.path.join(base, value))


def _parse_age(raw: str, path: str, line: int) -> Optional[float]:
    if raw == "":
        return None
    try:
        age = float(raw)
    except ValueError:
        raise ManifestError(f"age must be a number, got {raw!r}", path, line, "age") from None
    if not 0 <= age < 150:
        raise ManifestError(f"age out of range: {raw}", path, line, "age")
    return age


def _parse_gender(raw: str, path: str, line: int) -> Optional[str]:
    if raw == "":
        return None
    gender = GENDERS.get(raw.lower())
    if gender is None:
        raise ManifestError(f"unknown gender {raw!r}", path, line, "gender")
    return gender


def validate_manifest(frame: pd.DataFrame, path: str = "") -> List[Dict]:
    """
    Validate every row of a raw manifest.

    Args:
        frame (pd.DataFrame): Manifest read with dtype=str and keep_default_na=False.
        path (str): Manifest path, used for diagnostics and relative path resolution.

    Returns:
        List[Dict]: One dict per row with the SampleRecord fields.
    """
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumnError(f"manifest lacks required column(s) {missing}", path, column=missing[0])

    base = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
    frame = frame.apply(lambda col: col.str.strip())
    seen: Dict[str, int] = {}
    rows: List[Dict] = []
    for index, raw in frame.iterrows():
        line = _line(index)
        image_path = raw["image_path"]
        if image_path == "":
            raise ManifestError("empty image_path", path, line, "image_path")
        if image_path in seen:
            raise DuplicatePathError(f"image_path {image_path!r} already listed on row {seen[image_path]}",
                                     path, line, "image_path")
        seen[image_path] = line

        subject = raw["subject_id"]
        if subject == "":
            raise ManifestError("empty subject_id", path, line, "subject_id")

        bits = []
        for name in ATTRIBUTES:
            value = raw[name]
            if value not in ("0", "1"):
                raise BadBitError(f"attribute must be 0 or 1, got {value!r}", path, line, name)
            bits.append(int(value))

        mask_path = raw["mask_path"] if "mask_path" in frame.columns else ""
        rows.append({
            "image_path": _resolve(image_path, base),
            "mask_path": _resolve(mask_path, base) or None,
            "subject_id": subject,
            "attrs": AttributeVector.from_bits(bits),
            "age": _parse_age(raw["age"], path, line) if "age" in frame.columns else None,
            "gender": _parse_gender(raw["gender"], path, line) if "gender" in frame.columns else None,
        })

    if not rows:
        print(f"⚠️ Manifest {path} has no data rows")
    return rows
