"""
TA_Data_Ingestion.py

This module loads a dataset manifest (comma-separated, one row per tongue image) into
validated SampleRecord objects. Every malformed row is an error naming the file, row and
column; nothing is skipped silently.

Manifest header:
    image_path,mask_path,subject_id,pale,tipsidered,redspot,ecchymosis,crack,toothmark,
    furthick,furyellow,age,gender

mask_path, age and gender may be empty. Relative paths resolve against the manifest's
directory. Row numbers in diagnostics are file line numbers (the header is line 1).

Dependencies:
    - pandas: CSV parsing; all cells are read as text so validation sees the raw value.

Usage Example:
    >>> records = load_manifest("data/manifest.csv")
    >>> print(len(records), records[0].attrs.positives())
"""

import os
from dataclasses import dataclass
from typing import List, Optional

import pandas as pd

from TA_Data_Cleaning import validate_manifest
from TA_SignNet import ATTRIBUTES, AttributeVector


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    mask_path: Optional[str]
    subject_id: str
    attrs: AttributeVector
    age: Optional[float] = None
    gender: Optional[str] = None


def load_manifest(path: str) -> List[SampleRecord]:
    """
    Load a manifest file into SampleRecords, preserving row order.

    Args:
        path (str): Path of the CSV manifest.

    Returns:
        List[SampleRecord]: One record per data row.

    Raises:
        FileNotFoundError: If the manifest does not exist.
        MissingColumnError / BadBitError / DuplicatePathError / ManifestError: on malformed rows.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"manifest not found: {path}")

    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    print(f"\n✅ Manifest loaded: {path}. Shape: {frame.shape}")

    records = [SampleRecord(**row) for row in validate_manifest(frame, path)]

    counts = {name: sum(getattr(r.attrs, name) for r in records) for name in ATTRIBUTES}
    subjects = len({r.subject_id for r in records})
    print(f"🔍 {len(records)} images over {subjects} subjects; positive counts: {counts}")
    return records
