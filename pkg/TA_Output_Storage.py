"""
TA_Output_Storage.py

This module handles the storage of pipeline outputs to the local filesystem: manifests
(CSV), metric reports and fold plans (JSON), tables (CSV), per-image predictions and ROC
point files (two-column text readable by any plotting tool).

Project Scope:
    - Creates necessary directories if they do not exist.
    - Writes manifests with paths relative to the manifest's own directory.
    - Writes structured JSON for reports and plain CSV for tables.

Dependencies:
    - json: Used for serializing reports into JSON format.
    - pandas: Used for handling and writing tabular data.
    - os: Provides file and directory manipulation functionalities.

Usage Example:
    >>> store_output(report.to_dict(), "./out/", "report.json")
    ✅ JSON output stored at ./out/report.json
"""

import json
import os
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from TA_Data_Cleaning import MANIFEST_COLUMNS
from TA_SignNet import ATTRIBUTES


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_json(data: Dict[str, Any], path: str) -> None:
    ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(data), f, indent=4, sort_keys=True)
        f.write("\n")


def write_table(frame: pd.DataFrame, path: str, index: bool = False) -> None:
    ensure_parent(path)
    frame.to_csv(path, index=index, float_format="%.10g")


def store_output(data: Union[Dict[str, Any], pd.DataFrame], directory: str, name: str) -> str:
    """
    Stores a dictionary as JSON or a DataFrame as CSV under directory/name.

    Returns:
        str: The written file path.
    """
    os.makedirs(directory, exist_ok=True)
    file_path = os.path.join(directory, name)
    if isinstance(data, pd.DataFrame):
        write_table(data, file_path, index=True)
        print(f"✅ Table output stored at {file_path}")
    elif isinstance(data, dict):
        write_json(data, file_path)
        print(f"✅ JSON output stored at {file_path}")
    else:
        raise TypeError(f"unsupported output type {type(data).__name__}")
    return file_path


def write_manifest(records: Iterable, path: str) -> None:
    ensure_parent(path)
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return os.path.relpath(os.path.abspath(p), base) if p else ""

    rows = []
    for r in records:
        row = {"image_path": rel(r.image_path), "mask_path": rel(r.mask_path), "subject_id": r.subject_id}
        row.update(dict(zip(ATTRIBUTES, r.attrs.to_bits())))
        row["age"] = "" if r.age is None else f"{r.age:g}"
        row["gender"] = r.gender or ""
        rows.append(row)
    pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS)).to_csv(path, index=False)


def write_predictions(image_paths: Sequence[str], probs: np.ndarray, bits: np.ndarray, path: str) -> None:
    """CSV with image_path, the 8 predicted bits and an <attr>_score column per attribute."""
    frame = pd.DataFrame({"image_path": list(image_paths)})
    for j, name in enumerate(ATTRIBUTES):
        frame[name] = np.asarray(bits)[:, j].astype(int)
    for j, name in enumerate(ATTRIBUTES):
        frame[f"{name}_score"] = np.asarray(probs)[:, j]
    write_table(frame, path)


def write_roc_points(points: List[Tuple[float, float]], path: str) -> None:
    ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write("# fpr tpr\n")
        for fpr, tpr in points:
            f.write(f"{fpr:.10f} {tpr:.10f}\n")


def read_roc_points(path: str) -> List[Tuple[float, float]]:
    points = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            fpr, tpr = line.split()
            points.append((float(fpr), float(tpr)))
    return points


def append_jsonl(record: Dict[str, Any], path: str) -> None:
    ensure_parent(path)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(_plain(record), sort_keys=True) + "\n")
