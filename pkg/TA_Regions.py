"""
TA_Regions.py

Splits an uprighted tongue into an edge band and a body region. The edge band is the mask
minus its erosion by an adaptive square kernel (side = floor(diagonal * r)), with the top
fifth of the rows removed. The body is everything else in the mask.

Dependencies:
    - numpy: mask arithmetic.
    - joblib / tqdm: per-image batch separation over a manifest.

Usage Example:
    >>> pair = separate_regions(img, mask, RegionParams(r=0.191))
    >>> write_image("tongue.body.png", pair.body)
"""

import math
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from TA_Image_Core import (
    Image, Mask, apply_mask, check_image, check_mask, erode, mask_bbox, read_image, read_mask,
    to_grayscale, write_image, write_mask,
)

DEFAULT_EDGE_RATIO = 0.191


@dataclass
class RegionParams:
    r: float = DEFAULT_EDGE_RATIO

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ValueError(f"edge width ratio must lie in (0, 1), got {self.r}")


@dataclass
class RegionPair:
    body: Image
    edge: Image
    body_mask: Mask
    edge_mask: Mask
    edge_width: int = 0


def edge_width(h: int, w: int, r: float) -> int:
    if h < 1 or w < 1:
        raise ValueError(f"extent must be at least 1 x 1, got {h} x {w}")
    return int(math.floor(math.hypot(h, w) * r))


def separate_regions(img: Image, mask: Mask, p: Optional[RegionParams] = None) -> RegionPair:
    p = p or RegionParams()
    check_image(img)
    check_mask(mask, like=img)
    mask_bbox(mask)
    h, w = mask.shape
    full = (mask > 0).astype(np.uint8)
    e_w = edge_width(h, w, p.r)
    # a 1-px band still needs a 3x3 window
    inner = erode(full, max(e_w, 3)) if e_w >= 1 else full
    edge_mask = full - inner
    # top fifth goes back to the body
    edge_mask[: h // 5, :] = 0
    body_mask = full - edge_mask
    return RegionPair(
        body=apply_mask(img, body_mask),
        edge=apply_mask(img, edge_mask),
        body_mask=body_mask,
        edge_mask=edge_mask,
        edge_width=e_w,
    )


def _separate_one(record, out_dir: str, p: RegionParams) -> dict:
    img = read_image(record.image_path)
    mask = read_mask(record.mask_path) if record.mask_path else (to_grayscale(img) > 0).astype(np.uint8)
    pair = separate_regions(apply_mask(img, mask), mask, p)
    stem = os.path.splitext(os.path.basename(record.image_path))[0]
    paths = {
        "image_path": record.image_path,
        "body_path": os.path.join(out_dir, f"{stem}.body.png"),
        "edge_path": os.path.join(out_dir, f"{stem}.edge.png"),
        "body_mask_path": os.path.join(out_dir, f"{stem}.body_mask.png"),
        "edge_mask_path": os.path.join(out_dir, f"{stem}.edge_mask.png"),
    }
    write_image(paths["body_path"], pair.body)
    write_image(paths["edge_path"], pair.edge)
    write_mask(paths["body_mask_path"], pair.body_mask)
    write_mask(paths["edge_mask_path"], pair.edge_mask)
    paths["edge_width"] = pair.edge_width
    paths["edge_pixels"] = int(pair.edge_mask.sum())
    paths["body_pixels"] = int(pair.body_mask.sum())
    return paths


def separate_batch(records, out_dir: str, p: Optional[RegionParams] = None, workers: int = 1) -> List[dict]:
    """
    Writes <stem>.body.png, <stem>.edge.png and both masks for every record.

    Returns:
        List[dict]: one row per image with the written paths and region pixel counts.
    """
    p = p or RegionParams()
    os.makedirs(out_dir, exist_ok=True)
    print(f"\n🔍 Separating body/edge regions for {len(records)} images (r={p.r}, workers={workers})")
    rows = Parallel(n_jobs=workers)(
        delayed(_separate_one)(r, out_dir, p) for r in tqdm(records, desc="separate")
    )
    print(f"✅ Region images written to {out_dir}")
    return rows
