"""
TA_Orientation.py

Upright orientation of segmented tongue images. Upper and lower outlines are traced column
by column and angle-filtered, then smoothed. The tip and top are their middle points. The
image is rotated so the top->tip axis points straight down, translated so the tip sits on a
target point, and cropped around the mask.

Angle conventions:
    - theta (reported) is atan2(tip.y - top.y, tip.x - top.x) in degrees with y down,
      so an upright tongue has theta = 90.
    - applied_rotation (reported) = theta - 90, counter-clockwise positive on screen.
      The image is resampled with TA_Image_Core.rotate(img, -applied_rotation), whose
      angle is clockwise positive.

A single pass underestimates the tilt of rounded outlines because the middle column of the
filtered arc is not the rotated tip. With refine > 0 the estimate is repeated on the mask
rotated by the current correction until the residual angle drops below tolerance. theta is the
refined input axis angle, so applied_rotation = theta - 90 always holds; the single-pass
estimate is kept as initial_theta.

Dependencies:
    - numpy / scipy: column scans and the moving-average smoother.
    - opencv-python-headless: debug overlays.
    - joblib: per-image worker pool for manifest batches.
    - tqdm: progress over manifest rows.

Usage Example:
    >>> result = upright_orient(img, mask, OrientationParams())
    >>> print(result.applied_rotation, result.image.shape)
"""

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import cv2
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import ndimage
from tqdm import tqdm

from TA_Data_Ingestion import SampleRecord
from TA_Errors import DegenerateContourError, NoForegroundError
from TA_Image_Core import (
    GrayImage, Image, Mask, Point, apply_mask, check_image, check_mask, crop_box,
    image_center, mask_bbox, read_image, read_mask, rotate_mask, to_grayscale, warp_rigid,
    write_image, write_mask,
)

MIN_CONTOUR_POINTS = 3


@dataclass(frozen=True)
class Contour:
    """Ordered outline samples with strictly increasing x."""

    xs: np.ndarray
    ys: np.ndarray

    def __len__(self) -> int:
        return int(self.xs.size)

    def __getitem__(self, i: int) -> Point:
        return Point(float(self.xs[i]), float(self.ys[i]))

    @property
    def points(self) -> List[Point]:
        return [Point(float(x), float(y)) for x, y in zip(self.xs, self.ys)]

    @classmethod
    def from_points(cls, points) -> "Contour":
        arr = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy())


def odd_window(value: float) -> int:
    s = max(3, int(round(value)))
    return s if s % 2 == 1 else s + 1


@dataclass
class OrientationParams:
    alpha: float = 60.0
    s: Optional[int] = None  # None -> 5% of the image width, odd, at least 3
    m: int = 10
    target: Optional[Point] = None  # None -> (width / 2, height - m)
    refine: int = 12
    tolerance: float = 0.1

    def __post_init__(self):
        if not 0 < self.alpha < 90:
            raise ValueError(f"alpha must lie in (0, 90), got {self.alpha}")
        if self.s is not None and (self.s < 3 or self.s % 2 == 0):
            raise ValueError(f"smoothing window must be odd and >= 3, got {self.s}")
        if self.m < 0:
            raise ValueError(f"crop margin must be >= 0, got {self.m}")
        if self.refine < 0:
            raise ValueError("refine must be >= 0")

    def window_for(self, width: int) -> int:
        return self.s if self.s is not None else odd_window(0.05 * width)

    def target_for(self, width: int, height: int) -> Point:
        return self.target if self.target is not None else Point(width / 2.0, float(height - self.m))


@dataclass
class OrientationResult:
    image: Image
    mask: Mask
    frame_mask: Mask
    theta: float
    applied_rotation: float
    tip: Point
    top: Point
    crop_box: Tuple[int, int, int, int]
    initial_theta: float = 90.0
    upper: Contour = field(repr=False, default=None)
    lower: Contour = field(repr=False, default=None)
    input_tip: Point = None
    input_top: Point = None


# --- outline tracing ------------------------------------------------------

def _filter_by_angle(xs: np.ndarray, ys: np.ndarray, alpha: float) -> Contour:
    """
    Single left-to-right pass: a point is dropped when the segment from the last kept
    point is steeper than alpha. Leading points are dropped until the first segment
    within alpha so a steep extreme cannot anchor the pass.
    """
    tan_alpha = math.tan(math.radians(alpha))
    n = xs.size
    start = 0
    while start < n - 1 and abs(ys[start + 1] - ys[start]) > tan_alpha * (xs[start + 1] - xs[start]):
        start += 1
    kept = [start]
    for i in range(start + 1, n):
        j = kept[-1]
        if abs(ys[i] - ys[j]) <= tan_alpha * (xs[i] - xs[j]):
            kept.append(i)
    idx = np.asarray(kept)
    return Contour(xs[idx].astype(np.float64), ys[idx].astype(np.float64))


def detect_contours(gray: GrayImage, alpha: float) -> Tuple[Contour, Contour]:
    """Topmost and bottommost foreground pixel per column, angle-filtered."""
    check_mask(gray)
    fg = gray > 0
    cols = np.flatnonzero(fg.any(axis=0))
    if cols.size == 0:
        raise NoForegroundError("no foreground pixel in grayscale image")
    sub = fg[:, cols]
    top = sub.argmax(axis=0)
    bottom = fg.shape[0] - 1 - sub[::-1].argmax(axis=0)
    upper = _filter_by_angle(cols, top, alpha)
    lower = _filter_by_angle(cols, bottom, alpha)
    if len(upper) < MIN_CONTOUR_POINTS or len(lower) < MIN_CONTOUR_POINTS:
        raise DegenerateContourError(
            f"only {len(upper)} upper / {len(lower)} lower points survive angle filtering")
    return upper, lower


def smooth_contour(c: Contour, s: int) -> Contour:
    """Moving average of y over s neighbouring points, window truncated at the ends."""
    if s < 3 or s % 2 == 0:
        raise ValueError(f"smoothing window must be odd and >= 3, got {s}")
    kernel = np.ones(s, dtype=np.float64)
    sums = ndimage.convolve1d(c.ys, kernel, mode="constant", cval=0.0)
    counts = ndimage.convolve1d(np.ones_like(c.ys), kernel, mode="constant", cval=0.0)
    return Contour(c.xs.copy(), sums / counts)


def locate_tip_top(upper: Contour, lower: Contour) -> Tuple[Point, Point]:
    if len(upper) < MIN_CONTOUR_POINTS or len(lower) < MIN_CONTOUR_POINTS:
        raise DegenerateContourError("tip/top need at least 3 contour points")
    return lower[len(lower) // 2], upper[len(upper) // 2]


def axis_angle(tip: Point, top: Point) -> float:
    return math.degrees(math.atan2(tip.y - top.y, tip.x - top.x))


def rotate_point(p: Point, theta: float, center: Point) -> Point:
    """Forward map of TA_Image_Core.rotate (clockwise on screen)."""
    rad = math.radians(theta)
    cos, sin = math.cos(rad), math.sin(rad)
    dx, dy = p.x - center.x, p.y - center.y
    return Point(center.x + cos * dx - sin * dy, center.y + sin * dx + cos * dy)


def _estimate(gray: GrayImage, alpha: float, s: int):
    upper, lower = detect_contours(gray, alpha)
    upper_s, lower_s = smooth_contour(upper, s), smooth_contour(lower, s)
    tip, top = locate_tip_top(upper_s, lower_s)
    return upper_s, lower_s, tip, top


def upright_orient(img: Image, mask: Mask, p: Optional[OrientationParams] = None) -> OrientationResult:
    p = p or OrientationParams()
    check_image(img)
    check_mask(mask, like=img)
    mask_bbox(mask)
    h, w = mask.shape
    s = p.window_for(w)
    center = image_center(mask.shape)

    upper, lower, tip, top = _estimate(to_grayscale(img), p.alpha, s)
    theta = axis_angle(tip, top)

    frame_correction, residual = 0.0, 90.0 - theta
    frame_tip, frame_top = tip, top
    correction, previous = residual, None
    for _ in range(p.refine):
        rotated = rotate_mask(mask, correction, center) * 255
        _, _, frame_tip, frame_top = _estimate(rotated, p.alpha, s)
        frame_correction, residual = correction, 90.0 - axis_angle(frame_tip, frame_top)
        if abs(residual) <= p.tolerance:
            break
        step = residual
        if previous is not None:
            denom = previous[1] - residual
            if abs(denom) > 1e-9:
                secant = residual * (correction - previous[0]) / denom
                if secant * residual > 0 and abs(secant) <= 4.0 * abs(residual):
                    step = secant
        previous = (correction, residual)
        correction += step

    # fold the last residual in so the reported axis is exactly vertical
    total = frame_correction + residual
    tip_r = rotate_point(frame_tip, residual, center)
    top_r = rotate_point(frame_top, residual, center)
    target = p.target_for(w, h)
    dx, dy = int(round(target.x - tip_r.x)), int(round(target.y - tip_r.y))

    moved = warp_rigid(img, total, center, dx, dy, order=1)
    frame_mask = rotate_mask(mask, total, center, dx, dy)
    box = crop_box(frame_mask, p.m)
    x0, y0, x1, y1 = box
    return OrientationResult(
        image=apply_mask(moved, frame_mask)[y0:y1, x0:x1].copy(),
        mask=frame_mask[y0:y1, x0:x1].copy(),
        frame_mask=frame_mask,
        theta=90.0 - total,
        applied_rotation=-total,
        initial_theta=theta,
        tip=Point(tip_r.x + dx, tip_r.y + dy),
        top=Point(top_r.x + dx, top_r.y + dy),
        crop_box=box,
        upper=upper,
        lower=lower,
        input_tip=tip,
        input_top=top,
    )


def draw_overlay(img: Image, upper: Contour, lower: Contour, tip: Point, top: Point) -> Image:
    """Contours in green/blue, tip in red, top in yellow."""
    canvas = np.ascontiguousarray(img.copy())
    for contour, color in ((upper, (0, 255, 0)), (lower, (0, 128, 255))):
        pts = np.stack([contour.xs, contour.ys], axis=1).round().astype(np.int32).reshape(-1, 1, 2)
        cv2.polylines(canvas, [pts], isClosed=False, color=color, thickness=1)
    cv2.circle(canvas, (int(round(tip.x)), int(round(tip.y))), 4, (255, 0, 0), -1)
    cv2.circle(canvas, (int(round(top.x)), int(round(top.y))), 4, (255, 255, 0), -1)
    return canvas


# --- manifest batch ---------------------------------------------------------

def _normalize_one(record, out_dir: str, p: OrientationParams, debug: bool):
    img = read_image(record.image_path)
    if record.mask_path:
        mask = read_mask(record.mask_path)
    else:
        mask = (to_grayscale(img) > 0).astype(np.uint8)
    result = upright_orient(apply_mask(img, mask), mask, p)

    stem = os.path.splitext(os.path.basename(record.image_path))[0]
    image_path = os.path.join(out_dir, "images", f"{stem}.png")
    mask_path = os.path.join(out_dir, "masks", f"{stem}.png")
    write_image(image_path, result.image)
    write_mask(mask_path, result.mask)
    if debug:
        overlay = draw_overlay(apply_mask(img, mask), result.upper, result.lower,
                               result.input_tip, result.input_top)
        write_image(os.path.join(out_dir, "debug", f"{stem}.overlay.png"), overlay)

    row = {
        "image_path": image_path, "theta": result.theta,
        "initial_theta": result.initial_theta, "applied_rotation": result.applied_rotation,
        "tip_x": result.tip.x, "tip_y": result.tip.y, "top_x": result.top.x, "top_y": result.top.y,
    }
    return SampleRecord(image_path, mask_path, record.subject_id, record.attrs,
                        record.age, record.gender), row


def normalize_manifest(records, out_dir: str, p: Optional[OrientationParams] = None,
                       workers: int = 1, debug: bool = False):
    """
    Applies upright_orient to every manifest row and writes the uprighted images and masks.

    Returns:
        Tuple[List[SampleRecord], pd.DataFrame]: rewritten records and per-image angles.
    """
    p = p or OrientationParams()
    for sub in ("images", "masks") + (("debug",) if debug else ()):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    print(f"\n🔍 Normalizing {len(records)} images (alpha={p.alpha}, m={p.m}, workers={workers})")
    results = Parallel(n_jobs=workers)(
        delayed(_normalize_one)(r, out_dir, p, debug) for r in tqdm(records, desc="normalize")
    )
    new_records = [r for r, _ in results]
    angles = pd.DataFrame([row for _, row in results])
    print(f"✅ Uprighted {len(new_records)} images into {out_dir}")
    return new_records, angles
