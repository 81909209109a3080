"""
TA_Synthetic.py

Procedural tongue generator used as ground truth by the test-suite and by the `synth`
command. Every sample is a tapered superellipse (wide root at the top, rounded tip at the
bottom, symmetric about its axis) painted with the visual evidence of its attribute bits:

    pale        desaturated pale-white base instead of pink
    tipsidered  red band across the tip
    redspot     scattered small red dots in the body
    ecchymosis  dark purple patches near the sides
    crack       dark central polyline with side branches
    toothmark   scalloped indentations along both flanks
    furthick    textured whitish band over the body
    furyellow   yellow tint on the fur band (a thin band when furthick is 0)

The tongue is then rotated counter-clockwise by phi and shifted. Ground truth kept per sample:
phi, tip/top points, the column-wise upper/lower outline of the analytic boundary, and
the crack polylines with their rendered coverage.

Dependencies:
    - numpy: seeded per-sample Generators, geometry, blending.
    - opencv-python-headless: sub-pixel polygon fill and primitive drawing.
    - joblib: optional per-sample parallelism (each sample owns its seed).

Usage Example:
    >>> samples = synth_generate(SynthConfig(count=64, seed=7))
    >>> export_dataset(samples, "data/synth")
"""

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import cv2
import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from TA_Data_Ingestion import SampleRecord
from TA_Image_Core import Image, Mask, Point, write_image, write_mask
from TA_Orientation import Contour
from TA_Output_Storage import write_manifest, write_table
from TA_SignNet import ATTRIBUTES, AttributeVector

SHIFT = 4  # cv2 fixed-point bits for sub-pixel drawing
SCALE = 1 << SHIFT

PINK = (214.0, 112.0, 122.0)
PALE = (236.0, 198.0, 196.0)
TIP_RED = (204.0, 44.0, 54.0)
SPOT_RED = (176, 18, 38)
BRUISE = (88, 42, 86)
CRACK = (96, 36, 40)
FUR_WHITE = (232.0, 228.0, 214.0)
FUR_YELLOW = (222.0, 196.0, 92.0)


@dataclass
class SynthConfig:
    count: int = 64
    side: int = 256
    rotation_range: Tuple[float, float] = (-45.0, 45.0)
    attr_probs: Tuple[float, ...] = (0.3,) * len(ATTRIBUTES)
    noise: float = 4.0
    seed: int = 0
    pair_rate: float = 0.1
    shift_fraction: float = 0.06
    superellipse_n: float = 2.5
    taper: float = 0.25

    def __post_init__(self):
        self.attr_probs = tuple(float(p) for p in self.attr_probs)
        self.rotation_range = tuple(float(r) for r in self.rotation_range)
        if len(self.attr_probs) != len(ATTRIBUTES):
            raise ValueError(f"need {len(ATTRIBUTES)} attribute probabilities, got {len(self.attr_probs)}")
        if any(not 0.0 <= p <= 1.0 for p in self.attr_probs):
            raise ValueError(f"attribute probabilities must lie in [0, 1], got {self.attr_probs}")
        if self.side < 64:
            raise ValueError(f"image side must be >= 64, got {self.side}")
        if self.count < 0 or self.noise < 0:
            raise ValueError("count and noise must be non-negative")
        if self.rotation_range[0] > self.rotation_range[1]:
            raise ValueError(f"empty rotation range {self.rotation_range}")
        if not 0.0 <= self.pair_rate <= 1.0:
            raise ValueError(f"pair_rate must lie in [0, 1], got {self.pair_rate}")

    @classmethod
    def uniform(cls, p: float, **kwargs) -> "SynthConfig":
        return cls(attr_probs=(p,) * len(ATTRIBUTES), **kwargs)


@dataclass
class SynthSample:
    image: Image
    mask: Mask
    attrs: AttributeVector
    phi: float
    tip: Point
    top: Point
    upper: Contour
    lower: Contour
    subject_id: str = ""
    index: int = 0
    crack_paths: List[np.ndarray] = field(default_factory=list, repr=False)
    crack_coverage: Optional[float] = None

    @property
    def name(self) -> str:
        return f"synth_{self.index:05d}"


@dataclass
class _Pose:
    """Body frame (u across, v along the axis towards the tip) to image coordinates."""

    cx: float
    cy: float
    phi: float

    def to_image(self, u, v):
        rad = math.radians(self.phi)
        c, s = math.cos(rad), math.sin(rad)
        return self.cx + u * c + v * s, self.cy - u * s + v * c

    def to_body(self, x, y):
        rad = math.radians(self.phi)
        c, s = math.cos(rad), math.sin(rad)
        dx, dy = x - self.cx, y - self.cy
        return dx * c - dy * s, dx * s + dy * c


def _half_width(v, a0: float, b: float, taper: float):
    return a0 * (1.0 - taper * (np.asarray(v) / b + 1.0) / 2.0)


def _outline(cfg: SynthConfig, a0: float, b: float, toothmark: bool, n_points: int = 4000):
    t = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    e = 2.0 / cfg.superellipse_n
    ct, st = np.cos(t), np.sin(t)
    v = b * np.sign(st) * np.abs(st) ** e
    u = _half_width(v, a0, b, cfg.taper) * np.sign(ct) * np.abs(ct) ** e
    if toothmark:
        band = 0.55 * b
        phase = np.clip((v + band) / (2.0 * band), 0.0, 1.0)
        scallops = np.where(np.abs(v) < band, np.sin(np.pi * 4.0 * phase) ** 2, 0.0)
        u = u * (1.0 - 0.07 * scallops)
    return u, v


def _column_extremes(xs: np.ndarray, ys: np.ndarray, side: int) -> Tuple[Contour, Contour]:
    cols = np.floor(xs + 0.5).astype(np.int64)
    keep = (cols >= 0) & (cols < side)
    cols, ys = cols[keep], ys[keep]
    top = np.full(side, np.inf)
    bottom = np.full(side, -np.inf)
    np.minimum.at(top, cols, ys)
    np.maximum.at(bottom, cols, ys)
    present = np.flatnonzero(np.isfinite(top))
    return (Contour(present.astype(np.float64), top[present]),
            Contour(present.astype(np.float64), bottom[present]))


def _fixed(points: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(points, dtype=np.float64) * SCALE).astype(np.int32).reshape(-1, 1, 2)


def _crack_paths(rng: np.random.Generator, pose: _Pose, a0: float, b: float, cfg: SynthConfig):
    vs = np.linspace(-0.45 * b, 0.40 * b, 9)
    us = np.cumsum(rng.normal(0.0, 0.012 * cfg.side, vs.size))
    us -= us.mean()
    us = np.clip(us, -0.2 * a0, 0.2 * a0)
    main = np.stack(pose.to_image(us, vs), axis=1)
    paths = [main]
    for k in rng.choice(np.arange(2, vs.size - 2), size=2, replace=False):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        length = rng.uniform(0.25, 0.4) * float(_half_width(vs[k], a0, b, cfg.taper))
        bu = np.array([us[k], us[k] + sign * length])
        bv = np.array([vs[k], vs[k] + 0.35 * length])
        paths.append(np.stack(pose.to_image(bu, bv), axis=1))
    return paths


def _coverage(canvas: np.ndarray, mask: Mask, paths: Sequence[np.ndarray]) -> float:
    """Fraction of points sampled along the polylines that show the crack color."""
    hits = total = 0
    for path in paths:
        for p, q in zip(path[:-1], path[1:]):
            steps = max(2, int(np.ceil(np.hypot(*(q - p)) * 2)))
            for s in np.linspace(0.0, 1.0, steps):
                x, y = (int(np.floor(c + 0.5)) for c in p + s * (q - p))
                if 0 <= y < mask.shape[0] and 0 <= x < mask.shape[1] and mask[y, x]:
                    total += 1
                    hits += int(tuple(canvas[y, x]) == CRACK)
    return hits / total if total else 1.0


def _render(cfg: SynthConfig, index: int, subject_id: str) -> SynthSample:
    rng = np.random.default_rng([cfg.seed, index])
    side = cfg.side
    bits = (rng.random(len(ATTRIBUTES)) < np.asarray(cfg.attr_probs)).astype(int)
    attrs = AttributeVector.from_bits(bits)

    lo, hi = cfg.rotation_range
    phi = float(rng.uniform(lo, hi)) if hi > lo else lo
    reach = cfg.shift_fraction * side
    shift = rng.uniform(-reach, reach, 2)
    pose = _Pose(cx=(side - 1) / 2.0 + shift[0], cy=(side - 1) / 2.0 + shift[1], phi=phi)
    b = 0.30 * side * rng.uniform(0.95, 1.05)
    a0 = 0.19 * side * rng.uniform(0.95, 1.05)

    u, v = _outline(cfg, a0, b, bool(attrs.toothmark))
    px, py = pose.to_image(u, v)
    mask = np.zeros((side, side), dtype=np.uint8)
    cv2.fillPoly(mask, [_fixed(np.stack([px, py], axis=1))], 1, lineType=cv2.LINE_8, shift=SHIFT)
    upper, lower = _column_extremes(px, py, side)

    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    bu, bv = pose.to_body(xx, yy)
    base = np.asarray(PALE if attrs.pale else PINK) + rng.uniform(-6.0, 6.0, 3)
    canvas = np.broadcast_to(base, (side, side, 3)).copy()

    if attrs.tipsidered:
        canvas[bv > 0.62 * b] = TIP_RED

    if attrs.furthick or attrs.furyellow:
        fur_color = np.asarray(FUR_YELLOW if attrs.furyellow else FUR_WHITE)
        strength = 0.65 if attrs.furthick else 0.35
        band = (np.abs(bu) < 0.55 * _half_width(bv, a0, b, cfg.taper)) & (bv > -0.75 * b) & (bv < 0.25 * b)
        texture = rng.uniform(-18.0, 18.0, (side, side, 1)) if attrs.furthick else 0.0
        blended = (1.0 - strength) * canvas + strength * (fur_color + texture)
        canvas[band] = blended[band]

    canvas = np.ascontiguousarray(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))

    if attrs.redspot:
        radius = max(1, round(0.008 * side))
        for _ in range(int(rng.integers(18, 29))):
            sv = rng.uniform(-0.6 * b, 0.55 * b)
            su = rng.uniform(-0.6, 0.6) * float(_half_width(sv, a0, b, cfg.taper))
            x, y = pose.to_image(su, sv)
            cv2.circle(canvas, (round(x * SCALE), round(y * SCALE)), radius * SCALE, SPOT_RED, -1,
                       lineType=cv2.LINE_8, shift=SHIFT)

    if attrs.ecchymosis:
        axes = (max(2, round(0.035 * side)), max(2, round(0.025 * side)))
        for _ in range(int(rng.integers(2, 4))):
            sv = rng.uniform(-0.2 * b, 0.6 * b)
            su = (1.0 if rng.random() < 0.5 else -1.0) * 0.72 * float(_half_width(sv, a0, b, cfg.taper))
            x, y = pose.to_image(su, sv)
            cv2.ellipse(canvas, (round(x * SCALE), round(y * SCALE)), (axes[0] * SCALE, axes[1] * SCALE),
                        -phi, 0, 360, BRUISE, -1, lineType=cv2.LINE_8, shift=SHIFT)

    paths: List[np.ndarray] = []
    coverage = None
    if attrs.crack:
        paths = _crack_paths(rng, pose, a0, b, cfg)
        thickness = max(2, round(0.012 * side))
        cv2.polylines(canvas, [_fixed(p) for p in paths], False, CRACK, thickness,
                      lineType=cv2.LINE_8, shift=SHIFT)
        coverage = _coverage(canvas, mask, paths)

    noisy = canvas.astype(np.float64) + rng.normal(0.0, cfg.noise, canvas.shape)
    # foreground never falls to 0, so gray > 0 recovers the mask
    image = np.clip(np.floor(noisy + 0.5), 1, 255).astype(np.uint8) * mask[..., None]

    tip = Point(*pose.to_image(0.0, b))
    top = Point(*pose.to_image(0.0, -b))
    return SynthSample(image=image.astype(np.uint8), mask=mask, attrs=attrs, phi=phi, tip=tip, top=top,
                       upper=upper, lower=lower, subject_id=subject_id, index=index,
                       crack_paths=paths, crack_coverage=coverage)


def _subject_ids(cfg: SynthConfig) -> List[str]:
    rng = np.random.default_rng(cfg.seed)
    ids: List[str] = []
    subject, paired = -1, False
    for i in range(cfg.count):
        if i > 0 and not paired and rng.random() < cfg.pair_rate:
            paired = True
        else:
            subject, paired = subject + 1, False
        ids.append(f"subj{subject:05d}")
    return ids


def synth_generate(cfg: Optional[SynthConfig] = None, workers: int = 1) -> List[SynthSample]:
    cfg = cfg or SynthConfig()
    ids = _subject_ids(cfg)
    if workers == 1:
        return [_render(cfg, i, ids[i]) for i in range(cfg.count)]
    return Parallel(n_jobs=workers)(delayed(_render)(cfg, i, ids[i]) for i in range(cfg.count))


def export_dataset(samples: Sequence[SynthSample], out_dir: str) -> Tuple[str, str]:
    """
    Writes images/, masks/, manifest.csv and truth.csv (phi, tip, top per image).

    Returns:
        Tuple[str, str]: the manifest and truth file paths.
    """
    for sub in ("images", "masks"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    records, truth = [], []
    for s in samples:
        image_path = os.path.join(out_dir, "images", f"{s.name}.png")
        mask_path = os.path.join(out_dir, "masks", f"{s.name}.png")
        write_image(image_path, s.image)
        write_mask(mask_path, s.mask)
        records.append(SampleRecord(image_path, mask_path, s.subject_id, s.attrs))
        truth.append({"image_path": os.path.relpath(image_path, out_dir), "phi": s.phi,
                      "tip_x": s.tip.x, "tip_y": s.tip.y, "top_x": s.top.x, "top_y": s.top.y,
                      "crack_coverage": s.crack_coverage})
    manifest_path = os.path.join(out_dir, "manifest.csv")
    truth_path = os.path.join(out_dir, "truth.csv")
    write_manifest(records, manifest_path)
    write_table(pd.DataFrame(truth), truth_path)
    print(f"✅ Synthetic dataset of {len(samples)} images written to {out_dir}")
    return manifest_path, truth_path
