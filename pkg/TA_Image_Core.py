"""
TA_Image_Core.py

Raster primitives used by the upright-orientation and region-separation stages:
grayscale conversion, rotation, translation, erosion, cropping, masking and PNG I/O.

Rasters are plain numpy arrays:
    - Image      H x W x 3, uint8, RGB
    - GrayImage  H x W, uint8
    - Mask       H x W, uint8 with values in {0, 1}

Every operation is a pure function: inputs are never modified and a new array is returned.
Geometric operations compute in float64 and round once on output.

Dependencies:
    - numpy: raster storage and arithmetic.
    - scipy: float64 affine resampling (bilinear for images, nearest for masks).
    - opencv-python-headless: morphological erosion and area resizing.
    - Pillow: PNG/JPEG decoding and PNG encoding.

Usage Example:
    >>> gray = to_grayscale(read_image("tongue.png"))
    >>> inner = erode(read_mask("tongue_mask.png"), 15)
"""

from typing import NamedTuple, Optional, Sequence, Tuple

import cv2
import numpy as np
from PIL import Image as PILImage
from PIL import ImageOps
from scipy import ndimage

from TA_Errors import EmptyMaskError, ShapeMismatchError

Image = np.ndarray
GrayImage = np.ndarray
Mask = np.ndarray
RGB = Tuple[int, int, int]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
BLACK: RGB = (0, 0, 0)


class Point(NamedTuple):
    x: float
    y: float


def check_image(img: Image) -> Image:
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ShapeMismatchError(f"expected H x W x 3 image, got {getattr(img, 'shape', type(img))}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeMismatchError("image must be at least 1 x 1")
    return img


def check_mask(mask: Mask, like: Optional[np.ndarray] = None) -> Mask:
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise ShapeMismatchError(f"expected H x W mask, got {getattr(mask, 'shape', type(mask))}")
    if like is not None and mask.shape != like.shape[:2]:
        raise ShapeMismatchError(f"mask extent {mask.shape} does not match image extent {like.shape[:2]}")
    return mask


def _round_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def to_grayscale(img: Image) -> GrayImage:
    """Rec.601 luma, rounded half-up and clamped to [0, 255]."""
    check_image(img)
    rgb = img.astype(np.float64)
    luma = rgb[..., 0] * LUMA_WEIGHTS[0] + rgb[..., 1] * LUMA_WEIGHTS[1] + rgb[..., 2] * LUMA_WEIGHTS[2]
    return _round_u8(luma)


def gray_to_rgb(gray: GrayImage) -> Image:
    return np.repeat(gray[..., None], 3, axis=2).astype(np.uint8)


def image_center(shape: Sequence[int]) -> Point:
    return Point((shape[1] - 1) / 2.0, (shape[0] - 1) / 2.0)


def _rigid_matrix(theta: float, center: Point, dx: float, dy: float):
    """
    Inverse map for "rotate by theta about center, then shift by (dx, dy)" in (row, col) order.

    theta is clockwise-positive on screen (y grows downward): a pixel right of the
    center moves below it for theta = 90.
    """
    rad = np.deg2rad(theta)
    cos, sin = np.cos(rad), np.sin(rad)
    matrix = np.array([[cos, -sin], [sin, cos]], dtype=np.float64)
    c = np.array([center.y, center.x], dtype=np.float64)
    shift = np.array([dy, dx], dtype=np.float64)
    offset = c - matrix @ (c + shift)
    return matrix, offset


def _warp_plane(plane: np.ndarray, matrix, offset, order: int, cval: float) -> np.ndarray:
    return ndimage.affine_transform(
        plane.astype(np.float64), matrix, offset=offset, output_shape=plane.shape,
        order=order, mode="constant", cval=float(cval), prefilter=False,
    )


def warp_rigid(img: Image, theta: float, center: Optional[Point] = None, dx: float = 0.0,
               dy: float = 0.0, fill: RGB = BLACK, order: int = 1) -> Image:
    """Rotate about center and then translate by (dx, dy), resampling once."""
    check_image(img)
    if not np.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta}")
    if center is None:
        center = image_center(img.shape)
    matrix, offset = _rigid_matrix(theta, center, dx, dy)
    channels = [_warp_plane(img[..., c], matrix, offset, order, fill[c]) for c in range(3)]
    return _round_u8(np.stack(channels, axis=2))


def rotate(img: Image, theta: float, center: Optional[Point] = None, fill: RGB = BLACK) -> Image:
    """Bilinear rotation by theta degrees (clockwise on screen) about center; fill outside."""
    check_image(img)
    if theta == 0:
        return img.copy()
    return warp_rigid(img, theta, center, fill=fill, order=1)


def rotate_mask(mask: Mask, theta: float, center: Optional[Point] = None, dx: float = 0.0,
                dy: float = 0.0) -> Mask:
    """Nearest-neighbour counterpart of warp_rigid for binary masks."""
    check_mask(mask)
    if theta == 0 and dx == 0 and dy == 0:
        return mask.copy()
    if center is None:
        center = image_center(mask.shape)
    matrix, offset = _rigid_matrix(theta, center, dx, dy)
    warped = _warp_plane(mask, matrix, offset, order=0, cval=0.0)
    return (warped > 0.5).astype(np.uint8)


def translate(img: np.ndarray, dx: float, dy: float, fill=BLACK) -> np.ndarray:
    """Integer shift: output (x, y) = input (x - dx, y - dy); uncovered pixels take fill."""
    if not (np.isfinite(dx) and np.isfinite(dy)):
        raise ValueError("translation must be finite")
    dx, dy = int(round(dx)), int(round(dy))
    h, w = img.shape[:2]
    out = np.empty_like(img)
    if img.ndim == 2 and isinstance(fill, tuple):
        fill = fill[0]
    out[...] = fill
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src_x0, src_x1 = max(0, -dx), min(w, w - dx)
    src_y0, src_y1 = max(0, -dy), min(h, h - dy)
    out[src_y0 + dy:src_y1 + dy, src_x0 + dx:src_x1 + dx] = img[src_y0:src_y1, src_x0:src_x1]
    return out


def erode(mask: Mask, k: int) -> Mask:
    """
    Binary erosion with a k x k square; pixels outside the raster count as 0.

    Even kernels are bumped to the next odd size so the window has a center.
    """
    check_mask(mask)
    k = max(1, int(k))
    if k % 2 == 0:
        k += 1
    binary = (mask > 0).astype(np.uint8)
    if k == 1:
        return binary
    kernel = np.ones((k, k), dtype=np.uint8)
    return cv2.erode(binary, kernel, borderType=cv2.BORDER_CONSTANT, borderValue=0)


def mask_bbox(mask: Mask) -> Tuple[int, int, int, int]:
    """Tight bounding box (x0, y0, x1, y1) with inclusive ends."""
    check_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMaskError("mask has no set pixel")
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


def crop_box(mask: Mask, m: int) -> Tuple[int, int, int, int]:
    """Bounding box grown by m on every side, clamped; returns (x0, y0, x1, y1) with exclusive ends."""
    x0, y0, x1, y1 = mask_bbox(mask)
    h, w = mask.shape
    return max(0, x0 - m), max(0, y0 - m), min(w, x1 + m + 1), min(h, y1 + m + 1)


def crop_to_mask(img: np.ndarray, mask: Mask, m: int) -> np.ndarray:
    check_mask(mask, like=img)
    x0, y0, x1, y1 = crop_box(mask, m)
    return img[y0:y1, x0:x1].copy()


def apply_mask(img: Image, mask: Mask) -> Image:
    """Per-pixel product with a binary mask; background becomes exactly 0."""
    check_mask(mask, like=img)
    return (img * (mask > 0)[..., None]).astype(np.uint8)


def mask_iou(a: Mask, b: Mask) -> float:
    a, b = a > 0, b > 0
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def resize(img: np.ndarray, side: int) -> np.ndarray:
    """Area resampling to side x side."""
    if img.shape[0] == side and img.shape[1] == side:
        return img.copy()
    return cv2.resize(img, (side, side), interpolation=cv2.INTER_AREA)


# --- file I/O ---------------------------------------------------------------

def read_image(path: str) -> Image:
    with PILImage.open(path) as im:
        return np.array(ImageOps.exif_transpose(im).convert("RGB"), dtype=np.uint8)


def read_mask(path: str) -> Mask:
    """Any nonzero sample loads as 1."""
    with PILImage.open(path) as im:
        return (np.array(im.convert("L")) > 0).astype(np.uint8)


def write_image(path: str, img: Image) -> None:
    check_image(img)
    PILImage.fromarray(img.astype(np.uint8)).save(path, format="PNG")


def write_mask(path: str, mask: Mask) -> None:
    check_mask(mask)
    PILImage.fromarray(((mask > 0) * 255).astype(np.uint8)).save(path, format="PNG")
