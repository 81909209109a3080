import numpy as np
import pytest

from TA_Errors import EmptyMaskError, ShapeMismatchError
from TA_Image_Core import (
    crop_box, crop_to_mask, erode, gray_to_rgb, read_mask, resize, rotate, to_grayscale,
    translate, write_mask,
)
from TA_Synthetic import SynthConfig, synth_generate


def _pixel(rgb, h=4, w=4):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[...] = rgb
    return img


@pytest.mark.parametrize("rgb, expected", [((255, 255, 255), 255), ((0, 0, 0), 0), ((255, 0, 0), 76)])
def test_grayscale_known_colors(rgb, expected):
    assert (to_grayscale(_pixel(rgb)) == expected).all()


def test_grayscale_of_gray_image_is_identity(rng):
    gray = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
    assert np.array_equal(to_grayscale(gray_to_rgb(gray)), gray)


def test_grayscale_rejects_two_dimensional_input():
    with pytest.raises(ShapeMismatchError):
        to_grayscale(np.zeros((4, 4), dtype=np.uint8))


def test_rotate_zero_is_identity(rng):
    img = rng.integers(0, 256, size=(20, 30, 3), dtype=np.uint8)
    assert np.array_equal(rotate(img, 0.0), img)


def test_rotate_ninety_moves_right_of_center_below_it():
    img = np.zeros((11, 11, 3), dtype=np.uint8)
    img[5, 8] = 255
    out = rotate(img, 90.0)
    assert (out[8, 5] == 255).all()
    assert out.sum() == 255 * 3


def test_rotate_back_and_forth_keeps_flat_interior():
    cfg = SynthConfig.uniform(0.0, count=3, side=128, noise=0.0, seed=5)
    for sample in synth_generate(cfg):
        back = rotate(rotate(sample.image, 30.0), -30.0)
        interior = erode(sample.mask, 7).astype(bool)
        diff = np.abs(back.astype(int) - sample.image.astype(int))[interior]
        assert diff.max() <= 3


def test_translate_moves_pixel_and_fills():
    img = np.zeros((20, 20, 3), dtype=np.uint8)
    img[5, 10] = (9, 9, 9)
    out = translate(img, 3, -2, fill=(1, 2, 3))
    assert (out[3, 13] == 9).all()
    # the uncovered stripe on the left takes the fill colour
    assert (out[:, 0] == (1, 2, 3)).all()


def test_translate_far_out_of_frame_is_all_fill():
    img = np.full((8, 8, 3), 200, dtype=np.uint8)
    assert (translate(img, 100, 0) == 0).all()


def test_zero_translation_is_identity(rng):
    img = rng.integers(0, 256, size=(15, 11, 3), dtype=np.uint8)
    assert np.array_equal(translate(img, 0, 0, fill=(7, 7, 7)), img)


def test_erode_unit_kernel_is_identity(rng):
    mask = (rng.random((12, 12)) > 0.5).astype(np.uint8)
    assert np.array_equal(erode(mask, 1), mask)


def test_erode_square_leaves_interior():
    mask = np.ones((10, 10), dtype=np.uint8)
    out = erode(mask, 3)
    assert out.sum() == 64
    assert out[1:9, 1:9].all()


def test_erode_empty_stays_empty():
    assert erode(np.zeros((6, 6), dtype=np.uint8), 5).sum() == 0


def test_erode_is_anti_extensive_and_monotone(rng):
    for _ in range(20):
        mask = (rng.random((24, 24)) > 0.3).astype(np.uint8)
        a, b = erode(mask, 3), erode(mask, 5)
        assert np.all(a <= mask)
        assert np.all(b <= a)


@pytest.mark.parametrize("k", [2, 3, 5, 9])
def test_erode_is_monotone_in_the_mask(rng, k):
    for _ in range(20):
        big = (rng.random((24, 24)) > 0.2).astype(np.uint8)
        small = big * (rng.random((24, 24)) > 0.3).astype(np.uint8)
        assert np.all(small <= big)
        assert np.all(erode(small, k) <= erode(big, k))


def _box_mask():
    mask = np.zeros((100, 100), dtype=np.uint8)
    mask[10:31, 10:21] = 1  # x 10..20, y 10..30
    return mask


def test_crop_with_margin():
    mask = _box_mask()
    assert crop_box(mask, 5) == (5, 5, 26, 36)
    assert crop_to_mask(mask, mask, 5).shape == (31, 21)


def test_crop_margin_is_clamped():
    mask = _box_mask()
    assert crop_box(mask, 50) == (0, 0, 71, 81)


def test_tight_crop_touches_mask_on_every_border():
    mask = _box_mask()
    mask[40, 60] = 1
    crop = crop_to_mask(mask, mask, 0)
    assert crop[0].any() and crop[-1].any() and crop[:, 0].any() and crop[:, -1].any()


def test_crop_of_empty_mask_raises():
    with pytest.raises(EmptyMaskError):
        crop_box(np.zeros((5, 5), dtype=np.uint8), 2)


def test_resize_to_side():
    img = np.zeros((40, 60, 3), dtype=np.uint8)
    assert resize(img, 32).shape == (32, 32, 3)


def test_mask_png_loads_back_as_bits(tmp_path, rng):
    mask = (rng.random((16, 16)) > 0.5).astype(np.uint8)
    path = str(tmp_path / "m.png")
    write_mask(path, mask)
    assert np.array_equal(read_mask(path), mask)
