import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flamecov.errors import DimensionMismatchError
from flamecov.pgm import read_pgm, write_mask, write_pgm
from flamecov.silhouette import (Silhouette, ThermalImage, is_boundary_pixel, mask_iou,
                                 mask_precision, mask_recall, threshold, trace_boundary)


def test_uniform_image_full_mask():
    sil = threshold(ThermalImage(np.full((120, 160), 100)), 50)
    assert sil.mask.all()
    assert np.allclose(sil.centroid, [79.5, 59.5])


def test_uniform_image_above_threshold_is_empty():
    sil = threshold(ThermalImage(np.full((120, 160), 100)), 200)
    assert sil.empty and sil.centroid is None and len(sil.boundary) == 0


def test_block_centroid_and_boundary():
    img = np.zeros((120, 160), dtype=np.uint16)
    img[30:40, 20:30] = 500  # rows are y, columns are x
    sil = threshold(ThermalImage(img), 100)
    assert np.allclose(sil.centroid, [24.5, 34.5])
    assert len(sil.boundary) == 36
    # brute-force perimeter count
    m = sil.mask
    brute = sum(is_boundary_pixel(m, x, y) for y, x in zip(*np.nonzero(m)))
    assert brute == 36


def test_threshold_keeps_largest_blob():
    img = np.zeros((50, 50), dtype=np.uint16)
    img[5:8, 5:8] = 900
    img[20:30, 20:30] = 900
    sil = threshold(img, 100)
    assert sil.area == 100


def test_single_pixel_boundary():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 3] = True
    b = trace_boundary(m)
    assert b.tolist() == [[3, 2]]


def test_square_boundary_counter_clockwise():
    m = np.zeros((6, 6), dtype=bool)
    m[1:4, 1:4] = True
    b = trace_boundary(m)
    assert len(b) == 8
    assert len({tuple(p) for p in b}) == 8
    assert b[0].tolist() == [1, 1]
    # counter-clockwise on screen (y down) means down the left side first
    assert b[1].tolist() == [1, 2]
    x, y = b[:, 0].astype(float), b[:, 1].astype(float)
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    # with y pointing down, counter-clockwise on screen has negative shoelace area
    assert signed < 0


def test_iou_examples():
    a = np.zeros((20, 30), dtype=bool)
    a[5:15, 5:15] = True
    assert mask_iou(a, a) == 1.0
    b = np.zeros_like(a)
    b[5:15, 20:25] = True
    assert mask_iou(a, b) == 0.0
    c = np.zeros_like(a)
    c[5:15, 10:20] = True
    assert mask_iou(a, c) == pytest.approx(50 / 150)


def test_mask_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        mask_iou(np.zeros((3, 3), bool), np.zeros((3, 4), bool))


def test_precision_of_empty_prediction():
    gt = np.zeros((4, 4), dtype=bool)
    assert mask_precision(gt, gt) == 1.0
    gt[1, 1] = True
    assert mask_precision(np.zeros_like(gt), gt) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_iou_bounded_by_precision_and_recall(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((12, 12)) < rng.random()
    b = rng.random((12, 12)) < rng.random()
    iou = mask_iou(a, b)
    assert 0.0 <= iou <= 1.0
    assert iou == pytest.approx(mask_iou(b, a))
    assert iou <= min(mask_precision(a, b), mask_recall(a, b)) + 1e-12


def test_silhouette_is_read_only():
    sil = Silhouette(np.ones((3, 3), bool))
    with pytest.raises(ValueError):
        sil.mask[0, 0] = False


@pytest.mark.parametrize("dtype", [np.uint8, np.uint16])
def test_pgm_round_trip(tmp_path, dtype):
    a = (np.arange(12 * 7).reshape(7, 12) * 97 % np.iinfo(dtype).max).astype(dtype)
    write_pgm(tmp_path / "a.pgm", a)
    b = read_pgm(tmp_path / "a.pgm")
    assert b.dtype == dtype and np.array_equal(a, b)


def test_pgm_comments_and_mask(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    assert read_pgm(p).tolist() == [[0, 255]]
    write_mask(tmp_path / "m.pgm", [[True, False]])
    assert read_pgm(tmp_path / "m.pgm").tolist() == [[255, 0]]


def test_pgm_rejects_garbage(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n255\n\x00")
    with pytest.raises(ValueError):
        read_pgm(p)
