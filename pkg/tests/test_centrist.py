import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groupaffect import centrist as C

OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def naive_census(img):
    img = np.asarray(img, dtype=np.int64)
    h, w = img.shape
    out = np.zeros((h - 2, w - 2), dtype=np.int64)
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            code = 0
            for dr, dc in OFFSETS:
                code = (code << 1) | int(img[r, c] >= img[r + dr, c + dc])
            out[r - 1, c - 1] = code
    return out


def naive_descriptor(census):
    h, w = census.shape
    out = []
    for r0, r1, c0, c1 in C.pyramid_blocks(h, w):
        hist = np.zeros(256)
        for r in range(h):
            for c in range(w):
                if r0 <= r < r1 and c0 <= c < c1:
                    hist[census[r, c]] += 1
        hist = hist[1:]
        out.append(hist / hist.sum() if hist.sum() else hist)
    return np.concatenate(out)


images = arrays(np.uint8, st.tuples(st.integers(3, 14), st.integers(3, 14)))


def test_uniform_patch_is_255():
    np.testing.assert_array_equal(C.census_transform(np.full((3, 3), 7)), [[255]])


def test_strict_minimum_center_is_0():
    img = np.full((3, 3), 255, dtype=np.uint8)
    img[1, 1] = 0
    np.testing.assert_array_equal(C.census_transform(img), [[0]])


def test_bit_order_msb_is_northwest():
    img = np.full((3, 3), 200, dtype=np.uint8)
    img[1, 1] = 100
    img[0, 0] = 50
    assert C.census_transform(img)[0, 0] == 0b10000000
    img[0, 0] = 200
    img[2, 2] = 50
    assert C.census_transform(img)[0, 0] == 0b00000001


def test_random_image_matches_naive_oracle(rng):
    img = rng.integers(0, 256, size=(64, 64)).astype(np.uint8)
    np.testing.assert_array_equal(C.census_transform(img), naive_census(img))


def test_too_small():
    with pytest.raises(C.ImageTooSmallError):
        C.census_transform(np.zeros((2, 5)))
    with pytest.raises(C.ImageTooSmallError):
        C.centrist(np.zeros((5, 5)))


def test_rejects_bad_intensities():
    with pytest.raises(ValueError):
        C.census_transform(np.full((4, 4), 300))
    with pytest.raises(ValueError):
        C.census_transform(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        C.census_transform(np.zeros((4, 4, 3)))


def test_pyramid_geometry():
    blocks = C.pyramid_blocks(40, 80)
    assert len(blocks) == C.N_BLOCKS == 31
    np.testing.assert_array_equal(blocks[0], [0, 40, 0, 80])
    np.testing.assert_array_equal(blocks[1:5], [[0, 20, 0, 40], [0, 20, 40, 80], [20, 40, 0, 40], [20, 40, 40, 80]])
    np.testing.assert_array_equal(blocks[5], [10, 30, 20, 60])
    np.testing.assert_array_equal(blocks[6], [0, 10, 0, 20])
    np.testing.assert_array_equal(blocks[21], [30, 40, 60, 80])
    np.testing.assert_array_equal(blocks[22], [5, 15, 10, 30])
    np.testing.assert_array_equal(blocks[30], [25, 35, 50, 70])


def test_odd_sizes_absorb_remainder():
    blocks = C.pyramid_blocks(9, 11)
    np.testing.assert_array_equal(blocks[4], [4, 9, 5, 11])
    np.testing.assert_array_equal(blocks[21], [6, 9, 6, 11])


def test_all_255_codes_are_one_hot_at_254():
    d = C.centrist_descriptor(np.full((20, 30), 255, dtype=np.uint8)).reshape(31, 255)
    expected = np.zeros(255)
    expected[254] = 1.0
    np.testing.assert_array_equal(d, np.tile(expected, (31, 1)))


def test_descriptor_matches_block_loop_oracle(rng):
    census = rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
    np.testing.assert_allclose(C.centrist_descriptor(census), naive_descriptor(census), rtol=0, atol=1e-15)


def test_pgm_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, size=(13, 17)).astype(np.uint8)
    C.write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(C.read_pgm(tmp_path / "a.pgm"), img)
    np.testing.assert_array_equal(C.read_pnm_gray(tmp_path / "a.pgm"), img)


def test_ppm_converted_to_gray(tmp_path):
    rgb = np.zeros((2, 3, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    (tmp_path / "a.ppm").write_bytes(b"P6\n# red\n3 2\n255\n" + rgb.tobytes())
    np.testing.assert_array_equal(C.read_pnm_gray(tmp_path / "a.ppm"), np.full((2, 3), 76))


def test_vga_runtime(rng):
    img = rng.integers(0, 256, size=(480, 640)).astype(np.uint8)
    start = time.perf_counter()
    d = C.centrist(img)
    assert time.perf_counter() - start < 1.0
    assert d.shape == (7905,)


@settings(max_examples=60, deadline=None)
@given(images)
def test_census_matches_oracle_on_any_image(img):
    np.testing.assert_array_equal(C.census_transform(img), naive_census(img))


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(6, 20), st.integers(6, 20))), st.data())
def test_crop_consistency(img, data):
    h, w = img.shape
    r0 = data.draw(st.integers(0, h - 3))
    c0 = data.draw(st.integers(0, w - 3))
    r1 = data.draw(st.integers(r0 + 3, h))
    c1 = data.draw(st.integers(c0 + 3, w))
    np.testing.assert_array_equal(C.census_transform(img[r0:r1, c0:c1]),
                                  C.census_transform(img)[r0:r1 - 2, c0:c1 - 2])


@settings(max_examples=40, deadline=None)
@given(images, st.integers(0, 255))
def test_constant_offset_invariance(img, c):
    if int(img.max()) + c > 255:
        c = 255 - int(img.max())
    shifted = img.astype(np.int64) + c
    np.testing.assert_array_equal(C.census_transform(shifted), C.census_transform(img))


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(6, 30), st.integers(6, 30))))
def test_length_and_block_sums(img):
    census = C.census_transform(img)
    d = C.centrist_descriptor(census)
    assert d.shape == (C.DESCRIPTOR_DIM,) == (7905,)
    sums = d.reshape(31, 255).sum(axis=1)
    for (r0, r1, c0, c1), s in zip(C.pyramid_blocks(*census.shape), sums):
        has_kept_code = np.any(census[r0:r1, c0:c1] != 0)
        assert s == pytest.approx(1.0 if has_kept_code else 0.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(4, 20), st.integers(4, 20))), st.randoms(use_true_random=False))
def test_level0_histogram_ignores_pixel_order(census, random):
    flat = census.ravel().copy()
    random.shuffle(flat)
    whole = np.array([[0, census.shape[0], 0, census.shape[1]]])
    np.testing.assert_array_equal(C.block_histograms(census, whole),
                                  C.block_histograms(flat.reshape(census.shape), whole))
