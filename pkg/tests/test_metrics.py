"""Evaluation metrics against hand-computed and brute-force oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandpaint.errors import DegenerateReference, DimensionMismatch, DomainError, EmptySequence
from sandpaint.metrics import (
    GlcmFeatures,
    convergence_curve,
    ddc,
    dtw,
    glcm_features,
    glcm_matrix,
    gtc,
    load_curve_csv,
    psnr,
    ssim,
)


# -- psnr ---------------------------------------------------------------------


def test_psnr_identical_caps_at_100():
    img = np.random.default_rng(0).uniform(size=(16, 16))
    assert psnr(img, img) == 100.0


def test_psnr_mse_hundredth_is_20db():
    a = np.zeros((10, 10))
    b = np.full((10, 10), 0.1)  # MSE exactly 0.01
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)


def test_psnr_known_mse_quarter():
    a = np.zeros((8, 8))
    b = np.full((8, 8), 0.5)  # MSE 0.25
    assert psnr(a, b) == pytest.approx(-10.0 * math.log10(0.25), abs=1e-9)


def test_psnr_rgb_inputs():
    a = np.zeros((6, 6, 3))
    b = np.full((6, 6, 3), 0.1)
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)


def test_psnr_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


# -- ssim ---------------------------------------------------------------------


def gaussian_window(size=11, sigma=1.5):
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_single_window_oracle(a, b):
    """Direct formula on one 11x11 patch with explicit weighted moments."""
    w = gaussian_window()
    mu_a = float(np.sum(w * a))
    mu_b = float(np.sum(w * b))
    var_a = float(np.sum(w * a * a)) - mu_a**2
    var_b = float(np.sum(w * b * b)) - mu_b**2
    cov = float(np.sum(w * a * b)) - mu_a * mu_b
    c1, c2 = 0.01**2, 0.03**2
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )


def test_ssim_identical_is_one():
    img = np.random.default_rng(3).uniform(size=(24, 24))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)


def test_ssim_matches_single_window_oracle():
    rng = np.random.default_rng(7)
    a = rng.uniform(size=(11, 11))
    b = np.clip(a + rng.normal(0, 0.1, (11, 11)), 0, 1)
    assert ssim(a, b) == pytest.approx(ssim_single_window_oracle(a, b), abs=1e-12)


def test_ssim_matches_mean_of_window_oracle():
    # 13x13 image has 3x3 valid window positions; average them by hand
    rng = np.random.default_rng(11)
    a = rng.uniform(size=(13, 13))
    b = np.clip(a + rng.normal(0, 0.2, (13, 13)), 0, 1)
    vals = [
        ssim_single_window_oracle(a[i : i + 11, j : j + 11], b[i : i + 11, j : j + 11])
        for i in range(3)
        for j in range(3)
    ]
    assert ssim(a, b) == pytest.approx(float(np.mean(vals)), abs=1e-12)


def test_ssim_inverse_image_nonpositive():
    # structured image against its negative: anti-correlated windows
    ys, xs = np.mgrid[0:24, 0:24]
    a = ((ys + xs) % 2).astype(np.float64)
    assert ssim(a, 1.0 - a) <= 0.0


def test_ssim_range_and_symmetry():
    rng = np.random.default_rng(13)
    a = rng.uniform(size=(16, 16))
    b = rng.uniform(size=(16, 16))
    v = ssim(a, b)
    assert -1.0 <= v <= 1.0
    assert ssim(b, a) == pytest.approx(v, abs=1e-12)


def test_ssim_uses_luma_for_rgb():
    rng = np.random.default_rng(17)
    rgb = rng.uniform(size=(16, 16, 3))
    from sandpaint.imgio import to_luma

    assert ssim(rgb, rgb) == pytest.approx(1.0, abs=1e-12)
    gray = to_luma(rgb)
    assert ssim(rgb, gray) == pytest.approx(1.0, abs=1e-12)


def test_ssim_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        ssim(np.zeros((16, 16)), np.zeros((16, 17)))
    with pytest.raises(DimensionMismatch):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))  # smaller than the window


# -- glcm ---------------------------------------------------------------------


def test_glcm_constant_image_zero_features():
    f = glcm_features(np.full((16, 16), 0.37), levels=32)
    assert f.contrast == 0.0
    assert f.entropy == 0.0


def test_glcm_stripes_oracle():
    # 1-px vertical stripes alternating quantization extremes, offset (0,1):
    # every horizontal pair couples levels 0 and L-1, so the symmetrized
    # matrix holds two cells of 0.5 -> contrast (L-1)^2, entropy 1 bit
    for levels in (2, 8, 32):
        img = np.zeros((12, 12))
        img[:, 1::2] = 1.0
        f = glcm_features(img, levels=levels, offsets=[(0, 1)])
        assert f.contrast == pytest.approx((levels - 1) ** 2, rel=1e-12)
        assert f.entropy == pytest.approx(1.0, abs=1e-12)


def test_glcm_matrix_normalized_per_offset():
    rng = np.random.default_rng(5)
    img = rng.uniform(size=(20, 20))
    for off in [(0, 1), (1, 0), (1, 1), (1, -1)]:
        m = glcm_matrix(img, 32, off)
        assert m.shape == (32, 32)
        assert abs(float(m.sum()) - 1.0) <= 1e-9
        np.testing.assert_allclose(m, m.T, atol=0)  # symmetrized


def test_glcm_transpose_with_transposed_offsets():
    rng = np.random.default_rng(9)
    img = rng.uniform(size=(15, 18))
    offsets = [(0, 1), (1, 0), (1, 1), (1, -1)]
    f = glcm_features(img, 32, offsets)
    ft = glcm_features(img.T, 32, [(dc, dr) for (dr, dc) in offsets])
    assert ft.contrast == pytest.approx(f.contrast, rel=1e-12)
    assert ft.entropy == pytest.approx(f.entropy, rel=1e-12)


def test_glcm_features_average_over_offsets():
    rng = np.random.default_rng(21)
    img = rng.uniform(size=(16, 16))
    offsets = [(0, 1), (1, 0)]
    singles = [glcm_features(img, 16, [o]) for o in offsets]
    both = glcm_features(img, 16, offsets)
    assert both.contrast == pytest.approx(np.mean([s.contrast for s in singles]), rel=1e-12)
    assert both.entropy == pytest.approx(np.mean([s.entropy for s in singles]), rel=1e-12)


def test_glcm_levels_validation():
    with pytest.raises(DomainError):
        glcm_features(np.zeros((8, 8)), levels=1)


def test_glcm_offset_outside_image():
    with pytest.raises(DomainError):
        glcm_matrix(np.zeros((4, 4)), 8, (0, 7))


def test_glcm_defaults():
    f = glcm_features(np.random.default_rng(2).uniform(size=(16, 16)))
    assert f.levels == 32
    assert f.offsets == [(0, 1), (1, 0), (1, 1), (1, -1)]
    assert isinstance(f, GlcmFeatures)


# -- gtc ----------------------------------------------------------------------


def textured(seed=0, shape=(16, 16)):
    return np.random.default_rng(seed).uniform(size=shape)


def test_gtc_identical_zero():
    img = textured(1)
    assert gtc(img, img) == 0.0


def test_gtc_constant_generated_is_one():
    assert gtc(np.full((16, 16), 0.5), textured(2)) == pytest.approx(1.0)


def test_gtc_constant_reference_raises():
    with pytest.raises(DegenerateReference):
        gtc(textured(3), np.full((16, 16), 0.5))


def test_gtc_asymmetric_in_general():
    a, b = textured(4), textured(5, (16, 16)) ** 3  # different feature scales
    assert gtc(a, b) != pytest.approx(gtc(b, a), rel=1e-6)


def test_gtc_nonnegative():
    assert gtc(textured(6), textured(7)) >= 0.0


# -- dtw ----------------------------------------------------------------------


def brute_force_dtw(a, b):
    """Enumerate every monotone alignment path and take the cheapest."""
    n, m = len(a), len(b)
    best = [math.inf]

    def walk(i, j, cost):
        cost += abs(a[i] - b[j])
        if cost >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = cost
            return
        if i + 1 < n:
            walk(i + 1, j, cost)
        if j + 1 < m:
            walk(i, j + 1, cost)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost)

    walk(0, 0, 0.0)
    return best[0]


def test_dtw_identical_zero():
    assert dtw([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_dtw_single_cell():
    assert dtw([0.0], [5.0]) == 5.0


def test_dtw_spec_example():
    assert dtw([1.0, 2.0, 3.0], [1.0, 3.0]) == pytest.approx(1.0)


def test_dtw_empty_raises():
    with pytest.raises(EmptySequence):
        dtw([], [1.0])
    with pytest.raises(EmptySequence):
        dtw([1.0], [])


def test_dtw_matches_brute_force_random():
    rng = np.random.default_rng(23)
    for _ in range(40):
        a = rng.uniform(0, 3, size=rng.integers(1, 5)).tolist()
        b = rng.uniform(0, 3, size=rng.integers(1, 5)).tolist()
        assert dtw(a, b) == pytest.approx(brute_force_dtw(a, b), abs=1e-12)


def test_dtw_exhaustive_small_alphabet():
    # every pair of sequences up to length 3 over {0,1,2}
    seqs = [
        list(s)
        for n in (1, 2, 3)
        for s in itertools.product((0.0, 1.0, 2.0), repeat=n)
    ]
    for a in seqs:
        for b in seqs:
            assert dtw(a, b) == pytest.approx(brute_force_dtw(a, b), abs=1e-12)


@given(
    a=st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=8),
    b=st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=8),
)
@settings(max_examples=150, deadline=None)
def test_dtw_symmetric_nonnegative(a, b):
    v = dtw(a, b)
    assert v >= 0.0
    assert dtw(b, a) == pytest.approx(v, abs=1e-9)
    assert dtw(a, a) == 0.0


# -- ddc ----------------------------------------------------------------------


def frame_sequence(seed, n, shape=(12, 12)):
    rng = np.random.default_rng(seed)
    target = rng.uniform(size=shape)
    frames = []
    start = rng.uniform(size=shape)
    for t in np.linspace(0.0, 1.0, n):
        frames.append((1 - t) * start + t * target)
    return frames, target


def test_ddc_identical_sequences_zero():
    frames, target = frame_sequence(1, 6)
    assert ddc(frames, [f.copy() for f in frames], target) == 0.0


def test_ddc_time_reversed_positive():
    frames, target = frame_sequence(2, 6)
    assert ddc(frames[::-1], frames, target) > 0.0


def test_ddc_normalizes_by_longer_length():
    frames, target = frame_sequence(3, 5)
    ref = frames[:3]
    raw_curves = (
        convergence_curve(frames, target),
        convergence_curve(ref, target),
    )
    a = raw_curves[0] / raw_curves[0][0]
    b = raw_curves[1] / raw_curves[1][0]
    expected = dtw(a.tolist(), b.tolist()) / max(len(a), len(b))
    assert ddc(frames, ref, target) == pytest.approx(expected, rel=1e-12)


def test_ddc_shift_by_one_frame_oracle():
    # curves [4,3,2,1]/4 and [3,2,1,1]/3: hand-checkable via brute force
    target = np.zeros((4, 4))
    gen = [np.full((4, 4), v) for v in (4.0, 3.0, 2.0, 1.0)]
    ref = [np.full((4, 4), v) for v in (3.0, 2.0, 1.0, 1.0)]
    a = [1.0, 0.75, 0.5, 0.25]
    b = [1.0, 2 / 3, 1 / 3, 1 / 3]
    expected = brute_force_dtw(a, b) / 4.0
    got = ddc(gen, ref, target, frame_dist="l2")
    assert got == pytest.approx(expected, rel=1e-9)


def test_ddc_one_minus_ssim_mode():
    frames, target = frame_sequence(4, 5, shape=(16, 16))
    assert ddc(frames, [f.copy() for f in frames], target, frame_dist="one_minus_ssim") == 0.0


def test_ddc_requires_two_frames():
    frames, target = frame_sequence(5, 4)
    with pytest.raises(DomainError):
        ddc(frames[:1], frames, target)
    with pytest.raises(DomainError):
        ddc(frames, frames[:1], target)


def test_ddc_unknown_mode():
    frames, target = frame_sequence(6, 3)
    with pytest.raises(DomainError):
        ddc(frames, frames, target, frame_dist="lpips")


def test_ddc_external_file_mode(tmp_path):
    gen_csv = tmp_path / "gen.csv"
    ref_csv = tmp_path / "ref.csv"
    gen_csv.write_text("frame_index,distance\n0,4.0\n1,2.0\n2,1.0\n")
    ref_csv.write_text("frame_index,distance\n1,2.0\n0,4.0\n2,1.0\n")  # order by index
    assert ddc(gen_csv, ref_csv, None, frame_dist="external_file") == 0.0

    ref2 = tmp_path / "ref2.csv"
    ref2.write_text("frame_index,distance\n0,4.0\n1,3.0\n2,1.0\n")
    a = [1.0, 0.5, 0.25]
    b = [1.0, 0.75, 0.25]
    expected = brute_force_dtw(a, b) / 3.0
    assert ddc(gen_csv, ref2, None, frame_dist="external_file") == pytest.approx(expected)


def test_load_curve_csv_sorts_by_index(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("frame_index,distance\n2,9.0\n0,1.0\n1,5.0\n")
    np.testing.assert_allclose(load_curve_csv(p), [1.0, 5.0, 9.0])


def test_convergence_curve_l2():
    target = np.zeros((3, 3))
    frames = [np.full((3, 3), 2.0), np.ones((3, 3))]
    np.testing.assert_allclose(convergence_curve(frames, target), [2.0, 1.0])
