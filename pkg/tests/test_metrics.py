"""Quality metrics: PSNR, windowed SSIM, relative error."""

import numpy as np
import pytest

from tubal import ImagePair, psnr, rel_error, ssim


def rand(shape, seed):
    return np.random.default_rng(seed).random(shape)


# ------------------------------------------------------------------ ImagePair


def test_pair_validation():
    with pytest.raises(ValueError):
        ImagePair(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        ImagePair(np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        ImagePair(np.zeros((4, 4)), np.zeros((4, 4)), peak=0.0)


# ----------------------------------------------------------------------- psnr


def test_psnr_of_uniform_offset():
    ref = np.zeros((4, 4))
    test = np.full((4, 4), 0.1)
    assert abs(psnr(ImagePair(ref, test)) - 20.0) <= 1e-12
    # quadrupling peak^2 adds 10*log10(4) dB
    want = 10.0 * np.log10(400.0)
    assert abs(psnr(ImagePair(ref, test, peak=2.0)) - want) <= 1e-12


def test_psnr_identical_images_is_infinite():
    a = rand((5, 6), 0)
    assert psnr(ImagePair(a, a)) == float("inf")


def test_psnr_uses_mean_square_error():
    ref = rand((6, 7), 1)
    test = rand((6, 7), 2)
    mse = np.mean((ref - test) ** 2)
    want = 10.0 * np.log10(1.0 / mse)
    assert abs(psnr(ImagePair(ref, test)) - want) <= 1e-12


# ----------------------------------------------------------------------- ssim


def ssim_loop_oracle(x, y, peak=1.0, window=8, k1=0.01, k2=0.03):
    """Scores every window with explicit slicing and sample statistics."""
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    scores = []
    for i in range(x.shape[0] - window + 1):
        for j in range(x.shape[1] - window + 1):
            wx = x[i : i + window, j : j + window].ravel()
            wy = y[i : i + window, j : j + window].ravel()
            mx, my = wx.mean(), wy.mean()
            vx, vy = wx.var(ddof=1), wy.var(ddof=1)
            cov = ((wx - mx) * (wy - my)).sum() / (wx.size - 1)
            scores.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx**2 + my**2 + c1) * (vx + vy + c2))
            )
    return float(np.mean(scores))


def test_ssim_identical_images_is_one():
    a = rand((12, 9), 3)
    assert ssim(ImagePair(a, a)) == 1.0


def test_ssim_of_constant_offset_matches_closed_form():
    x = np.zeros((10, 10))
    y = np.full((10, 10), 0.5)
    c1 = 1e-4
    want = c1 / (0.25 + c1)
    got = ssim(ImagePair(x, y))
    assert abs(got - want) <= 1e-12


def test_ssim_matches_loop_oracle():
    x, y = rand((13, 11), 4), rand((13, 11), 5)
    got = ssim(ImagePair(x, y))
    want = ssim_loop_oracle(x, y)
    assert abs(got - want) <= 1e-10
    got5 = ssim(ImagePair(x, y, peak=0.5), window=5)
    want5 = ssim_loop_oracle(x, y, peak=0.5, window=5)
    assert abs(got5 - want5) <= 1e-10


def test_ssim_averages_frontal_slices():
    x, y = rand((10, 10, 3), 6), rand((10, 10, 3), 7)
    per_slice = [ssim(ImagePair(x[:, :, k], y[:, :, k])) for k in range(3)]
    assert abs(ssim(ImagePair(x, y)) - np.mean(per_slice)) <= 1e-12


def test_ssim_rejects_window_larger_than_image():
    a = rand((5, 5), 8)
    with pytest.raises(ValueError):
        ssim(ImagePair(a, a), window=8)


def test_ssim_is_symmetric_and_below_one():
    x, y = rand((12, 12), 9), rand((12, 12), 10)
    assert abs(ssim(ImagePair(x, y)) - ssim(ImagePair(y, x))) <= 1e-12
    assert ssim(ImagePair(x, y)) < 1.0


# ------------------------------------------------------------------ rel_error


def test_rel_error_basic_identities():
    a = rand((4, 5, 3), 11)
    assert rel_error(a, a) == 0.0
    assert abs(rel_error(2 * a, a) - 1.0) <= 1e-12
    assert abs(rel_error(np.zeros_like(a), a) - 1.0) <= 1e-12


def test_rel_error_matches_norm_ratio():
    x, ref = rand((6, 6), 12), rand((6, 6), 13)
    want = np.linalg.norm(x - ref) / np.linalg.norm(ref)
    assert abs(rel_error(x, ref) - want) <= 1e-12


def test_rel_error_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rel_error(np.zeros((3, 3)), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        rel_error(np.ones((3, 3)), np.zeros((3, 3)))
