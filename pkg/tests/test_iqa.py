import numpy as np
import pytest

from qualtrain import distort, iqa
from qualtrain.errors import DimensionError

from conftest import structured_images


def _brute_force_ssim(ref: np.ndarray, dist: np.ndarray) -> float:
    """Independent windowed implementation: explicit window loop, 2-D
    normalized Gaussian weights, byte-scale luminance."""
    w = np.zeros((11, 11))
    for i in range(11):
        for j in range(11):
            w[i, j] = np.exp(-((i - 5) ** 2 + (j - 5) ** 2) / (2 * 1.5 ** 2))
    w /= w.sum()
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    lum = lambda img: (img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114)
    x = lum(ref.astype(np.float64))
    y = lum(dist.astype(np.float64))
    h, wd = x.shape
    vals = []
    for i in range(h - 10):
        for j in range(wd - 10):
            px = x[i:i + 11, j:j + 11]
            py = y[i:i + 11, j:j + 11]
            mx = (w * px).sum()
            my = (w * py).sum()
            vx = (w * px * px).sum() - mx * mx
            vy = (w * py * py).sum() - my * my
            cov = (w * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def test_self_identity():
    for img in structured_images(10, seed=20):
        score = iqa.ssim(img, img)
        assert abs(score.raw - 1.0) < 1e-9
        assert score.transformed == 1.0


def test_score_map_size():
    img = structured_images(1, seed=21)[0]
    assert iqa.ssim_map(img, img).shape == (22, 22)


def test_symmetry():
    imgs = structured_images(5, seed=22)
    for img in imgs:
        blurred = distort.gaussian_blur(img, 1.0)
        assert abs(iqa.ssim(img, blurred).raw - iqa.ssim(blurred, img).raw) < 1e-9


def test_raw_bounded():
    imgs = structured_images(10, seed=23)
    for img in imgs:
        for other in (255 - img, np.zeros_like(img), np.full_like(img, 255)):
            raw = iqa.ssim(img, other).raw
            assert -1.0 - 1e-9 <= raw <= 1.0 + 1e-9


def test_inverted_textured_image_scores_low():
    img = structured_images(1, seed=24)[0]
    assert iqa.ssim(img, (255 - img).astype(np.uint8)).raw < 0.5


def test_brute_force_oracle_equivalence():
    imgs = structured_images(20, seed=25)
    pairs = []
    for i, img in enumerate(imgs):
        spec = distort.all_specs()[i % 9]
        seeds = [i] if spec.kind == "noise" else None
        pairs.append((img, distort.apply_batch(spec, img[None], seeds)[0]))
    for ref, dist in pairs:
        ours = iqa.ssim(ref, dist).raw
        oracle = _brute_force_ssim(ref, dist)
        assert abs(ours - oracle) < 1e-6


def test_blur_monotonicity_per_image():
    imgs = structured_images(100, seed=26)
    light = distort.gaussian_blur_batch(imgs, 0.7)
    heavy = distort.gaussian_blur_batch(imgs, 1.2)
    s_light = iqa.ssim_raw_batch(imgs, light)
    s_heavy = iqa.ssim_raw_batch(imgs, heavy)
    assert np.all(s_heavy <= s_light + 1e-9)


def test_transform_values():
    assert iqa.transform(0.75) == 0.75
    assert iqa.transform(-0.2) == 0.001
    assert iqa.transform(1.0) == 1.0
    assert iqa.transform(1.5) == 1.0  # guarded, numerically unreachable
    assert iqa.transform(0.0) == 0.001


def test_transform_batch_matches_scalar():
    raws = np.array([-1.0, -0.001, 0.0005, 0.25, 0.999, 1.0])
    batch = iqa.transform_batch(raws)
    for r, b in zip(raws, batch):
        assert iqa.transform(r) == b
    assert np.all(batch > 0) and np.all(batch <= 1.0)


def test_batch_matches_scalar_path():
    imgs = structured_images(8, seed=27)
    noisy = distort.apply_batch(distort.DistortionSpec("noise", 2), imgs, seeds=range(8))
    batch = iqa.ssim_raw_batch(imgs, noisy)
    for i in range(8):
        assert abs(batch[i] - iqa.ssim(imgs[i], noisy[i]).raw) < 1e-12


def test_dimension_mismatch_rejected():
    a = structured_images(1, seed=28)[0]
    with pytest.raises(DimensionError):
        iqa.ssim(a, a[:16, :, :])
    with pytest.raises(DimensionError):
        iqa.ssim(a[:8, :8, :], a[:8, :8, :])  # smaller than the window


def test_quality_scores_in_unit_interval_for_all_families():
    imgs = structured_images(30, seed=29)
    for spec in distort.all_specs():
        seeds = list(range(len(imgs))) if spec.kind == "noise" else None
        out = distort.apply_batch(spec, imgs, seeds)
        t = iqa.transform_batch(iqa.ssim_raw_batch(imgs, out))
        assert np.all(t > 0.0) and np.all(t <= 1.0)
