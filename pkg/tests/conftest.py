import numpy as np
import pytest

from qualtrain import dataset


def structured_images(n: int, seed: int = 0, side: int = 32) -> np.ndarray:
    """Natural-ish test images: smooth class-dependent waves plus texture.

    Random uniform noise images have almost no spatial structure, which
    makes SSIM and JPEG behave unlike they do on photographs; these keep
    enough low-frequency content to be realistic.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    out = np.empty((n, side, side, 3), dtype=np.uint8)
    for i in range(n):
        fx, fy = rng.uniform(0.05, 0.6, 2)
        phase = rng.uniform(0, 2 * np.pi, 3)
        base = 96 * np.sin(fx * xx + phase[0]) + 96 * np.cos(fy * yy + phase[1])
        chans = [base * rng.uniform(0.4, 1.0) + rng.uniform(40, 200) for _ in range(3)]
        img = np.stack(chans, axis=-1)
        img += rng.normal(0, rng.uniform(2, 18), img.shape)
        out[i] = np.clip(img, 0, 255).astype(np.uint8)
    return out


def labeled_images(n: int, num_classes: int = 10, seed: int = 0):
    """Images whose class determines the dominant pattern, so a small
    network can actually learn the mapping."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, n).astype(np.int64)
    yy, xx = np.mgrid[0:32, 0:32].astype(np.float64)
    images = np.empty((n, 32, 32, 3), dtype=np.uint8)
    for i in range(n):
        c = int(labels[i])
        base = (np.sin(xx * (0.2 + 0.11 * c)) * 70
                + np.cos(yy * (0.15 + 0.09 * c)) * 70 + 128)
        img = np.stack([base, 255 - base, base * 0.5 + 20 * c], axis=-1)
        img += rng.normal(0, 10, img.shape)
        images[i] = np.clip(img, 0, 255).astype(np.uint8)
    return images, labels


def write_cifar_binary(path, images: np.ndarray, labels: np.ndarray) -> None:
    planes = images.transpose(0, 3, 1, 2).reshape(len(images), -1)
    rec = np.concatenate([labels.astype(np.uint8)[:, None], planes], axis=1)
    rec.astype(np.uint8).tofile(path)


@pytest.fixture(scope="session")
def synth_cifar_dir(tmp_path_factory):
    """A small but fully valid CIFAR-10-binary-format dataset (600 train,
    300 test), with class-structured content."""
    root = tmp_path_factory.mktemp("cifar_synth")
    per_file = 120
    for k, name in enumerate(dataset.TRAIN_FILES):
        images, labels = labeled_images(per_file, seed=100 + k)
        write_cifar_binary(root / name, images, labels)
    images, labels = labeled_images(300, seed=999)
    write_cifar_binary(root / dataset.TEST_FILES[0], images, labels)
    return root


def gradcheck(param_array, grad_array, loss_fn, rng, samples=200,
              eps=1e-4, rtol=1e-3, atol=1e-9):
    """Central finite differences on randomly sampled coordinates."""
    flat = param_array.reshape(-1)
    gflat = np.asarray(grad_array).reshape(-1)
    idx = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
    for i in idx:
        old = flat[i]
        flat[i] = old + eps
        lp = loss_fn()
        flat[i] = old - eps
        lm = loss_fn()
        flat[i] = old
        num = (lp - lm) / (2 * eps)
        assert np.isclose(num, gflat[i], rtol=rtol, atol=atol), (
            f"coordinate {i}: numeric {num:.8e} vs analytic {gflat[i]:.8e}")
