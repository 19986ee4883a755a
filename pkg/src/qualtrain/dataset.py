"""CIFAR-10 ingestion, per-epoch mixture construction, and fixed test sets.

The raw dataset is the binary format: six files of 10,000 records, each
record one label byte followed by 3,072 pixel bytes (red plane, green
plane, blue plane, row-major).  Mixtures follow the 60/15/15/10 split:
per epoch a seeded permutation assigns every training sample to exactly
one bucket (pristine, level 1, level 2, level 3); level buckets are
replaced by distorted versions carrying their SSIM-based quality score.

Everything is a pure function of (data, seed, epoch): rebuilding any
mixture or test set yields identical bytes.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from . import distort, iqa
from .errors import ConfigurationError, DataError
from .imageops import content_digest
from .rng import derive_key, generator

NUM_CLASSES = 10
RECORD_BYTES = 1 + 3072
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILES = ("test_batch.bin",)

DEFAULT_RATIOS = (0.60, 0.15, 0.15, 0.10)
DEFAULT_TEST_SET_SEED = 2061  # documented fixed seed for the distorted test sets

TEST_SET_NAMES = ("pristine",) + tuple(
    f"{kind}-{level}" for kind in distort.KINDS for level in (1, 2, 3))


@dataclass
class LabeledSample:
    """One image with its class label and (for distorted samples) quality."""

    image: np.ndarray  # uint8 (32, 32, 3)
    label: int
    quality: float = 1.0
    provenance: tuple[str, int] | None = None  # None = pristine, else (kind, level)


@dataclass(frozen=True)
class MixturePlan:
    """Per-epoch bucket ratios plus the distortion families in play."""

    ratios: tuple[float, float, float, float] = DEFAULT_RATIOS
    seed: int = 0
    kinds: tuple[str, ...] = ("blur",)

    def __post_init__(self):
        if len(self.ratios) != 4 or any(r < 0 for r in self.ratios):
            raise ConfigurationError(f"mixture needs 4 non-negative ratios, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-12:
            raise ConfigurationError(f"mixture ratios must sum to 1, got {sum(self.ratios)!r}")
        if not self.kinds or any(k not in distort.KINDS for k in self.kinds):
            raise ConfigurationError(f"unknown distortion kinds {self.kinds}")


# ---------------------------------------------------------------------------
# Ingestion


def _read_batch_file(path: str) -> tuple[np.ndarray, np.ndarray]:
    if not os.path.isfile(path):
        raise DataError(f"missing dataset file: {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % RECORD_BYTES != 0:
        offset = raw.size - (raw.size % RECORD_BYTES)
        raise DataError(
            f"truncated dataset file {path}: {raw.size} bytes, "
            f"record {raw.size // RECORD_BYTES} cut at byte offset {offset}")
    records = raw.reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.nonzero(labels >= NUM_CLASSES)[0]
    if bad.size:
        raise DataError(
            f"corrupt record {int(bad[0])} in {path}: label byte {int(labels[bad[0]])} >= {NUM_CLASSES}")
    images = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return np.ascontiguousarray(images), labels


def resolve_data_dir(path: str) -> str:
    """Accept either the batch directory itself or its parent."""
    if os.path.isfile(os.path.join(path, TRAIN_FILES[0])):
        return path
    nested = os.path.join(path, "cifar-10-batches-bin")
    if os.path.isfile(os.path.join(nested, TRAIN_FILES[0])):
        return nested
    return path


def load_cifar10_arrays(path: str):
    """-> (train_images, train_labels, test_images, test_labels), uint8/int64."""
    path = resolve_data_dir(path)
    train_parts = [_read_batch_file(os.path.join(path, f)) for f in TRAIN_FILES]
    test_parts = [_read_batch_file(os.path.join(path, f)) for f in TEST_FILES]
    train_images = np.concatenate([p[0] for p in train_parts])
    train_labels = np.concatenate([p[1] for p in train_parts])
    test_images = np.concatenate([p[0] for p in test_parts])
    test_labels = np.concatenate([p[1] for p in test_parts])
    return train_images, train_labels, test_images, test_labels


def load_cifar10(path: str) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Load the binary dataset as pristine samples (quality 1.0)."""
    tr_img, tr_lab, te_img, te_lab = load_cifar10_arrays(path)
    train = [LabeledSample(tr_img[i], int(tr_lab[i])) for i in range(len(tr_lab))]
    test = [LabeledSample(te_img[i], int(te_lab[i])) for i in range(len(te_lab))]
    return train, test


def compute_digests(path: str) -> dict[str, str]:
    path = resolve_data_dir(path)
    digests = {}
    for name in TRAIN_FILES + TEST_FILES:
        full = os.path.join(path, name)
        if not os.path.isfile(full):
            raise DataError(f"missing dataset file: {full}")
        h = hashlib.sha256()
        with open(full, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        digests[name] = h.hexdigest()
    return digests


def verify_digests(path: str, expected: dict[str, str]) -> None:
    actual = compute_digests(path)
    for name, want in sorted(expected.items()):
        got = actual.get(name)
        if got != want:
            raise DataError(f"digest mismatch for {name}: expected {want}, got {got}")


# ---------------------------------------------------------------------------
# Mixture construction


def bucket_sizes(n: int, ratios) -> list[int]:
    """Largest-remainder apportionment of n samples over ratio buckets."""
    exact = [n * r for r in ratios]
    sizes = [int(np.floor(e)) for e in exact]
    remainder = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:remainder]:
        sizes[i] += 1
    return sizes


def partition_epoch(n: int, plan: MixturePlan, epoch: int) -> list[np.ndarray]:
    """Assign every index to one bucket via a seeded per-epoch shuffle."""
    sizes = bucket_sizes(n, plan.ratios)
    perm = generator("bucket-partition", plan.seed, epoch).permutation(n)
    out = []
    start = 0
    for s in sizes:
        out.append(np.sort(perm[start:start + s]))
        start += s
    return out


def noise_sample_seeds(seed: int, epoch: int, indices: np.ndarray) -> list[int]:
    return [derive_key("noise-sample", seed, epoch, int(i)) for i in indices]


def _draw_kinds(plan: MixturePlan, epoch: int, indices: np.ndarray) -> list[str]:
    """Uniform per-sample distortion family for multi-family mixtures."""
    if len(plan.kinds) == 1:
        return [plan.kinds[0]] * len(indices)
    return [
        plan.kinds[generator("mixture-kind", plan.seed, epoch, int(i)).integers(len(plan.kinds))]
        for i in indices
    ]


def default_distorter(kind: str, level: int, images: np.ndarray,
                      indices: np.ndarray, seeds) -> np.ndarray:
    """Distort images[indices]; trainer substitutes a caching variant."""
    return distort.apply_batch(distort.DistortionSpec(kind, level), images[indices], seeds)


def mixture_arrays(images: np.ndarray, plan: MixturePlan, epoch: int,
                   distorter=default_distorter):
    """Array-level mixture build.

    Returns (mixed_images, quality, kind_codes, levels); kind_codes hold
    the index into distort.KINDS or -1 for pristine, levels 0 for pristine.
    """
    n = len(images)
    buckets = partition_epoch(n, plan, epoch)
    mixed = images.copy()
    quality = np.ones(n, dtype=np.float64)
    kind_codes = np.full(n, -1, dtype=np.int8)
    levels = np.zeros(n, dtype=np.int8)
    for level, indices in enumerate(buckets[1:], start=1):
        if indices.size == 0:
            continue
        kinds = np.array([distort.KINDS.index(k) for k in _draw_kinds(plan, epoch, indices)])
        for code, kind in enumerate(distort.KINDS):
            sel = indices[kinds == code]
            if sel.size == 0:
                continue
            seeds = noise_sample_seeds(plan.seed, epoch, sel) if kind == "noise" else None
            distorted = distorter(kind, level, images, sel, seeds)
            mixed[sel] = distorted
            quality[sel] = iqa.transform_batch(iqa.ssim_raw_batch(images[sel], distorted))
            kind_codes[sel] = code
            levels[sel] = level
    return mixed, quality, kind_codes, levels


def build_epoch_mixture(pristine: list[LabeledSample], plan: MixturePlan,
                        distorter=default_distorter, epoch: int = 0) -> list[LabeledSample]:
    """Replace the level buckets of one epoch with distorted samples."""
    images = np.stack([s.image for s in pristine])
    mixed, quality, kind_codes, levels = mixture_arrays(images, plan, epoch, distorter)
    out = []
    for i, src in enumerate(pristine):
        if kind_codes[i] < 0:
            out.append(src)
        else:
            prov = (distort.KINDS[kind_codes[i]], int(levels[i]))
            out.append(LabeledSample(mixed[i], src.label, float(quality[i]), prov))
    return out


# ---------------------------------------------------------------------------
# Test sets


def test_set_arrays(test_images: np.ndarray, seed: int = DEFAULT_TEST_SET_SEED):
    """-> dict name -> (images uint8, quality float64), for all ten sets."""
    out = {"pristine": (test_images.copy(), np.ones(len(test_images)))}
    for spec in distort.all_specs():
        if spec.kind == "noise":
            seeds = [derive_key("test-set", seed, spec.kind, spec.level, i)
                     for i in range(len(test_images))]
        else:
            seeds = None
        distorted = distort.apply_batch(spec, test_images, seeds)
        quality = iqa.transform_batch(iqa.ssim_raw_batch(test_images, distorted))
        out[spec.name] = (distorted, quality)
    return out


def build_test_sets(test: list[LabeledSample],
                    seed: int = DEFAULT_TEST_SET_SEED) -> dict[str, list[LabeledSample]]:
    """The pristine set plus nine distorted sets, fixed by the given seed."""
    images = np.stack([s.image for s in test])
    arrays = test_set_arrays(images, seed)
    out = {}
    for name, (imgs, quality) in arrays.items():
        if name == "pristine":
            out[name] = list(test)
        else:
            kind, level = name.rsplit("-", 1)
            out[name] = [
                LabeledSample(imgs[i], test[i].label, float(quality[i]), (kind, int(level)))
                for i in range(len(test))
            ]
    return out


# ---------------------------------------------------------------------------
# Manifests


def manifest_records(images: np.ndarray, labels: np.ndarray, quality: np.ndarray,
                     kind_codes: np.ndarray, levels: np.ndarray):
    for i in range(len(images)):
        pristine = kind_codes[i] < 0
        yield {
            "index": i,
            "label": int(labels[i]),
            "bucket": "pristine" if pristine else f"{distort.KINDS[kind_codes[i]]}-{int(levels[i])}",
            "kind": None if pristine else distort.KINDS[kind_codes[i]],
            "level": None if pristine else int(levels[i]),
            "quality": round(float(quality[i]), 12),
            "digest": content_digest(images[i]),
        }


def write_manifest(path: str, records) -> None:
    """Line-delimited JSON, one record per sample, stable key order."""
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
