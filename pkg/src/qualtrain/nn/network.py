"""The two-conv/three-fc classifier: parameters, forward, backward, checkpoints.

Layer sequence (channel-last):
conv1(5x5/1, same) -> relu -> maxpool(3x3/2) -> lrn ->
conv2(5x5/1, same) -> relu -> lrn -> maxpool(3x3/2) ->
flatten -> fc1 -> relu -> fc2 -> relu -> linear -> softmax

At the default architecture the intermediate sizes are
32x32x64, 16x16x64 (pool1/lrn1), 16x16x64 (conv2/lrn2), 8x8x64 (pool2),
4096 flat, 384, 192, 10.

Initialization (seeded, truncated normal at 2 standard deviations):
conv kernels std 0.05, fc weights std 0.04, final linear std 1/fc_out;
biases 0.0 for conv1 and the final linear, 0.1 elsewhere.
"""

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import CheckpointError, DimensionError
from ..rng import generator
from . import layers


@dataclass(frozen=True)
class Architecture:
    input_side: int = 32
    input_channels: int = 3
    conv_channels: tuple[int, int] = (64, 64)
    kernel_size: int = 5
    pool_size: int = 3
    pool_stride: int = 2
    fc_sizes: tuple[int, int] = (384, 192)
    num_classes: int = 10
    lrn_radius: int = 4
    lrn_bias: float = 1.0
    lrn_alpha: float = 0.001 / 9.0
    lrn_beta: float = 0.75

    @property
    def pooled_side(self) -> int:
        s = -(-self.input_side // self.pool_stride)
        return -(-s // self.pool_stride)

    @property
    def flat_size(self) -> int:
        return self.pooled_side ** 2 * self.conv_channels[1]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        k = self.kernel_size
        c1, c2 = self.conv_channels
        f1, f2 = self.fc_sizes
        return {
            "conv1_w": (k, k, self.input_channels, c1),
            "conv1_b": (c1,),
            "conv2_w": (k, k, c1, c2),
            "conv2_b": (c2,),
            "fc1_w": (self.flat_size, f1),
            "fc1_b": (f1,),
            "fc2_w": (f1, f2),
            "fc2_b": (f2,),
            "softmax_w": (f2, self.num_classes),
            "softmax_b": (self.num_classes,),
        }

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


DEFAULT_ARCH = Architecture()

# weights regularized by L2 weight decay (the two hidden fully connected layers)
DECAYED_PARAMS = ("fc1_w", "fc2_w")


class ModelParams:
    """Ordered named tensors for one model instance."""

    def __init__(self, arch: Architecture, tensors: dict[str, np.ndarray]):
        self.arch = arch
        expected = arch.param_shapes()
        for name, shape in expected.items():
            if name not in tensors or tuple(tensors[name].shape) != shape:
                got = tuple(tensors[name].shape) if name in tensors else None
                raise DimensionError(f"parameter {name}: expected shape {shape}, got {got}")
        self.tensors = {name: tensors[name] for name in expected}

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.arch, {n: t.astype(dtype) for n, t in self.tensors.items()})

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, {n: t.copy() for n, t in self.tensors.items()})


def _truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal draws with |value| <= 2*std (rejection resampling)."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def init_params(arch: Architecture = DEFAULT_ARCH, seed: int = 0,
                dtype=np.float32) -> ModelParams:
    stds = {
        "conv1_w": 0.05, "conv2_w": 0.05,
        "fc1_w": 0.04, "fc2_w": 0.04,
        "softmax_w": 1.0 / arch.fc_sizes[1],
    }
    biases = {"conv1_b": 0.0, "conv2_b": 0.1, "fc1_b": 0.1, "fc2_b": 0.1, "softmax_b": 0.0}
    tensors = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith("_w"):
            rng = generator("param-init", seed, name)
            tensors[name] = _truncated_normal(rng, shape, stds[name]).astype(dtype)
        else:
            tensors[name] = np.full(shape, biases[name], dtype=dtype)
    return ModelParams(arch, tensors)


def forward(params: ModelParams, x: np.ndarray, keep_cache: bool = True):
    """-> (logits, probs, cache); x is (N, side, side, channels) in [0, 1]."""
    arch = params.arch
    n = x.shape[0]
    expect = (n, arch.input_side, arch.input_side, arch.input_channels)
    if x.shape != expect:
        raise DimensionError(f"input: expected shape {expect}, got {x.shape}")
    p = params.tensors
    lrn_args = (arch.lrn_radius, arch.lrn_bias, arch.lrn_alpha, arch.lrn_beta)

    c1, cache_c1 = layers.conv2d_forward(x, p["conv1_w"], p["conv1_b"])
    r1, mask_r1 = layers.relu_forward(c1)
    p1, cache_p1 = layers.maxpool_forward(r1, arch.pool_size, arch.pool_stride)
    l1, cache_l1 = layers.lrn_forward(p1, *lrn_args)

    c2, cache_c2 = layers.conv2d_forward(l1, p["conv2_w"], p["conv2_b"])
    r2, mask_r2 = layers.relu_forward(c2)
    l2, cache_l2 = layers.lrn_forward(r2, *lrn_args)
    p2, cache_p2 = layers.maxpool_forward(l2, arch.pool_size, arch.pool_stride)

    flat = p2.reshape(n, arch.flat_size)
    f1, x_f1 = layers.fc_forward(flat, p["fc1_w"], p["fc1_b"])
    fr1, mask_f1 = layers.relu_forward(f1)
    f2, x_f2 = layers.fc_forward(fr1, p["fc2_w"], p["fc2_b"])
    fr2, mask_f2 = layers.relu_forward(f2)
    logits, x_sm = layers.fc_forward(fr2, p["softmax_w"], p["softmax_b"])
    probs = layers.softmax(logits)

    cache = None
    if keep_cache:
        cache = {
            "params": params, "probs": probs,
            "c1": cache_c1, "r1": mask_r1, "p1": cache_p1, "l1": cache_l1,
            "c2": cache_c2, "r2": mask_r2, "l2": cache_l2, "p2": cache_p2,
            "pool2_shape": p2.shape,
            "f1": x_f1, "mf1": mask_f1, "f2": x_f2, "mf2": mask_f2, "sm": x_sm,
        }
    return logits, probs, cache


def batch_loss(probs: np.ndarray, q: np.ndarray, kind: str = "squared") -> float:
    """Mean per-sample loss between softmax outputs and target distributions."""
    if kind == "squared":
        return float(((probs - q) ** 2).sum(axis=1).mean())
    if kind == "cross_entropy":
        return float(-(q * np.log(np.maximum(probs, 1e-30))).sum(axis=1).mean())
    raise ValueError(f"unknown loss kind {kind!r}")


def decay_penalty(params: ModelParams, weight_decay: float) -> float:
    """wd * sum(w^2) / 2 over the decayed fc weights (half convention)."""
    return float(weight_decay * sum(
        (params[n].astype(np.float64) ** 2).sum() for n in DECAYED_PARAMS) / 2.0)


def loss_gradient_logits(probs: np.ndarray, q: np.ndarray, kind: str) -> np.ndarray:
    """d(mean batch loss)/d(logits)."""
    n = probs.shape[0]
    if kind == "squared":
        diff = probs - q
        inner = (diff * probs).sum(axis=1, keepdims=True)
        return 2.0 * probs * (diff - inner) / n
    if kind == "cross_entropy":
        return (probs - q) / n
    raise ValueError(f"unknown loss kind {kind!r}")


def backward(cache: dict, q: np.ndarray, weight_decay: float = 0.0,
             loss_kind: str = "squared") -> dict[str, np.ndarray]:
    """Gradients of mean batch loss plus the fc weight-decay penalty."""
    params = cache["params"]
    probs = cache["probs"]
    if q.shape != probs.shape:
        raise DimensionError(f"targets: expected shape {probs.shape}, got {q.shape}")
    arch = params.arch
    p = params.tensors
    g = {}

    dz = loss_gradient_logits(probs, q, loss_kind)
    dfr2, g["softmax_w"], g["softmax_b"] = layers.fc_backward(dz, cache["sm"], p["softmax_w"])
    df2 = layers.relu_backward(dfr2, cache["mf2"])
    dfr1, g["fc2_w"], g["fc2_b"] = layers.fc_backward(df2, cache["f2"], p["fc2_w"])
    df1 = layers.relu_backward(dfr1, cache["mf1"])
    dflat, g["fc1_w"], g["fc1_b"] = layers.fc_backward(df1, cache["f1"], p["fc1_w"])

    dp2 = dflat.reshape(cache["pool2_shape"])
    dl2 = layers.maxpool_backward(dp2, cache["p2"])
    dr2 = layers.lrn_backward(dl2, cache["l2"])
    dc2 = layers.relu_backward(dr2, cache["r2"])
    dl1, g["conv2_w"], g["conv2_b"] = layers.conv2d_backward(dc2, cache["c2"])

    dp1 = layers.lrn_backward(dl1, cache["l1"])
    dr1 = layers.maxpool_backward(dp1, cache["p1"])
    dc1 = layers.relu_backward(dr1, cache["r1"])
    _, g["conv1_w"], g["conv1_b"] = layers.conv2d_backward(dc1, cache["c1"])

    if weight_decay:
        for name in DECAYED_PARAMS:
            g[name] = g[name] + weight_decay * p[name]
    return g


# ---------------------------------------------------------------------------
# Checkpoints: text header, then raw little-endian float32 tensors in
# declaration order (velocity tensors appended when momentum is active).

CKPT_MAGIC = b"QUALTRAIN-CKPT-v1\n"


def save_checkpoint(path: str, params: ModelParams, epoch: int, seed: int,
                    config_hash: str, velocity: dict[str, np.ndarray] | None = None) -> None:
    header = {
        "arch": asdict(params.arch),
        "arch_hash": params.arch.hash(),
        "config_hash": config_hash,
        "seed": seed,
        "epoch": epoch,
        "has_velocity": velocity is not None,
        "tensors": [[n, list(params[n].shape)] for n in params.names],
    }
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for name in params.names:
            fh.write(np.ascontiguousarray(params[name], dtype="<f4").tobytes())
        if velocity is not None:
            for name in params.names:
                fh.write(np.ascontiguousarray(velocity[name], dtype="<f4").tobytes())


def load_checkpoint(path: str):
    """-> (params, header dict, velocity dict or None)"""
    with open(path, "rb") as fh:
        magic = fh.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        header = json.loads(fh.readline().decode("ascii"))
        raw = fh.read()
    arch_dict = dict(header["arch"])
    for key in ("conv_channels", "fc_sizes"):
        arch_dict[key] = tuple(arch_dict[key])
    arch = Architecture(**arch_dict)
    if arch.hash() != header["arch_hash"]:
        raise CheckpointError(f"{path}: architecture hash mismatch")
    def read_block(offset: int, shape) -> tuple[np.ndarray, int]:
        count = int(np.prod(shape))
        if offset + count * 4 > len(raw):
            raise CheckpointError(f"{path}: truncated tensor data")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        return arr.reshape(shape).copy(), offset + count * 4

    tensors = {}
    offset = 0
    for name, shape in header["tensors"]:
        tensors[name], offset = read_block(offset, shape)
    params = ModelParams(arch, tensors)
    velocity = None
    if header.get("has_velocity"):
        velocity = {}
        for name, shape in header["tensors"]:
            velocity[name], offset = read_block(offset, shape)
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing or missing tensor bytes")
    return params, header, velocity
