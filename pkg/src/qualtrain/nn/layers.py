"""Network layers as forward/backward pairs on channel-last arrays.

Every forward returns (output, cache); the matching backward consumes the
cache and the upstream gradient and returns gradients in the same shapes
as its inputs.  Convolutions use stride 1 with same padding; max pooling
uses TensorFlow-style SAME padding (extra row/column padded at the
bottom/right, -inf fill) so a 32 -> 16 -> 8 reduction holds with a 3x3
window of stride 2.  Gradients are exact analytic expressions; the test
suite checks every layer against central finite differences in float64.

Convolution is decomposed into one (rows*cols, Cin) @ (Cin, Cout) matmul
per kernel tap; the extracted input slices are cached so the weight
gradient reuses them.  This keeps peak memory at one slice set per layer
and feeds BLAS well-shaped operands.
"""

import numpy as np


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (N,H,W,Cin), w (kh,kw,Cin,Cout), stride 1, same padding.

    One (N*H*W, Cin) @ (Cin, Cout) matmul per kernel tap, accumulated into
    a preallocated output; the contiguous tap slices are cached for the
    weight gradient.
    """
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    y = np.tile(b.astype(x.dtype), (n * h * wd, 1))
    tmp = np.empty((n * h * wd, cout), dtype=x.dtype)
    slices = []
    for tap in range(kh * kw):
        di, dj = divmod(tap, kw)
        s = xp[:, di:di + h, dj:dj + wd, :].reshape(n * h * wd, cin)
        slices.append(s)
        np.matmul(s, w[di, dj], out=tmp)
        y += tmp
    return y.reshape(n, h, wd, cout), (slices, x.shape, w)


def conv2d_backward(dy: np.ndarray, cache):
    slices, xshape, w = cache
    n, h, wd, cin = xshape
    kh, kw, _, cout = w.shape
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    dym = dy.reshape(-1, cout)
    dw = np.empty_like(w)
    db = dym.sum(axis=0)
    dxp = np.zeros((n, h + 2 * ph, wd + 2 * pw, cin), dtype=dy.dtype)
    tmp = np.empty((n * h * wd, cin), dtype=dy.dtype)
    for tap in range(kh * kw):
        di, dj = divmod(tap, kw)
        dw[di, dj] = slices[tap].T @ dym
        np.matmul(dym, w[di, dj].T, out=tmp)
        dxp[:, di:di + h, dj:dj + wd, :] += tmp.reshape(n, h, wd, cin)
    return dxp[:, ph:ph + h, pw:pw + wd, :], dw, db


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0), (x > 0)


def relu_backward(dy: np.ndarray, cache):
    return dy * cache


def _pool_padding(size: int, k: int, s: int) -> tuple[int, int, int]:
    out = -(-size // s)
    needed = max((out - 1) * s + k - size, 0)
    return out, needed // 2, needed - needed // 2


def _tap_range(size: int, out: int, s: int, pad_before: int, d: int):
    """Valid output range [lo, hi) for window tap d, plus the input start."""
    lo = max(0, -(-(pad_before - d) // s))
    hi = min(out, -(-(size + pad_before - d) // s))
    return lo, hi, lo * s + d - pad_before


def maxpool_forward(x: np.ndarray, k: int = 3, s: int = 2):
    n, h, w, c = x.shape
    ho, pt, _ = _pool_padding(h, k, s)
    wo, pl, _ = _pool_padding(w, k, s)
    y = np.full((n, ho, wo, c), -np.inf, dtype=x.dtype)
    idx = np.zeros((n, ho, wo, c), dtype=np.int8)
    for p in range(k * k):
        di, dj = divmod(p, k)
        ilo, ihi, r0 = _tap_range(h, ho, s, pt, di)
        jlo, jhi, c0 = _tap_range(w, wo, s, pl, dj)
        if ilo >= ihi or jlo >= jhi:
            continue
        v = x[:, r0:r0 + (ihi - ilo) * s:s, c0:c0 + (jhi - jlo) * s:s, :]
        ry = y[:, ilo:ihi, jlo:jhi, :]
        ri = idx[:, ilo:ihi, jlo:jhi, :]
        better = v > ry
        np.copyto(ry, v, where=better)
        np.copyto(ri, np.int8(p), where=better)
    return y, (idx, x.shape, (k, s))


def maxpool_backward(dy: np.ndarray, cache):
    idx, xshape, (k, s) = cache
    n, h, w, c = xshape
    ho, pt, _ = _pool_padding(h, k, s)
    wo, pl, _ = _pool_padding(w, k, s)
    dx = np.zeros(xshape, dtype=dy.dtype)
    for p in range(k * k):
        di, dj = divmod(p, k)
        ilo, ihi, r0 = _tap_range(h, ho, s, pt, di)
        jlo, jhi, c0 = _tap_range(w, wo, s, pl, dj)
        if ilo >= ihi or jlo >= jhi:
            continue
        contrib = np.where(idx[:, ilo:ihi, jlo:jhi, :] == p,
                           dy[:, ilo:ihi, jlo:jhi, :], 0)
        dx[:, r0:r0 + (ihi - ilo) * s:s, c0:c0 + (jhi - jlo) * s:s, :] += contrib
    return dx


def _channel_window_sum(t: np.ndarray, radius: int) -> np.ndarray:
    """Sum of t over a clipped [-radius, radius] window along the last axis."""
    c = t.shape[-1]
    cs = np.concatenate(
        [np.zeros(t.shape[:-1] + (1,), dtype=t.dtype), np.cumsum(t, axis=-1)], axis=-1)
    hi = np.minimum(np.arange(c) + radius + 1, c)
    lo = np.maximum(np.arange(c) - radius, 0)
    return cs[..., hi] - cs[..., lo]


def lrn_forward(x: np.ndarray, radius: int = 4, bias: float = 1.0,
                alpha: float = 0.001 / 9.0, beta: float = 0.75):
    """out[c] = x[c] / (bias + alpha * sum_{|c'-c|<=radius} x[c']^2)^beta"""
    base = bias + alpha * _channel_window_sum(x * x, radius)
    inv_pow = base ** (-beta)
    y = x * inv_pow
    return y, (x, base, inv_pow, radius, alpha, beta)


def lrn_backward(dy: np.ndarray, cache):
    x, base, inv_pow, radius, alpha, beta = cache
    t = dy * x * (inv_pow / base)
    return dy * inv_pow - 2.0 * alpha * beta * x * _channel_window_sum(t, radius)


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, x


def fc_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray):
    dw = x.T @ dy
    db = dy.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
