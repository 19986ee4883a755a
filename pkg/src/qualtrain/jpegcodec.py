"""Baseline sequential JPEG codec.

Encode: RGB -> JFIF YCbCr, 4:2:0 chroma subsampling, 8x8 float DCT,
quantization with Annex-K tables scaled by the IJG quality convention,
standard Huffman entropy coding.  Decode inverts the whole chain and can
also read third-party baseline files (SOF0, 8-bit, optional restart
markers).

The entropy stage is lossless, so ``quantize_roundtrip`` exposes the lossy
part alone (analysis + synthesis, batched over many images) and produces
byte-identical output to a full encode -> decode cycle; the bulk pipeline
uses it to distort whole datasets at array speed.
"""

import struct

import numpy as np

from .errors import DataError, ParameterError

# ---------------------------------------------------------------------------
# Tables

ZIGZAG = np.array([
    0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.int32)

BASE_LUMA_QUANT = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64).reshape(8, 8)

BASE_CHROMA_QUANT = np.array([
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
], dtype=np.int64).reshape(8, 8)

# Standard Huffman tables: (bits[1..16], values)
DC_LUMA_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
DC_LUMA_VALS = tuple(range(12))
DC_CHROMA_BITS = (0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0)
DC_CHROMA_VALS = tuple(range(12))
AC_LUMA_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
AC_LUMA_VALS = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16,
    0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
    0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4,
    0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)
AC_CHROMA_BITS = (0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77)
AC_CHROMA_VALS = (
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21,
    0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0,
    0x15, 0x62, 0x72, 0xD1, 0x0A, 0x16, 0x24, 0x34,
    0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
    0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38,
    0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78,
    0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96,
    0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5,
    0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
    0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3,
    0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2,
    0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
    0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9,
    0xEA, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)


def _dct_matrix() -> np.ndarray:
    x = np.arange(8)
    u = np.arange(8).reshape(8, 1)
    m = np.cos((2 * x + 1) * u * np.pi / 16.0)
    m[0] *= np.sqrt(0.5)
    return m * 0.5  # orthonormal: c(u) = sqrt(1/8) or sqrt(2/8)


DCT_MAT = _dct_matrix()


def quality_to_tables(quality: int) -> tuple[np.ndarray, np.ndarray]:
    """IJG quality scaling of the base quantization tables."""
    if not 1 <= int(quality) <= 100:
        raise ParameterError(f"jpeg quality must be in [1, 100], got {quality}")
    quality = int(quality)
    scale = 5000 // quality if quality < 50 else 200 - quality * 2
    luma = np.clip((BASE_LUMA_QUANT * scale + 50) // 100, 1, 255)
    chroma = np.clip((BASE_CHROMA_QUANT * scale + 50) // 100, 1, 255)
    return luma.astype(np.int64), chroma.astype(np.int64)


# ---------------------------------------------------------------------------
# Color space (JFIF full-range YCbCr)


def rgb_to_ycbcr(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0
    return y, cb, cr


def ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    cb = cb - 128.0
    cr = cr - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136286 * cb - 0.714136286 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


# ---------------------------------------------------------------------------
# Lossy analysis / synthesis (batched over leading axes)


def _to_blocks(plane: np.ndarray) -> np.ndarray:
    """(..., H, W) -> (..., H/8, W/8, 8, 8)"""
    *lead, h, w = plane.shape
    blocks = plane.reshape(*lead, h // 8, 8, w // 8, 8)
    return np.moveaxis(blocks, -3, -2)

def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    *lead, nby, nbx, _, _ = blocks.shape
    return np.moveaxis(blocks, -2, -3).reshape(*lead, nby * 8, nbx * 8)


def _fdct(blocks: np.ndarray) -> np.ndarray:
    # einsum keeps the accumulation order fixed regardless of batch size,
    # so per-image and batched paths are bit-identical
    tmp = np.einsum("ux,...xy->...uy", DCT_MAT, blocks, optimize=False)
    return np.einsum("...uy,vy->...uv", tmp, DCT_MAT, optimize=False)


def _idct(coefs: np.ndarray) -> np.ndarray:
    tmp = np.einsum("ux,...uv->...xv", DCT_MAT, coefs, optimize=False)
    return np.einsum("...xv,vy->...xy", tmp, DCT_MAT, optimize=False)


def _quantize(coefs: np.ndarray, table: np.ndarray) -> np.ndarray:
    scaled = coefs / table
    return (np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)).astype(np.int32)


def _subsample_420(plane: np.ndarray) -> np.ndarray:
    *lead, h, w = plane.shape
    quads = plane.reshape(*lead, h // 2, 2, w // 2, 2)
    return quads.mean(axis=(-3, -1))


def _upsample_420(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Triangular (3/4, 1/4) upsampling with edge clamp, then crop."""
    *lead, h, w = plane.shape
    prev_r = np.concatenate([plane[..., :1, :], plane[..., :-1, :]], axis=-2)
    next_r = np.concatenate([plane[..., 1:, :], plane[..., -1:, :]], axis=-2)
    tall = np.empty((*lead, 2 * h, w), dtype=np.float64)
    tall[..., 0::2, :] = 0.75 * plane + 0.25 * prev_r
    tall[..., 1::2, :] = 0.75 * plane + 0.25 * next_r
    prev_c = np.concatenate([tall[..., :, :1], tall[..., :, :-1]], axis=-1)
    next_c = np.concatenate([tall[..., :, 1:], tall[..., :, -1:]], axis=-1)
    out = np.empty((*lead, 2 * h, 2 * w), dtype=np.float64)
    out[..., 0::2] = 0.75 * tall + 0.25 * prev_c
    out[..., 1::2] = 0.75 * tall + 0.25 * next_c
    return out[..., :out_h, :out_w]


def _pad_to_multiple(imgs: np.ndarray, mult: int) -> np.ndarray:
    h, w = imgs.shape[-3], imgs.shape[-2]
    ph = (-h) % mult
    pw = (-w) % mult
    if ph == 0 and pw == 0:
        return imgs
    pad = [(0, 0)] * imgs.ndim
    pad[-3] = (0, ph)
    pad[-2] = (0, pw)
    return np.pad(imgs, pad, mode="edge")


def _analyze(imgs: np.ndarray, quality: int):
    """uint8 (..., H, W, 3) -> quantized coefficient blocks per component."""
    luma_q, chroma_q = quality_to_tables(quality)
    padded = _pad_to_multiple(imgs, 16)
    y, cb, cr = rgb_to_ycbcr(padded)
    qy = _quantize(_fdct(_to_blocks(y - 128.0)), luma_q)
    qcb = _quantize(_fdct(_to_blocks(_subsample_420(cb) - 128.0)), chroma_q)
    qcr = _quantize(_fdct(_to_blocks(_subsample_420(cr) - 128.0)), chroma_q)
    return qy, qcb, qcr, luma_q, chroma_q


def _synthesize(qy, qcb, qcr, luma_q, chroma_q, out_h: int, out_w: int) -> np.ndarray:
    y = np.clip(_from_blocks(_idct(qy * luma_q)) + 128.0, 0.0, 255.0)
    cb = np.clip(_from_blocks(_idct(qcb * chroma_q)) + 128.0, 0.0, 255.0)
    cr = np.clip(_from_blocks(_idct(qcr * chroma_q)) + 128.0, 0.0, 255.0)
    y = y[..., :out_h, :out_w]
    ch, cw = -(-out_h // 2), -(-out_w // 2)
    cb = _upsample_420(cb[..., :ch, :cw], out_h, out_w)
    cr = _upsample_420(cr[..., :ch, :cw], out_h, out_w)
    rgb = ycbcr_to_rgb(y, cb, cr)
    return np.floor(np.clip(rgb, 0.0, 255.0) + 0.5).astype(np.uint8)


def quantize_roundtrip(imgs: np.ndarray, quality: int) -> np.ndarray:
    """Lossy JPEG degradation of a batch without the bitstream stage.

    Accepts uint8 (H, W, 3) or (N, H, W, 3); output is byte-identical to
    ``decode(encode(img, quality))`` for every image.
    """
    imgs = np.asarray(imgs)
    h, w = imgs.shape[-3], imgs.shape[-2]
    qy, qcb, qcr, luma_q, chroma_q = _analyze(imgs, quality)
    return _synthesize(qy, qcb, qcr, luma_q, chroma_q, h, w)


# ---------------------------------------------------------------------------
# Bit I/O


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, length: int):
        if length == 0:
            return
        self.acc = (self.acc << length) | (value & ((1 << length) - 1))
        self.nbits += length
        while self.nbits >= 8:
            self.nbits -= 8
            byte = (self.acc >> self.nbits) & 0xFF
            self.out.append(byte)
            if byte == 0xFF:
                self.out.append(0x00)
        self.acc &= (1 << self.nbits) - 1

    def flush(self):
        if self.nbits:
            pad = 8 - self.nbits
            self.write((1 << pad) - 1, pad)


class _BitReader:
    """Reads entropy-coded bits, unstuffing 0xFF00 and stopping at markers."""

    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos
        self.acc = 0
        self.nbits = 0

    def _fill(self):
        if self.pos >= len(self.data):
            raise DataError("jpeg: entropy data exhausted")
        byte = self.data[self.pos]
        if byte == 0xFF:
            nxt = self.data[self.pos + 1] if self.pos + 1 < len(self.data) else None
            if nxt == 0x00:
                self.pos += 2
            else:
                # marker reached: feed zero bits (T.81 allows padding reads)
                self.acc = (self.acc << 8)
                self.nbits += 8
                return
        else:
            self.pos += 1
        self.acc = (self.acc << 8) | byte
        self.nbits += 8

    def read_bit(self) -> int:
        if self.nbits == 0:
            self._fill()
        self.nbits -= 1
        return (self.acc >> self.nbits) & 1

    def receive(self, length: int) -> int:
        v = 0
        for _ in range(length):
            v = (v << 1) | self.read_bit()
        return v

    def align_to_marker(self):
        self.acc = 0
        self.nbits = 0


# ---------------------------------------------------------------------------
# Huffman coding


def _build_codes(bits, values) -> dict[int, tuple[int, int]]:
    """symbol -> (code, length) per T.81 Annex C."""
    codes = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[values[k]] = (code, length)
            code += 1
            k += 1
        code <<= 1
    return codes


def _build_decode_map(bits, values) -> dict[tuple[int, int], int]:
    """(length, code) -> symbol."""
    table = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            table[(length, code)] = values[k]
            code += 1
            k += 1
        code <<= 1
    return table


def _bit_category(value: int) -> int:
    return int(value).bit_length() if value >= 0 else int(-value).bit_length()


def _encode_block(writer: _BitWriter, qblock: np.ndarray, pred: int,
                  dc_codes, ac_codes) -> int:
    zz = qblock.reshape(64)[ZIGZAG]
    dc = int(zz[0])
    diff = dc - pred
    cat = _bit_category(diff)
    code, length = dc_codes[cat]
    writer.write(code, length)
    if cat:
        writer.write(diff if diff >= 0 else diff + (1 << cat) - 1, cat)

    run = 0
    for k in range(1, 64):
        val = int(zz[k])
        if val == 0:
            run += 1
            continue
        while run >= 16:
            code, length = ac_codes[0xF0]  # ZRL
            writer.write(code, length)
            run -= 16
        cat = _bit_category(val)
        code, length = ac_codes[(run << 4) | cat]
        writer.write(code, length)
        writer.write(val if val >= 0 else val + (1 << cat) - 1, cat)
        run = 0
    if run:
        code, length = ac_codes[0x00]  # EOB
        writer.write(code, length)
    return dc


def _decode_symbol(reader: _BitReader, table) -> int:
    code = 0
    for length in range(1, 17):
        code = (code << 1) | reader.read_bit()
        sym = table.get((length, code))
        if sym is not None:
            return sym
    raise DataError("jpeg: invalid Huffman code in entropy data")


def _extend(value: int, cat: int) -> int:
    if cat == 0:
        return 0
    return value if value >= (1 << (cat - 1)) else value - (1 << cat) + 1


def _decode_block(reader: _BitReader, pred: int, dc_table, ac_table) -> tuple[np.ndarray, int]:
    zz = np.zeros(64, dtype=np.int32)
    cat = _decode_symbol(reader, dc_table)
    dc = pred + _extend(reader.receive(cat), cat)
    zz[0] = dc
    k = 1
    while k < 64:
        sym = _decode_symbol(reader, ac_table)
        if sym == 0x00:  # EOB
            break
        if sym == 0xF0:  # ZRL
            k += 16
            continue
        run = sym >> 4
        cat = sym & 0x0F
        k += run
        if k > 63:
            raise DataError("jpeg: AC coefficient index overran block")
        zz[k] = _extend(reader.receive(cat), cat)
        k += 1
    block = np.zeros(64, dtype=np.int32)
    block[ZIGZAG] = zz
    return block.reshape(8, 8), dc


# ---------------------------------------------------------------------------
# Encoder


def _segment(marker: int, payload: bytes) -> bytes:
    return struct.pack(">BBH", 0xFF, marker, 2 + len(payload)) + payload


def encode(img: np.ndarray, quality: int) -> bytes:
    """Encode a uint8 (H, W, 3) RGB image as a baseline 4:2:0 JFIF file."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ParameterError(f"jpeg encode expects uint8 (H, W, 3), got {img.dtype} {img.shape}")
    h, w = img.shape[:2]
    qy, qcb, qcr, luma_q, chroma_q = _analyze(img, quality)

    out = bytearray()
    out += b"\xff\xd8"  # SOI
    out += _segment(0xE0, b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00")
    out += _segment(0xDB, bytes([0x00]) + bytes(luma_q.reshape(64)[ZIGZAG].astype(np.uint8)))
    out += _segment(0xDB, bytes([0x01]) + bytes(chroma_q.reshape(64)[ZIGZAG].astype(np.uint8)))
    sof = struct.pack(">BHHB", 8, h, w, 3)
    sof += bytes([1, 0x22, 0])  # Y: 2x2 sampling, table 0
    sof += bytes([2, 0x11, 1])  # Cb
    sof += bytes([3, 0x11, 1])  # Cr
    out += _segment(0xC0, sof)
    for tc_th, bits, vals in (
        (0x00, DC_LUMA_BITS, DC_LUMA_VALS),
        (0x10, AC_LUMA_BITS, AC_LUMA_VALS),
        (0x01, DC_CHROMA_BITS, DC_CHROMA_VALS),
        (0x11, AC_CHROMA_BITS, AC_CHROMA_VALS),
    ):
        out += _segment(0xC4, bytes([tc_th]) + bytes(bits) + bytes(vals))
    out += _segment(0xDA, bytes([3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]))

    dc_luma = _build_codes(DC_LUMA_BITS, DC_LUMA_VALS)
    ac_luma = _build_codes(AC_LUMA_BITS, AC_LUMA_VALS)
    dc_chroma = _build_codes(DC_CHROMA_BITS, DC_CHROMA_VALS)
    ac_chroma = _build_codes(AC_CHROMA_BITS, AC_CHROMA_VALS)

    writer = _BitWriter()
    mcu_rows = qcb.shape[0]
    mcu_cols = qcb.shape[1]
    preds = [0, 0, 0]
    for my in range(mcu_rows):
        for mx in range(mcu_cols):
            for by in range(2):
                for bx in range(2):
                    preds[0] = _encode_block(writer, qy[2 * my + by, 2 * mx + bx],
                                             preds[0], dc_luma, ac_luma)
            preds[1] = _encode_block(writer, qcb[my, mx], preds[1], dc_chroma, ac_chroma)
            preds[2] = _encode_block(writer, qcr[my, mx], preds[2], dc_chroma, ac_chroma)
    writer.flush()
    out += writer.out
    out += b"\xff\xd9"  # EOI
    return bytes(out)


# ---------------------------------------------------------------------------
# Decoder


class _Component:
    def __init__(self, cid, h, v, tq):
        self.cid = cid
        self.h = h
        self.v = v
        self.tq = tq
        self.dc_table = None
        self.ac_table = None
        self.blocks = None  # (rows, cols, 8, 8) int32


def decode(data: bytes) -> np.ndarray:
    """Decode a baseline sequential JPEG (SOF0, 8-bit, 1 or 3 components)."""
    if len(data) < 4 or data[0:2] != b"\xff\xd8":
        raise DataError("jpeg: missing SOI marker")
    pos = 2
    quant_tables: dict[int, np.ndarray] = {}
    dc_maps: dict[int, dict] = {}
    ac_maps: dict[int, dict] = {}
    components: list[_Component] = []
    height = width = 0
    restart_interval = 0

    while pos < len(data):
        if data[pos] != 0xFF:
            raise DataError(f"jpeg: expected marker at byte {pos}")
        marker = data[pos + 1]
        pos += 2
        if marker == 0xD9:  # EOI
            break
        if marker == 0x01 or 0xD0 <= marker <= 0xD7:
            continue
        (seglen,) = struct.unpack(">H", data[pos:pos + 2])
        payload = data[pos + 2:pos + seglen]
        if marker == 0xDB:
            off = 0
            while off < len(payload):
                pq, tq = payload[off] >> 4, payload[off] & 0x0F
                off += 1
                if pq == 0:
                    vals = np.frombuffer(payload[off:off + 64], dtype=np.uint8).astype(np.int64)
                    off += 64
                else:
                    vals = np.frombuffer(payload[off:off + 128], dtype=">u2").astype(np.int64)
                    off += 128
                table = np.zeros(64, dtype=np.int64)
                table[ZIGZAG] = vals
                quant_tables[tq] = table.reshape(8, 8)
        elif marker == 0xC4:
            off = 0
            while off < len(payload):
                tc, th = payload[off] >> 4, payload[off] & 0x0F
                bits = tuple(payload[off + 1:off + 17])
                n = sum(bits)
                vals = tuple(payload[off + 17:off + 17 + n])
                off += 17 + n
                table = _build_decode_map(bits, vals)
                (dc_maps if tc == 0 else ac_maps)[th] = table
        elif marker == 0xC0 or marker == 0xC1:
            precision, height, width, ncomp = struct.unpack(">BHHB", payload[:6])
            if precision != 8:
                raise DataError(f"jpeg: unsupported sample precision {precision}")
            components = []
            for i in range(ncomp):
                cid, hv, tq = payload[6 + 3 * i:9 + 3 * i]
                components.append(_Component(cid, hv >> 4, hv & 0x0F, tq))
        elif 0xC2 <= marker <= 0xCF and marker not in (0xC4, 0xC8, 0xCC):
            raise DataError(f"jpeg: unsupported (non-baseline) frame marker 0x{marker:02x}")
        elif marker == 0xDD:
            (restart_interval,) = struct.unpack(">H", payload[:2])
        elif marker == 0xDA:
            ncomp = payload[0]
            scan_comps = []
            for i in range(ncomp):
                cs, tables = payload[1 + 2 * i], payload[2 + 2 * i]
                comp = next(c for c in components if c.cid == cs)
                comp.dc_table = dc_maps[tables >> 4]
                comp.ac_table = ac_maps[tables & 0x0F]
                scan_comps.append(comp)
            pos += seglen
            pos = _decode_scan(data, pos, scan_comps, height, width, restart_interval)
            continue
        pos += seglen

    if not components or components[0].blocks is None:
        raise DataError("jpeg: no image data decoded")
    return _reconstruct(components, quant_tables, height, width)


def _decode_scan(data, pos, comps, height, width, restart_interval):
    hmax = max(c.h for c in comps)
    vmax = max(c.v for c in comps)
    mcu_cols = -(-width // (8 * hmax))
    mcu_rows = -(-height // (8 * vmax))
    for c in comps:
        rows = mcu_rows * c.v
        cols = mcu_cols * c.h
        c.blocks = np.zeros((rows, cols, 8, 8), dtype=np.int32)

    reader = _BitReader(data, pos)
    preds = {c.cid: 0 for c in comps}
    mcus_done = 0
    for my in range(mcu_rows):
        for mx in range(mcu_cols):
            if restart_interval and mcus_done == restart_interval:
                reader.align_to_marker()
                if data[reader.pos] == 0xFF and 0xD0 <= data[reader.pos + 1] <= 0xD7:
                    reader.pos += 2
                preds = {c.cid: 0 for c in comps}
                mcus_done = 0
            for c in comps:
                for by in range(c.v):
                    for bx in range(c.h):
                        block, preds[c.cid] = _decode_block(
                            reader, preds[c.cid], c.dc_table, c.ac_table)
                        c.blocks[my * c.v + by, mx * c.h + bx] = block
            mcus_done += 1
    # skip to next marker
    p = reader.pos
    while p + 1 < len(data) and not (data[p] == 0xFF and data[p + 1] != 0x00):
        p += 1
    return p


def _reconstruct(components, quant_tables, height, width) -> np.ndarray:
    hmax = max(c.h for c in components)
    vmax = max(c.v for c in components)
    planes = []
    for c in components:
        coefs = c.blocks.astype(np.float64) * quant_tables[c.tq]
        plane = np.clip(_from_blocks(_idct(coefs)) + 128.0, 0.0, 255.0)
        comp_h = -(-height * c.v // vmax)
        comp_w = -(-width * c.h // hmax)
        plane = plane[:comp_h, :comp_w]
        if c.h == hmax and c.v == vmax:
            planes.append(plane[:height, :width])
        elif 2 * c.h == hmax and 2 * c.v == vmax:
            planes.append(_upsample_420(plane, height, width))
        else:
            raise DataError(f"jpeg: unsupported sampling {c.h}x{c.v} vs max {hmax}x{vmax}")
    if len(planes) == 1:
        rgb = np.repeat(planes[0][..., None], 3, axis=-1)
        return np.floor(np.clip(rgb, 0.0, 255.0) + 0.5).astype(np.uint8)
    if len(planes) != 3:
        raise DataError(f"jpeg: unsupported component count {len(planes)}")
    rgb = ycbcr_to_rgb(planes[0], planes[1], planes[2])
    return np.floor(np.clip(rgb, 0.0, 255.0) + 0.5).astype(np.uint8)
