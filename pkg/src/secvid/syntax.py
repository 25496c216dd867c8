"""Per-frame syntax: binarization layout, context assignment and the frame payload coder.

Macroblock order is raster. Inside a macroblock::

    mb_type                     regular
    (inter only) for mvd_x, mvd_y:
        nonzero flag            regular
        |d| - 1, EG1            bypass
        sign                    bypass, encryptable
    for each transform block (luma raster, then Cb, then Cr):
        coded_block_flag        regular
        if set, for every scan position:
            significance        regular, context by scan-position class
            if significant:
                gt1             regular
                |l| - 2, EG0    bypass (when |l| >= 2)
                sign            bypass, encryptable

Coefficient arrays are stored in natural (raster) order per block;
the diagonal scan is applied only while coding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np

from .entropy import EntropyError, _encode_bins, _get, _new_decoder

__all__ = [
    "CTX_MB_TYPE",
    "N_CONTEXTS",
    "FrameSyntax",
    "zigzag",
    "blocks_per_mb",
    "binarize_frame",
    "encode_frame",
    "decode_frame",
    "sign_slots",
]

CTX_MB_TYPE = 0
CTX_MVD = 1  # +component
CTX_CBF = 3  # +chroma
CTX_SIG = 5  # +4*chroma + position class
CTX_GT1 = 13  # +chroma
N_CONTEXTS = 15

MB_INTRA = 0
MB_INTER = 1


@lru_cache(maxsize=None)
def zigzag(n: int) -> np.ndarray:
    """Natural indices in diagonal scan order: ascending antidiagonals, alternating direction."""
    order = []
    for d in range(2 * n - 1):
        cells = [(r, d - r) for r in range(n) if 0 <= d - r < n]
        if d % 2 == 0:
            cells.reverse()
        order.extend(r * n + c for r, c in cells)
    out = np.array(order, dtype=np.int64)
    out.setflags(write=False)
    return out


def blocks_per_mb(n: int) -> tuple[int, int]:
    """(luma blocks, blocks per chroma plane) in one 16x16 macroblock."""
    return (16 // n) ** 2, (8 // n) ** 2


@dataclass
class FrameSyntax:
    """Decoded syntax of one frame.

    ``mb_types``: (nmb,) 0=intra 1=inter; ``mvd``: (nmb, 2) as (dx, dy);
    ``coefs``: (nmb, nblk, n*n) quantized levels in natural order.
    """

    mb_types: np.ndarray
    mvd: np.ndarray
    coefs: np.ndarray
    n: int

    @property
    def n_luma(self) -> int:
        return blocks_per_mb(self.n)[0]

    def copy(self) -> "FrameSyntax":
        return FrameSyntax(self.mb_types.copy(), self.mvd.copy(), self.coefs.copy(), self.n)

    def __eq__(self, other):
        if not isinstance(other, FrameSyntax):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.mb_types, other.mb_types)
            and np.array_equal(self.mvd, other.mvd)
            and np.array_equal(self.coefs, other.coefs)
        )


@nb.njit(cache=True)
def _emit(bins, ctxs, enc, i, fill, value, ctx, encryptable):
    if fill:
        bins[i] = value
        ctxs[i] = ctx
        enc[i] = encryptable
    return i + 1


@nb.njit(cache=True)
def _emit_eg(bins, ctxs, enc, i, fill, value, k):
    x = value + (1 << k)
    nbits = 0
    t = x
    while t:
        nbits += 1
        t >>= 1
    for _ in range(nbits - 1 - k):
        i = _emit(bins, ctxs, enc, i, fill, 0, -1, 0)
    for b in range(nbits - 1, -1, -1):
        i = _emit(bins, ctxs, enc, i, fill, (x >> b) & 1, -1, 0)
    return i


@nb.njit(cache=True)
def _sig_class(k):
    if k == 0:
        return 0
    if k <= 2:
        return 1
    if k <= 6:
        return 2
    return 3


@nb.njit(cache=True)
def _binarize(mb_types, mvd, coefs, scan, n_luma, bins, ctxs, enc, fill):
    i = 0
    nmb, nblk, nn = coefs.shape
    for m in range(nmb):
        i = _emit(bins, ctxs, enc, i, fill, mb_types[m], 0, 0)
        if mb_types[m] == 1:
            for c in range(2):
                d = mvd[m, c]
                i = _emit(bins, ctxs, enc, i, fill, 1 if d != 0 else 0, 1 + c, 0)
                if d != 0:
                    i = _emit_eg(bins, ctxs, enc, i, fill, abs(d) - 1, 1)
                    i = _emit(bins, ctxs, enc, i, fill, 1 if d < 0 else 0, -1, 1)
        for b in range(nblk):
            chroma = 1 if b >= n_luma else 0
            cbf = 0
            for k in range(nn):
                if coefs[m, b, k] != 0:
                    cbf = 1
                    break
            i = _emit(bins, ctxs, enc, i, fill, cbf, 3 + chroma, 0)
            if cbf == 0:
                continue
            for k in range(nn):
                lv = coefs[m, b, scan[k]]
                i = _emit(bins, ctxs, enc, i, fill, 1 if lv != 0 else 0, 5 + 4 * chroma + _sig_class(k), 0)
                if lv == 0:
                    continue
                mag = abs(lv)
                i = _emit(bins, ctxs, enc, i, fill, 1 if mag >= 2 else 0, 13 + chroma, 0)
                if mag >= 2:
                    i = _emit_eg(bins, ctxs, enc, i, fill, mag - 2, 0)
                i = _emit(bins, ctxs, enc, i, fill, 1 if lv < 0 else 0, -1, 1)
    return i


@nb.njit(cache=True)
def _binarize_frame(mb_types, mvd, coefs, scan, n_luma):
    dummy8 = np.zeros(0, dtype=np.uint8)
    dummy64 = np.zeros(0, dtype=np.int64)
    count = _binarize(mb_types, mvd, coefs, scan, n_luma, dummy8, dummy64, dummy8, False)
    bins = np.empty(count, dtype=np.uint8)
    ctxs = np.empty(count, dtype=np.int64)
    enc = np.empty(count, dtype=np.uint8)
    _binarize(mb_types, mvd, coefs, scan, n_luma, bins, ctxs, enc, True)
    return bins, ctxs, enc


def _arrays(fs: FrameSyntax):
    return (
        np.ascontiguousarray(fs.mb_types, dtype=np.int64),
        np.ascontiguousarray(fs.mvd, dtype=np.int64),
        np.ascontiguousarray(fs.coefs, dtype=np.int64),
        zigzag(fs.n),
        fs.n_luma,
    )


def binarize_frame(fs: FrameSyntax) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full bin trace of a frame: (bins, context ids with -1 for bypass, encryptable mask)."""
    return _binarize_frame(*_arrays(fs))


def encode_frame(fs: FrameSyntax) -> bytes:
    bins, ctxs, _ = _binarize_frame(*_arrays(fs))
    return _encode_bins(bins, ctxs, N_CONTEXTS).tobytes()


@nb.njit(cache=True)
def _read_eg(st, probs, data, k):
    zeros = 0
    while _get(st, probs, data, -1) == 0:
        if st[3] != 0:
            return 0
        zeros += 1
        if zeros > 30:
            st[3] = 2
            return 0
    x = 1
    for _ in range(zeros + k):
        x = (x << 1) | _get(st, probs, data, -1)
    return x - (1 << k)


@nb.njit(cache=True)
def _decode_frame(data, nmb, nblk, nn, scan, n_luma):
    st = _new_decoder(data)
    probs = np.full(15, 2048, dtype=np.int64)
    mb_types = np.zeros(nmb, dtype=np.int64)
    mvd = np.zeros((nmb, 2), dtype=np.int64)
    coefs = np.zeros((nmb, nblk, nn), dtype=np.int64)
    for m in range(nmb):
        mb_types[m] = _get(st, probs, data, 0)
        if mb_types[m] == 1:
            for c in range(2):
                if _get(st, probs, data, 1 + c):
                    mag = 1 + _read_eg(st, probs, data, 1)
                    mvd[m, c] = -mag if _get(st, probs, data, -1) else mag
        for b in range(nblk):
            chroma = 1 if b >= n_luma else 0
            if not _get(st, probs, data, 3 + chroma):
                continue
            for k in range(nn):
                if not _get(st, probs, data, 5 + 4 * chroma + _sig_class(k)):
                    continue
                mag = 1
                if _get(st, probs, data, 13 + chroma):
                    mag = 2 + _read_eg(st, probs, data, 0)
                coefs[m, b, scan[k]] = -mag if _get(st, probs, data, -1) else mag
        if st[3] != 0:
            break
    return mb_types, mvd, coefs, st[3], st[2]


def decode_frame(payload: bytes, n_mb: int, n: int) -> FrameSyntax:
    n_luma, n_chroma = blocks_per_mb(n)
    data = np.frombuffer(bytes(payload), dtype=np.uint8)
    mb_types, mvd, coefs, err, consumed = _decode_frame(data, n_mb, n_luma + 2 * n_chroma, n * n, zigzag(n), n_luma)
    if err == 1:
        raise EntropyError("frame payload exhausted")
    if err == 2:
        raise EntropyError("corrupt exp-Golomb prefix")
    if consumed != len(data):
        raise EntropyError(f"{len(data) - consumed} trailing bytes after frame payload")
    return FrameSyntax(mb_types, mvd, coefs, n)


def sign_slots(n_mb: int, n: int) -> int:
    """Keystream bits one frame consumes: every MVD component and every coefficient position."""
    n_luma, n_chroma = blocks_per_mb(n)
    return n_mb * (2 + (n_luma + 2 * n_chroma) * n * n)
