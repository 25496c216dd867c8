"""Binary range coder with adaptive (regular) and equiprobable (bypass) bins.

The coder keeps a 32-bit range and a carry-capable low accumulator and
renormalizes one byte at a time, carry handled by a cached byte plus a run of
pending 0xFF bytes. A bypass bin halves the range whatever its value, so the
byte count of a stream never depends on bypass bin values.

Two implementations live here: readable :class:`RangeEncoder` /
:class:`RangeDecoder` objects, and numba kernels (:func:`encode_bins`,
:func:`decode_bins`) used for bulk work. Tests hold them to identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

__all__ = [
    "PROB_BITS",
    "PROB_INIT",
    "BYPASS",
    "Context",
    "RangeEncoder",
    "RangeDecoder",
    "EntropyError",
    "Bin",
    "exp_golomb",
    "binarize_level",
    "binarize_mvd",
    "debinarize_level",
    "debinarize_mvd",
    "encode_bins",
    "decode_bins",
    "flushed_length",
]

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5
TOP = 1 << 24
RANGE_INIT = 0xFFFFFFFF
FLUSH_BYTES = 5
BYPASS = -1  # context id marking a bypass bin in bulk arrays


class EntropyError(ValueError):
    pass


@dataclass
class Context:
    """Probability that the next bin is 1, in 1/4096 units."""

    p1: int = PROB_INIT

    def update(self, bin: int) -> None:
        if bin:
            self.p1 += (PROB_ONE - self.p1) >> ADAPT_SHIFT
        else:
            self.p1 -= self.p1 >> ADAPT_SHIFT
        self.p1 = min(max(self.p1, 1), PROB_ONE - 1)


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = RANGE_INIT
        self._cache = 0
        self._pending = 1
        self._out = bytearray()
        self._flushed = False

    def _shift_low(self) -> None:
        if self.low < 0xFF000000 or self.low >= 1 << 32:
            carry = self.low >> 32
            byte = self._cache
            while True:
                self._out.append((byte + carry) & 0xFF)
                byte = 0xFF
                self._pending -= 1
                if not self._pending:
                    break
            self._cache = (self.low >> 24) & 0xFF
        self._pending += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def _renorm(self) -> None:
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def encode_regular(self, ctx: Context, bin: int) -> None:
        if self._flushed:
            raise EntropyError("encoder already flushed")
        split = (self.range >> PROB_BITS) * ctx.p1
        if bin:
            self.range = split
        else:
            self.low += split
            self.range -= split
        ctx.update(bin)
        self._renorm()

    def encode_bypass(self, bin: int) -> None:
        if self._flushed:
            raise EntropyError("encoder already flushed")
        half = self.range >> 1
        if bin:
            self.low += half
        self.range = half
        self._renorm()

    def flush(self) -> bytes:
        if self._flushed:
            raise EntropyError("encoder already flushed")
        for _ in range(FLUSH_BYTES):
            self._shift_low()
        self._flushed = True
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes):
        if len(data) < FLUSH_BYTES:
            raise EntropyError("payload shorter than coder preamble")
        self._data = bytes(data)
        self.range = RANGE_INIT
        self.code = int.from_bytes(self._data[1:FLUSH_BYTES], "big")
        self._pos = FLUSH_BYTES

    @property
    def consumed(self) -> int:
        return self._pos

    def _renorm(self) -> None:
        while self.range < TOP:
            if self._pos >= len(self._data):
                raise EntropyError("payload exhausted")
            self.code = ((self.code << 8) | self._data[self._pos]) & 0xFFFFFFFF
            self.range <<= 8
            self._pos += 1

    def decode_regular(self, ctx: Context) -> int:
        split = (self.range >> PROB_BITS) * ctx.p1
        if self.code < split:
            self.range = split
            bin = 1
        else:
            self.code -= split
            self.range -= split
            bin = 0
        ctx.update(bin)
        self._renorm()
        return bin

    def decode_bypass(self) -> int:
        half = self.range >> 1
        if self.code >= half:
            self.code -= half
            bin = 1
        else:
            bin = 0
        self.range = half
        self._renorm()
        return bin


# -- binarization ----------------------------------------------------------------


class Bin(NamedTuple):
    value: int
    ctx: int | None = None  # None means bypass
    encryptable: bool = False


def exp_golomb(value: int, k: int) -> list[int]:
    """Order-k exp-Golomb: (bitlen(v + 2^k) - 1 - k) zeros, then v + 2^k in binary."""
    if value < 0:
        raise ValueError("exp-Golomb codes non-negative values")
    x = value + (1 << k)
    nbits = x.bit_length()
    return [0] * (nbits - 1 - k) + [(x >> i) & 1 for i in range(nbits - 1, -1, -1)]


def _read_exp_golomb(next_bin, k: int) -> int:
    zeros = 0
    while next_bin() == 0:
        zeros += 1
        if zeros > 32:
            raise EntropyError("exp-Golomb prefix too long")
    x = 1
    for _ in range(zeros + k):
        x = (x << 1) | next_bin()
    return x - (1 << k)


def binarize_level(level: int, gt1_ctx: int = 0) -> list[Bin]:
    """Bins for one nonzero coefficient level, excluding its significance flag."""
    if level == 0:
        raise ValueError("zero level has no binarization (significance flag covers it)")
    mag = abs(level)
    bins = [Bin(int(mag >= 2), gt1_ctx)]
    if mag >= 2:
        bins += [Bin(b) for b in exp_golomb(mag - 2, 0)]
    bins.append(Bin(int(level < 0), None, True))
    return bins


def binarize_mvd(d: int, ctx: int = 0) -> list[Bin]:
    bins = [Bin(int(d != 0), ctx)]
    if d:
        bins += [Bin(b) for b in exp_golomb(abs(d) - 1, 1)]
        bins.append(Bin(int(d < 0), None, True))
    return bins


def _reader(bins):
    it = iter(bins)

    def next_bin():
        try:
            b = next(it)
        except StopIteration:
            raise EntropyError("bin sequence ended early") from None
        return b.value if isinstance(b, Bin) else int(b)

    return next_bin


def debinarize_level(bins) -> int:
    nxt = _reader(bins)
    mag = 1
    if nxt():
        mag = 2 + _read_exp_golomb(nxt, 0)
    return -mag if nxt() else mag


def debinarize_mvd(bins) -> int:
    nxt = _reader(bins)
    if not nxt():
        return 0
    mag = 1 + _read_exp_golomb(nxt, 1)
    return -mag if nxt() else mag


# -- numba kernels ---------------------------------------------------------------


@nb.njit(cache=True)
def _grow(buf, n):
    if n < buf.shape[0]:
        return buf
    bigger = np.empty(buf.shape[0] * 2, dtype=np.uint8)
    bigger[: buf.shape[0]] = buf
    return bigger


@nb.njit(cache=True)
def _shift_low(st, buf, n):
    # st = [low, range, cache, pending]
    low = st[0]
    if low < 0xFF000000 or low >= 4294967296:
        carry = low >> 32
        byte = st[2]
        while True:
            buf = _grow(buf, n)
            buf[n] = (byte + carry) & 0xFF
            n += 1
            byte = 0xFF
            st[3] -= 1
            if st[3] == 0:
                break
        st[2] = (low >> 24) & 0xFF
    st[3] += 1
    st[0] = (low & 0x00FFFFFF) << 8
    return buf, n


@nb.njit(cache=True)
def _put(st, probs, buf, n, bin, ctx):
    if ctx < 0:
        half = st[1] >> 1
        if bin:
            st[0] += half
        st[1] = half
    else:
        p1 = probs[ctx]
        split = (st[1] >> 12) * p1
        if bin:
            st[1] = split
            p1 += (4096 - p1) >> 5
        else:
            st[0] += split
            st[1] -= split
            p1 -= p1 >> 5
        if p1 < 1:
            p1 = 1
        elif p1 > 4095:
            p1 = 4095
        probs[ctx] = p1
    while st[1] < 16777216:
        st[1] <<= 8
        buf, n = _shift_low(st, buf, n)
    return buf, n


@nb.njit(cache=True)
def _finish(st, buf, n):
    for _ in range(5):
        buf, n = _shift_low(st, buf, n)
    return buf[:n].copy()


@nb.njit(cache=True)
def _new_encoder(n_bins_hint):
    st = np.zeros(4, dtype=np.int64)
    st[1] = 0xFFFFFFFF
    st[3] = 1
    buf = np.empty(max(64, n_bins_hint // 4 + 16), dtype=np.uint8)
    return st, buf


@nb.njit(cache=True)
def _encode_bins(bins, ctx_ids, n_ctx):
    st, buf = _new_encoder(bins.shape[0])
    probs = np.full(max(n_ctx, 1), 2048, dtype=np.int64)
    n = 0
    for i in range(bins.shape[0]):
        buf, n = _put(st, probs, buf, n, bins[i], ctx_ids[i])
    return _finish(st, buf, n)


# decoder state: [range, code, pos, error]
@nb.njit(cache=True)
def _new_decoder(data):
    st = np.zeros(4, dtype=np.int64)
    st[0] = 0xFFFFFFFF
    if data.shape[0] < 5:
        st[3] = 1
        return st
    code = 0
    for i in range(1, 5):
        code = (code << 8) | data[i]
    st[1] = code
    st[2] = 5
    return st


@nb.njit(cache=True)
def _get(st, probs, data, ctx):
    if st[3] != 0:
        return 0
    if ctx < 0:
        half = st[0] >> 1
        if st[1] >= half:
            st[1] -= half
            bin = 1
        else:
            bin = 0
        st[0] = half
    else:
        p1 = probs[ctx]
        split = (st[0] >> 12) * p1
        if st[1] < split:
            st[0] = split
            bin = 1
            p1 += (4096 - p1) >> 5
        else:
            st[1] -= split
            st[0] -= split
            bin = 0
            p1 -= p1 >> 5
        if p1 < 1:
            p1 = 1
        elif p1 > 4095:
            p1 = 4095
        probs[ctx] = p1
    while st[0] < 16777216:
        if st[2] >= data.shape[0]:
            st[3] = 1
            return 0
        st[1] = ((st[1] << 8) | data[st[2]]) & 0xFFFFFFFF
        st[0] <<= 8
        st[2] += 1
    return bin


@nb.njit(cache=True)
def _decode_bins(data, ctx_ids, n_ctx):
    st = _new_decoder(data)
    probs = np.full(max(n_ctx, 1), 2048, dtype=np.int64)
    out = np.zeros(ctx_ids.shape[0], dtype=np.uint8)
    for i in range(ctx_ids.shape[0]):
        out[i] = _get(st, probs, data, ctx_ids[i])
        if st[3] != 0:
            return out, 1
    return out, 0


def _n_contexts(ctx_ids: np.ndarray) -> int:
    return int(ctx_ids.max()) + 1 if ctx_ids.size else 1


def encode_bins(bins, ctx_ids, n_ctx: int | None = None) -> bytes:
    """Code a labeled bin sequence; ``ctx_ids[i] == BYPASS`` marks a bypass bin.

    All contexts start at p1 = 2048.
    """
    bins = np.ascontiguousarray(bins, dtype=np.uint8)
    ctx_ids = np.ascontiguousarray(ctx_ids, dtype=np.int64)
    if bins.shape != ctx_ids.shape:
        raise ValueError("bins and ctx_ids must have equal length")
    return _encode_bins(bins, ctx_ids, n_ctx or _n_contexts(ctx_ids)).tobytes()


def decode_bins(data: bytes, ctx_ids, n_ctx: int | None = None) -> np.ndarray:
    ctx_ids = np.ascontiguousarray(ctx_ids, dtype=np.int64)
    out, err = _decode_bins(np.frombuffer(bytes(data), dtype=np.uint8), ctx_ids, n_ctx or _n_contexts(ctx_ids))
    if err:
        raise EntropyError("payload exhausted")
    return out


def flushed_length(renormalizations: int) -> int:
    """Payload size for a stream whose bins triggered ``renormalizations`` byte shifts."""
    return renormalizations + FLUSH_BYTES
