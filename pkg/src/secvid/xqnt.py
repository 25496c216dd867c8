"""Integer block transform and odd-symmetric dead-zone quantization.

Every stage here maps ``-x`` to ``-f(x)``. That oddness is what lets a
middlebox requantize coefficients whose signs it cannot read.

Scales used throughout:

* raw: ``W = C @ X @ C.T`` with the integer basis ``C`` (about 128x orthonormal per side),
* 16x-raw: what :func:`dequantize` returns and :func:`inverse` consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "SCALE",
    "QP_BASE",
    "TransformSpec",
    "QuantSpec",
    "transform_spec",
    "quant_spec",
    "delta16",
    "forward",
    "quantize",
    "dequantize",
    "inverse",
    "quantize_mag",
    "dequantize_mag",
    "round_half_away",
]

SCALE = 128
QP_BASE = (10, 11, 13, 14, 16, 18)
_MAG_LIMIT = 2**31 - 1
INV_FRAC_BITS = 24


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class TransformSpec:
    n: int
    basis: np.ndarray = field(repr=False, compare=False)
    rownorm: tuple[int, ...] = field(compare=False)

    @property
    def norm_products(self) -> np.ndarray:
        r = np.array(self.rownorm, dtype=np.int64)
        return np.outer(r, r)


@lru_cache(maxsize=None)
def transform_spec(n: int) -> TransformSpec:
    if n not in (4, 8):
        raise ValueError(f"block size must be 4 or 8, got {n}")
    c = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        b = math.sqrt(1.0 / n) if i == 0 else math.sqrt(2.0 / n)
        for j in range(n):
            c[i, j] = round_half_away(SCALE * b * math.cos((2 * j + 1) * i * math.pi / (2 * n)))
    c.setflags(write=False)
    rownorm = tuple(int(v) for v in (c * c).sum(axis=1))
    return TransformSpec(n, c, rownorm)


def delta16(qp: int) -> int:
    if not 0 <= qp <= 51:
        raise ValueError(f"qp must be in 0..51, got {qp}")
    return QP_BASE[qp % 6] << (qp // 6)


@dataclass(frozen=True)
class QuantSpec:
    qp: int
    n: int
    intra: bool
    step: np.ndarray = field(repr=False, compare=False)  # effective step per position, raw scale

    @property
    def delta16(self) -> int:
        return delta16(self.qp)

    @property
    def deadzone(self) -> np.ndarray:
        """Rounding offset in 16x-raw units."""
        return (16 * self.step) // (3 if self.intra else 6)


@lru_cache(maxsize=None)
def _step_table(qp: int, n: int) -> np.ndarray:
    spec = transform_spec(n)
    d = delta16(qp)
    step = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            # round_half_away(d * sqrt(ri*rj) / S), exact in integers
            step[i, j] = (math.isqrt(d * d * spec.rownorm[i] * spec.rownorm[j]) + SCALE // 2) // SCALE
    assert step.min() >= 1
    step.setflags(write=False)
    return step


def quant_spec(qp: int, n: int, intra: bool = True) -> QuantSpec:
    return QuantSpec(qp, n, bool(intra), _step_table(qp, n))


def _check(a: np.ndarray) -> np.ndarray:
    if a.size and np.abs(a).max() > _MAG_LIMIT:
        raise OverflowError("coefficient magnitude exceeds 31 bits")
    return a


def forward(x: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """``C @ X @ C.T`` for one block or any stack of blocks (last two axes)."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-2:] != (spec.n, spec.n):
        raise ValueError(f"expected {spec.n}x{spec.n} blocks, got {x.shape[-2:]}")
    c = spec.basis
    return _check(c @ x @ c.T)


def quantize_mag(w16_abs, step, deadzone):
    """Level magnitude from a 16x-raw magnitude."""
    return (w16_abs + deadzone) // (16 * step)


def dequantize_mag(q_abs, step):
    return q_abs * 16 * step


def quantize(w: np.ndarray, q: QuantSpec) -> np.ndarray:
    w = np.asarray(w, dtype=np.int64)
    mag = quantize_mag(16 * np.abs(w), q.step, q.deadzone)
    return _check(np.sign(w) * mag)


def dequantize(levels: np.ndarray, q: QuantSpec) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.int64)
    return _check(levels * (16 * q.step))


def inverse(w16: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Reconstruct a residual block from 16x-raw coefficients, clipped to [-255, 255].

    Coefficients are normalized by the row norms into a fixed-point domain with
    ``INV_FRAC_BITS`` fractional bits, then both rounding steps go half away from
    zero so the whole map stays odd.
    """
    w16 = np.asarray(w16, dtype=np.int64)
    rr = spec.norm_products
    v = np.sign(w16) * ((np.abs(w16) * (1 << INV_FRAC_BITS) + 8 * rr) // (16 * rr))
    c = spec.basis
    t = c.T @ v @ c
    x = np.sign(t) * ((np.abs(t) + (1 << (INV_FRAC_BITS - 1))) >> INV_FRAC_BITS)
    return np.clip(x, -255, 255)
