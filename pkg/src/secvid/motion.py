"""Full-pel motion: exhaustive SAD search, compensation, median MV prediction, MV sidecar files."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

import numba as nb
import numpy as np

from .frame_io import Frame

__all__ = [
    "MB",
    "SEARCH_RANGE",
    "MotionVector",
    "MvRecord",
    "MvSidecar",
    "SidecarError",
    "estimate",
    "estimate_frame",
    "compensate",
    "compensate_frame",
    "predict_mv",
    "mvds_from_mvs",
    "mvs_from_mvds",
    "chroma_mv",
]

MB = 16
SEARCH_RANGE = 16


class MotionVector(NamedTuple):
    mv_x: int = 0
    mv_y: int = 0


@dataclass(frozen=True)
class MvRecord:
    frame_index: int
    mb_x: int
    mb_y: int
    mv: MotionVector
    ref_index: int = 0


def _candidate_order(search_range: int) -> np.ndarray:
    cands = [(dx, dy) for dy in range(-search_range, search_range + 1) for dx in range(-search_range, search_range + 1)]
    cands.sort(key=lambda c: (abs(c[0]) + abs(c[1]), c[1], c[0]))
    return np.array(cands, dtype=np.int64)


@nb.njit(cache=True)
def _search(cur, ref, mbs, cands):
    h, w = ref.shape
    out = np.zeros((mbs.shape[0], 3), dtype=np.int64)
    for m in range(mbs.shape[0]):
        x0 = mbs[m, 0] * 16
        y0 = mbs[m, 1] * 16
        best = -1
        bx = 0
        by = 0
        for c in range(cands.shape[0]):
            dx = cands[c, 0]
            dy = cands[c, 1]
            x = x0 + dx
            y = y0 + dy
            if x < 0 or y < 0 or x + 16 > w or y + 16 > h:
                continue
            sad = 0
            for r in range(16):
                for q in range(16):
                    sad += abs(np.int64(cur[y0 + r, x0 + q]) - np.int64(ref[y + r, x + q]))
                if best >= 0 and sad >= best:
                    break
            if best < 0 or sad < best:
                best = sad
                bx = dx
                by = dy
        out[m, 0] = bx
        out[m, 1] = by
        out[m, 2] = best
    return out


def estimate(cur: Frame, ref: Frame, mb_x: int, mb_y: int, search_range: int = SEARCH_RANGE):
    """Best in-bounds full-pel vector for one macroblock and its luma SAD.

    The predictor for the block is ``ref`` at ``(x + mv_x, y + mv_y)``. Ties go to the
    smaller ``|mv_x| + |mv_y|``, then smaller ``mv_y``, then smaller ``mv_x``.
    """
    if not (0 <= mb_x * MB <= cur.width - MB and 0 <= mb_y * MB <= cur.height - MB):
        raise ValueError(f"macroblock ({mb_x}, {mb_y}) outside the frame")
    res = _search(cur.y, ref.y, np.array([[mb_x, mb_y]], dtype=np.int64), _candidate_order(search_range))
    return MotionVector(int(res[0, 0]), int(res[0, 1])), int(res[0, 2])


def estimate_frame(cur: Frame, ref: Frame, search_range: int = SEARCH_RANGE) -> np.ndarray:
    """Vectors for every macroblock in raster order, shape (nmb, 2)."""
    mbw, mbh = cur.width // MB, cur.height // MB
    mbs = np.array([(x, y) for y in range(mbh) for x in range(mbw)], dtype=np.int64)
    return _search(cur.y, ref.y, mbs, _candidate_order(search_range))[:, :2].copy()


def chroma_mv(mv) -> tuple[int, int]:
    # halve toward zero
    return int(mv[0] / 2), int(mv[1] / 2)


def _clamped(pos: int, size: int, limit: int) -> int:
    return min(max(pos, 0), limit - size)


def compensate(ref: Frame, mb_x: int, mb_y: int, mv, clamp: bool = False):
    """Predictor blocks (16x16 luma, 8x8 Cb, 8x8 Cr) at the displaced position.

    With ``clamp`` the block positions are pinned inside the frame instead of
    raising; decoders fed sign-scrambled vectors rely on that.
    """
    x, y = mb_x * MB + mv[0], mb_y * MB + mv[1]
    cdx, cdy = chroma_mv(mv)
    cx, cy = mb_x * 8 + cdx, mb_y * 8 + cdy
    h, w = ref.y.shape
    if clamp:
        x, y = _clamped(x, MB, w), _clamped(y, MB, h)
        cx, cy = _clamped(cx, 8, w // 2), _clamped(cy, 8, h // 2)
    elif not (0 <= x <= w - MB and 0 <= y <= h - MB and 0 <= cx <= w // 2 - 8 and 0 <= cy <= h // 2 - 8):
        raise ValueError(f"motion vector {tuple(mv)} leaves the reference frame at MB ({mb_x}, {mb_y})")
    return ref.y[y : y + MB, x : x + MB], ref.u[cy : cy + 8, cx : cx + 8], ref.v[cy : cy + 8, cx : cx + 8]


@nb.njit(cache=True)
def _mc_plane(ref, mvs, mbw, size, chroma):
    h, w = ref.shape
    out = np.empty_like(ref)
    for m in range(mvs.shape[0]):
        bx = (m % mbw) * size
        by = (m // mbw) * size
        dx = mvs[m, 0]
        dy = mvs[m, 1]
        if chroma:
            # int() truncation toward zero
            dx = -((-dx) // 2) if dx < 0 else dx // 2
            dy = -((-dy) // 2) if dy < 0 else dy // 2
        x = min(max(bx + dx, 0), w - size)
        y = min(max(by + dy, 0), h - size)
        out[by : by + size, bx : bx + size] = ref[y : y + size, x : x + size]
    return out


def compensate_frame(ref_planes, mvs: np.ndarray, mbw: int):
    """Whole-frame motion-compensated prediction for (y, u, v) planes of any dtype; positions clamped."""
    mvs = np.ascontiguousarray(mvs, dtype=np.int64)
    y, u, v = ref_planes
    return (
        _mc_plane(np.ascontiguousarray(y), mvs, mbw, MB, False),
        _mc_plane(np.ascontiguousarray(u), mvs, mbw, 8, True),
        _mc_plane(np.ascontiguousarray(v), mvs, mbw, 8, True),
    )


def predict_mv(left=None, top=None, top_right=None) -> MotionVector:
    """Componentwise median of three neighbours; a missing neighbour counts as (0, 0)."""
    nbrs = [n if n is not None else (0, 0) for n in (left, top, top_right)]
    xs = sorted(n[0] for n in nbrs)
    ys = sorted(n[1] for n in nbrs)
    return MotionVector(int(xs[1]), int(ys[1]))


def _neighbour_stack(mvs: np.ndarray, mbw: int, mbh: int):
    grid = mvs.reshape(mbh, mbw, 2)
    left = np.zeros_like(grid)
    top = np.zeros_like(grid)
    top_right = np.zeros_like(grid)
    left[:, 1:] = grid[:, :-1]
    top[1:, :] = grid[:-1, :]
    top_right[1:, :-1] = grid[:-1, 1:]
    return np.stack([left, top, top_right]).reshape(3, -1, 2)


def mvds_from_mvs(mvs: np.ndarray, mbw: int, mbh: int) -> np.ndarray:
    """MVDs against the median predictor, all macroblocks inter."""
    pred = np.median(_neighbour_stack(np.asarray(mvs, dtype=np.int64), mbw, mbh), axis=0).astype(np.int64)
    return np.asarray(mvs, dtype=np.int64) - pred


@nb.njit(cache=True)
def _accumulate(mvd, inter, mbw, mbh):
    mvs = np.zeros_like(mvd)
    for m in range(mvd.shape[0]):
        if not inter[m]:
            continue
        bx = m % mbw
        by = m // mbw
        for c in range(2):
            a = mvs[m - 1, c] if bx > 0 else 0
            b = mvs[m - mbw, c] if by > 0 else 0
            t = mvs[m - mbw + 1, c] if (by > 0 and bx < mbw - 1) else 0
            med = max(min(a, b), min(max(a, b), t))
            mvs[m, c] = med + mvd[m, c]
    return mvs


def mvs_from_mvds(mvd: np.ndarray, mb_types: np.ndarray, mbw: int, mbh: int) -> np.ndarray:
    """Rebuild vectors in raster order; intra macroblocks hold (0, 0)."""
    return _accumulate(np.ascontiguousarray(mvd, dtype=np.int64), np.ascontiguousarray(mb_types, dtype=np.int64), mbw, mbh)


# -- sidecar file ----------------------------------------------------------------

_SIDECAR_MAGIC = b"MVS1"
_RECORD = struct.Struct("<IHHhhB")


class SidecarError(ValueError):
    pass


def _sat16(v: int) -> int:
    return max(-32768, min(32767, int(v)))


@dataclass
class MvSidecar:
    records: list[MvRecord]

    def __len__(self):
        return len(self.records)

    def to_bytes(self) -> bytes:
        parts = [_SIDECAR_MAGIC, struct.pack("<I", len(self.records))]
        for r in self.records:
            parts.append(_RECORD.pack(r.frame_index, r.mb_x, r.mb_y, _sat16(r.mv.mv_x), _sat16(r.mv.mv_y), r.ref_index))
        return b"".join(parts)

    def write(self, sink: BinaryIO) -> None:
        sink.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "MvSidecar":
        if data[:4] != _SIDECAR_MAGIC:
            raise SidecarError("not an MVS1 sidecar")
        if len(data) < 8:
            raise SidecarError("truncated sidecar header")
        (count,) = struct.unpack_from("<I", data, 4)
        if len(data) != 8 + count * _RECORD.size:
            raise SidecarError(f"sidecar claims {count} records but holds {len(data) - 8} bytes")
        recs = []
        for i in range(count):
            f, x, y, mx, my, ref = _RECORD.unpack_from(data, 8 + i * _RECORD.size)
            recs.append(MvRecord(f, x, y, MotionVector(mx, my), ref))
        return cls(recs)
