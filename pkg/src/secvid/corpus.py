"""Seeded synthetic test clips: a panning textured background with moving rectangles."""

from __future__ import annotations

import numpy as np

from .frame_io import Frame, VideoSequence

__all__ = ["synthetic_clip", "synthetic_corpus", "still_clip"]


def _smooth_noise(rng: np.random.Generator, h: int, w: int, cell: int) -> np.ndarray:
    """Bilinear-upsampled uniform noise, values in [0, 1]."""
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.random((gh, gw))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0, x0 = ys.astype(int), xs.astype(int)
    fy, fx = (ys - y0)[:, None], (xs - x0)[None, :]
    a = grid[y0][:, x0]
    b = grid[y0][:, x0 + 1]
    c = grid[y0 + 1][:, x0]
    d = grid[y0 + 1][:, x0 + 1]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def synthetic_clip(seed: int, width: int = 64, height: int = 64, frames: int = 12, fps: int = 30) -> VideoSequence:
    rng = np.random.default_rng(seed)
    pad = 4 * frames + 8
    bh, bw = height + pad, width + pad
    texture = (
        0.55 * _smooth_noise(rng, bh, bw, int(rng.integers(6, 14)))
        + 0.30 * _smooth_noise(rng, bh, bw, int(rng.integers(2, 5)))
        + 0.15 * rng.random((bh, bw))
    )
    luma_bg = 30 + 190 * texture
    cb_bg = 128 + 50 * (_smooth_noise(rng, bh // 2, bw // 2, 8) - 0.5)
    cr_bg = 128 + 50 * (_smooth_noise(rng, bh // 2, bw // 2, 8) - 0.5)
    pan = rng.integers(-2, 3, size=2)
    if not pan.any():
        pan[0] = 1
    rects = []
    for _ in range(int(rng.integers(2, 5))):
        rw, rh = int(rng.integers(8, width // 2)), int(rng.integers(8, height // 2))
        rects.append(
            dict(
                x=float(rng.integers(0, width - rw)), y=float(rng.integers(0, height - rh)),
                w=rw, h=rh, vx=float(rng.integers(-3, 4)), vy=float(rng.integers(-3, 4)),
                luma=float(rng.integers(20, 236)), cb=float(rng.integers(60, 196)), cr=float(rng.integers(60, 196)),
            )
        )
    out = []
    for t in range(frames):
        ox = pad // 2 + int(pan[0]) * t
        oy = pad // 2 + int(pan[1]) * t
        y = luma_bg[oy : oy + height, ox : ox + width].copy()
        u = cb_bg[oy // 2 : oy // 2 + height // 2, ox // 2 : ox // 2 + width // 2].copy()
        v = cr_bg[oy // 2 : oy // 2 + height // 2, ox // 2 : ox // 2 + width // 2].copy()
        for r in rects:
            x0 = int(r["x"] + r["vx"] * t) % width
            y0 = int(r["y"] + r["vy"] * t) % height
            y[y0 : y0 + r["h"], x0 : x0 + r["w"]] = r["luma"]
            u[y0 // 2 : (y0 + r["h"]) // 2, x0 // 2 : (x0 + r["w"]) // 2] = r["cb"]
            v[y0 // 2 : (y0 + r["h"]) // 2, x0 // 2 : (x0 + r["w"]) // 2] = r["cr"]
        y += rng.normal(0, 2.0, y.shape)
        planes = [np.clip(np.rint(p), 0, 255).astype(np.uint8) for p in (y, u, v)]
        out.append(Frame(*planes, index=t))
    return VideoSequence(width, height, fps, 1, out)


def synthetic_corpus(count: int, seed: int = 0, **kwargs) -> list[VideoSequence]:
    return [synthetic_clip(seed * 1000 + i, **kwargs) for i in range(count)]


def still_clip(width: int = 64, height: int = 64, frames: int = 2, seed: int = 0) -> VideoSequence:
    """Identical textured frames (static content)."""
    base = synthetic_clip(seed, width, height, 1)[0]
    return VideoSequence(width, height, 30, 1, [base.copy(index=i) for i in range(frames)])
