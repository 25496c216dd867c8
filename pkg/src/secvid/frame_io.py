"""Raw video I/O: YUV4MPEG2 (4:2:0) sequences and binary PPM export."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

__all__ = [
    "Frame",
    "VideoSequence",
    "Y4MError",
    "read_y4m",
    "write_y4m",
    "frame_to_rgb",
    "write_ppm",
]

_Y4M_MAGIC = b"YUV4MPEG2"
_ACCEPTED_COLORSPACES = {"420", "420mpeg2"}


class Y4MError(ValueError):
    pass


@dataclass(eq=False)
class Frame:
    """One 8-bit 4:2:0 picture. ``y`` is (H, W); ``u`` and ``v`` are (H/2, W/2)."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    index: int = 0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.uint8)
        self.u = np.asarray(self.u, dtype=np.uint8)
        self.v = np.asarray(self.v, dtype=np.uint8)
        h, w = self.y.shape
        if self.u.shape != (h // 2, w // 2) or self.v.shape != (h // 2, w // 2):
            raise ValueError(f"chroma planes must be {(h // 2, w // 2)}, got {self.u.shape}/{self.v.shape}")
        if self.index < 0:
            raise ValueError("frame index must be >= 0")

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def planes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.y, self.u, self.v

    @classmethod
    def blank(cls, width: int, height: int, value=(16, 128, 128), index: int = 0) -> "Frame":
        y = np.full((height, width), value[0], np.uint8)
        u = np.full((height // 2, width // 2), value[1], np.uint8)
        v = np.full((height // 2, width // 2), value[2], np.uint8)
        return cls(y, u, v, index)

    def copy(self, index: int | None = None) -> "Frame":
        return Frame(self.y.copy(), self.u.copy(), self.v.copy(), self.index if index is None else index)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.index == other.index
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )


@dataclass(eq=False)
class VideoSequence:
    width: int
    height: int
    fps_num: int = 30
    fps_den: int = 1
    frames: list[Frame] = field(default_factory=list)

    def __post_init__(self):
        if self.width % 16 or self.height % 16 or self.width <= 0 or self.height <= 0:
            raise ValueError(f"dimensions must be positive multiples of 16, got {self.width}x{self.height}")
        for i, f in enumerate(self.frames):
            if (f.width, f.height) != (self.width, self.height):
                raise ValueError(f"frame {i} is {f.width}x{f.height}, sequence is {self.width}x{self.height}")
            if f.index != i:
                raise ValueError(f"frame indices must be contiguous from 0 (position {i} has index {f.index})")

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i) -> Frame:
        return self.frames[i]

    @property
    def frame_size(self) -> int:
        return self.width * self.height * 3 // 2

    def __eq__(self, other):
        if not isinstance(other, VideoSequence):
            return NotImplemented
        return (
            (self.width, self.height, self.fps_num, self.fps_den) == (other.width, other.height, other.fps_num, other.fps_den)
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )


def _parse_header(line: bytes) -> dict:
    tokens = line.split(b" ")
    if tokens[0] != _Y4M_MAGIC:
        raise Y4MError("missing YUV4MPEG2 signature")
    params = {"C": "420"}
    for tok in tokens[1:]:
        if not tok:
            continue
        key, value = chr(tok[0]), tok[1:].decode("ascii", errors="replace")
        params[key] = value
    for required in ("W", "H"):
        if required not in params:
            raise Y4MError(f"header lacks {required} token")
    if params["C"] not in _ACCEPTED_COLORSPACES:
        raise Y4MError(f"unsupported colorspace C{params['C']}")
    try:
        width, height = int(params["W"]), int(params["H"])
        num, den = (int(x) for x in params.get("F", "30:1").split(":"))
    except ValueError as exc:
        raise Y4MError(f"malformed header: {line!r}") from exc
    return {"width": width, "height": height, "fps_num": num, "fps_den": den}


def read_y4m(source: BinaryIO | bytes) -> VideoSequence:
    """Read every frame of a 4:2:0 YUV4MPEG2 stream.

    ``source`` may be a binary file object or the raw bytes. Raises
    :class:`Y4MError` on a malformed header, a truncated frame, or any
    colorspace other than plain/mpeg2-sited 4:2:0.
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(bytes(source))
    header = source.readline()
    if not header.endswith(b"\n"):
        raise Y4MError("unterminated stream header")
    info = _parse_header(header[:-1])
    w, h = info["width"], info["height"]
    if w <= 0 or h <= 0 or w % 16 or h % 16:
        raise Y4MError(f"dimensions {w}x{h} are not positive multiples of 16")
    ysize, csize = w * h, (w // 2) * (h // 2)
    frames = []
    while True:
        marker = source.readline()
        if not marker:
            break
        if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
            raise Y4MError(f"bad frame marker at frame {len(frames)}")
        payload = source.read(ysize + 2 * csize)
        if len(payload) != ysize + 2 * csize:
            raise Y4MError(f"truncated frame {len(frames)}: {len(payload)} of {ysize + 2 * csize} bytes")
        buf = np.frombuffer(payload, dtype=np.uint8)
        frames.append(
            Frame(
                buf[:ysize].reshape(h, w).copy(),
                buf[ysize : ysize + csize].reshape(h // 2, w // 2).copy(),
                buf[ysize + csize :].reshape(h // 2, w // 2).copy(),
                len(frames),
            )
        )
    return VideoSequence(w, h, info["fps_num"], info["fps_den"], frames)


def write_y4m(seq: VideoSequence, sink: BinaryIO) -> None:
    sink.write(f"YUV4MPEG2 W{seq.width} H{seq.height} F{seq.fps_num}:{seq.fps_den} Ip A1:1 C420\n".encode("ascii"))
    for f in seq.frames:
        sink.write(b"FRAME\n")
        sink.write(f.y.tobytes())
        sink.write(f.u.tobytes())
        sink.write(f.v.tobytes())


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def frame_to_rgb(f: Frame) -> np.ndarray:
    """BT.601 limited-range YUV -> RGB, nearest chroma replication. Returns (H, W, 3) uint8."""
    y = f.y.astype(np.float64) - 16.0
    u = np.repeat(np.repeat(f.u, 2, axis=0), 2, axis=1).astype(np.float64) - 128.0
    v = np.repeat(np.repeat(f.v, 2, axis=0), 2, axis=1).astype(np.float64) - 128.0
    r = 1.164 * y + 1.596 * v
    g = 1.164 * y - 0.813 * v - 0.391 * u
    b = 1.164 * y + 2.018 * u
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(_round_half_away(rgb), 0, 255).astype(np.uint8)


def write_ppm(f: Frame, sink: BinaryIO) -> None:
    rgb = frame_to_rgb(f)
    sink.write(f"P6\n{f.width} {f.height}\n255\n".encode("ascii"))
    sink.write(rgb.tobytes())
