"""Encoder, decoder and the CVB1 container.

Frames are coded I every ``gop`` frames and P otherwise. Intra macroblocks
predict from the constant 128; every macroblock of a P frame is inter-coded
from the previous reconstruction. Encryption happens on syntax values right
before entropy coding: each sign slot whose keystream bit is 1 has its value
negated, which is exactly an XOR of that slot's sign bin.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from . import xqnt
from .cipher import CipherKind, CipherSpec, Keystream
from .entropy import EntropyError
from .frame_io import Frame, VideoSequence
from .motion import (
    MB,
    SEARCH_RANGE,
    MotionVector,
    MvRecord,
    MvSidecar,
    compensate_frame,
    estimate_frame,
    mvds_from_mvs,
    mvs_from_mvds,
)
from .syntax import FrameSyntax, blocks_per_mb, decode_frame, encode_frame, sign_slots, zigzag

__all__ = [
    "Profile",
    "EncoderConfig",
    "BitstreamHeader",
    "CodedFrame",
    "CodedBitstream",
    "BitstreamError",
    "HEADER_SIZE",
    "encode_sequence",
    "encode_with_reconstruction",
    "decode_sequence",
    "parse_bitstream",
    "sign_mask",
    "apply_sign_mask",
    "extract_mv_sidecar",
    "to_blocks",
    "from_blocks",
    "reconstruct",
]

FRAME_I = 0
FRAME_P = 1
VERSION = 1


class BitstreamError(ValueError):
    pass


class Profile(enum.IntEnum):
    A = 0  # 4x4 transform
    H = 1  # 8x8 transform

    @property
    def block_size(self) -> int:
        return 4 if self is Profile.A else 8

    @classmethod
    def parse(cls, value) -> "Profile":
        if isinstance(value, Profile):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(value)


@dataclass(frozen=True)
class EncoderConfig:
    profile: Profile = Profile.A
    qp: int = 12
    gop: int = 16
    search_range: int = SEARCH_RANGE
    cipher: CipherSpec = field(default_factory=CipherSpec)

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile.parse(self.profile))
        if not 0 <= self.qp <= 51:
            raise ValueError(f"qp must be in 0..51, got {self.qp}")
        if not 1 <= self.gop <= 255:
            raise ValueError(f"gop must be in 1..255, got {self.gop}")


# -- container -------------------------------------------------------------------

_HEADER = struct.Struct("<4sBBHHHHBBB12sI")
_FRAME = struct.Struct("<BBI")
HEADER_SIZE = _HEADER.size
_MAGIC = b"CVB1"


@dataclass(frozen=True)
class BitstreamHeader:
    profile: Profile
    width: int
    height: int
    fps_num: int
    fps_den: int
    gop: int
    qp: int
    cipher_kind: CipherKind
    nonce: bytes
    frame_count: int
    version: int = VERSION

    @property
    def mb_cols(self) -> int:
        return self.width // MB

    @property
    def mb_rows(self) -> int:
        return self.height // MB

    @property
    def n_mb(self) -> int:
        return self.mb_cols * self.mb_rows


@dataclass(frozen=True)
class CodedFrame:
    frame_type: int
    qp: int
    payload: bytes


@dataclass
class CodedBitstream:
    header: BitstreamHeader
    frames: list[CodedFrame]

    def to_bytes(self) -> bytes:
        h = self.header
        if h.frame_count != len(self.frames):
            raise BitstreamError("header frame_count disagrees with frame list")
        parts = [
            _HEADER.pack(
                _MAGIC, h.version, int(h.profile), h.width, h.height, h.fps_num, h.fps_den,
                h.gop, h.qp, int(h.cipher_kind), h.nonce, h.frame_count,
            )
        ]
        for f in self.frames:
            parts.append(_FRAME.pack(f.frame_type, f.qp, len(f.payload)))
            parts.append(f.payload)
        return b"".join(parts)

    def write(self, sink: BinaryIO) -> None:
        sink.write(self.to_bytes())

    def __len__(self) -> int:
        return HEADER_SIZE + sum(_FRAME.size + len(f.payload) for f in self.frames)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodedBitstream":
        if len(data) < HEADER_SIZE:
            raise BitstreamError("truncated header")
        magic, version, profile, w, hgt, fn, fd, gop, qp, kind, nonce, count = _HEADER.unpack_from(data, 0)
        if magic != _MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BitstreamError(f"unsupported version {version}")
        try:
            header = BitstreamHeader(Profile(profile), w, hgt, fn, fd, gop, qp, CipherKind(kind), nonce, count, version)
        except ValueError as exc:
            raise BitstreamError(str(exc)) from exc
        if w % MB or hgt % MB or not w or not hgt:
            raise BitstreamError(f"dimensions {w}x{hgt} are not macroblock aligned")
        pos = HEADER_SIZE
        frames = []
        for i in range(count):
            if pos + _FRAME.size > len(data):
                raise BitstreamError(f"truncated frame header {i}")
            ftype, fqp, plen = _FRAME.unpack_from(data, pos)
            pos += _FRAME.size
            if ftype not in (FRAME_I, FRAME_P) or fqp > 51:
                raise BitstreamError(f"bad frame header {i}")
            if pos + plen > len(data):
                raise BitstreamError(f"frame {i} payload overruns the stream")
            frames.append(CodedFrame(ftype, fqp, bytes(data[pos : pos + plen])))
            pos += plen
        if pos != len(data):
            raise BitstreamError(f"{len(data) - pos} trailing bytes")
        return cls(header, frames)

    @classmethod
    def read(cls, source: BinaryIO) -> "CodedBitstream":
        return cls.from_bytes(source.read())


# -- block plumbing --------------------------------------------------------------


def to_blocks(planes, n: int) -> np.ndarray:
    """(y, u, v) planes -> (nmb, nblk, n, n) int64 in macroblock coding order."""
    y, u, v = planes
    out = []
    for plane, size in ((y, MB), (u, 8), (v, 8)):
        h, w = plane.shape
        k = size // n
        b = np.asarray(plane, dtype=np.int64).reshape(h // size, k, n, w // size, k, n)
        out.append(b.transpose(0, 3, 1, 4, 2, 5).reshape((h // size) * (w // size), k * k, n, n))
    return np.concatenate(out, axis=1)


def from_blocks(blocks: np.ndarray, n: int, width: int, height: int):
    n_luma, n_chroma = blocks_per_mb(n)
    mbh, mbw = height // MB, width // MB
    planes = []
    for lo, cnt, size in ((0, n_luma, MB), (n_luma, n_chroma, 8), (n_luma + n_chroma, n_chroma, 8)):
        k = size // n
        b = blocks[:, lo : lo + cnt].reshape(mbh, mbw, k, k, n, n).transpose(0, 2, 4, 1, 3, 5)
        planes.append(b.reshape(mbh * size, mbw * size))
    return tuple(planes)


def _quant_specs(qp: int, n: int):
    return xqnt.quant_spec(qp, n, intra=True), xqnt.quant_spec(qp, n, intra=False)


def dequantized(fs: FrameSyntax, qp: int) -> np.ndarray:
    """16x-raw coefficients (nmb, nblk, n, n)."""
    n = fs.n
    step = xqnt.quant_spec(qp, n).step
    return fs.coefs.reshape(fs.coefs.shape[0], -1, n, n) * (16 * step)


def residual_from(fs: FrameSyntax, qp: int) -> np.ndarray:
    return xqnt.inverse(dequantized(fs, qp), xqnt.transform_spec(fs.n))


def reconstruct(pred_blocks: np.ndarray, residual: np.ndarray) -> np.ndarray:
    return np.clip(pred_blocks + residual, 0, 255)


# -- encryption on syntax values ---------------------------------------------------


def sign_mask(spec: CipherSpec, frame_index: int, n_mb: int, n: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-slot keystream bits as (mvd mask (nmb, 2), coef mask (nmb, nblk, n*n) natural order)."""
    if spec.is_null:
        return None
    n_luma, n_chroma = blocks_per_mb(n)
    nblk = n_luma + 2 * n_chroma
    bits = Keystream(spec, frame_index).take(sign_slots(n_mb, n)).reshape(n_mb, 2 + nblk * n * n)
    mvd_mask = bits[:, :2]
    scanned = bits[:, 2:].reshape(n_mb, nblk, n * n)
    coef_mask = np.empty_like(scanned)
    coef_mask[..., zigzag(n)] = scanned
    return mvd_mask, coef_mask


def apply_sign_mask(fs: FrameSyntax, spec: CipherSpec, frame_index: int) -> FrameSyntax:
    """Flip the sign bins selected by the keystream (encryption and decryption alike)."""
    masks = sign_mask(spec, frame_index, fs.coefs.shape[0], fs.n)
    if masks is None:
        return fs
    mvd_mask, coef_mask = masks
    inter = (fs.mb_types == 1)[:, None]
    mvd = np.where((mvd_mask == 1) & inter, -fs.mvd, fs.mvd)
    coefs = np.where(coef_mask == 1, -fs.coefs, fs.coefs)
    return FrameSyntax(fs.mb_types.copy(), mvd, coefs, fs.n)


# -- encoder ---------------------------------------------------------------------


def _planes(f: Frame):
    return f.y, f.u, f.v


def _frame_from_blocks(blocks, n, w, h, index) -> Frame:
    y, u, v = from_blocks(blocks, n, w, h)
    return Frame(y.astype(np.uint8), u.astype(np.uint8), v.astype(np.uint8), index)


def _code_frame(src_blocks, pred_blocks, intra: bool, qp: int, n: int):
    """Transform, quantize and locally reconstruct one frame's blocks."""
    tspec = xqnt.transform_spec(n)
    qspec = xqnt.quant_spec(qp, n, intra=intra)
    levels = xqnt.quantize(xqnt.forward(src_blocks - pred_blocks, tspec), qspec)
    recon = reconstruct(pred_blocks, xqnt.inverse(xqnt.dequantize(levels, qspec), tspec))
    return levels, recon


def _header_for(video: VideoSequence, cfg: EncoderConfig, count: int) -> BitstreamHeader:
    return BitstreamHeader(
        cfg.profile, video.width, video.height, video.fps_num, video.fps_den,
        cfg.gop, cfg.qp, cfg.cipher.kind, cfg.cipher.nonce, count,
    )


def encode_with_reconstruction(video: VideoSequence, cfg: EncoderConfig, mvs=None):
    """Encode and also return the encoder's own (true-sign) reconstruction.

    ``mvs``, when given, is a per-frame list of (nmb, 2) vectors used instead of
    motion search (entries for intra frames are ignored).
    """
    n = cfg.profile.block_size
    w, h = video.width, video.height
    mbw, mbh = w // MB, h // MB
    nmb = mbw * mbh
    n_luma, n_chroma = blocks_per_mb(n)
    nblk = n_luma + 2 * n_chroma
    frames = []
    recon_frames = []
    ref = None
    for i, frame in enumerate(video.frames):
        if (frame.width, frame.height) != (w, h):
            raise ValueError(f"frame {i} has dimensions {frame.width}x{frame.height}")
        src = to_blocks(_planes(frame), n)
        intra = i % cfg.gop == 0
        if intra:
            pred = np.full_like(src, 128)
            mb_types = np.zeros(nmb, np.int64)
            mvd = np.zeros((nmb, 2), np.int64)
        else:
            if mvs is not None:
                frame_mvs = np.asarray(mvs[i], dtype=np.int64).reshape(nmb, 2)
            else:
                frame_mvs = estimate_frame(frame, ref, cfg.search_range)
            pred = to_blocks(compensate_frame(_planes(ref), frame_mvs, mbw), n)
            mb_types = np.ones(nmb, np.int64)
            mvd = mvds_from_mvs(frame_mvs, mbw, mbh)
        levels, recon = _code_frame(src, pred, intra, cfg.qp, n)
        fs = FrameSyntax(mb_types, mvd, levels.reshape(nmb, nblk, n * n), n)
        payload = encode_frame(apply_sign_mask(fs, cfg.cipher, i))
        frames.append(CodedFrame(FRAME_I if intra else FRAME_P, cfg.qp, payload))
        ref = _frame_from_blocks(recon, n, w, h, i)
        recon_frames.append(ref)
    bs = CodedBitstream(_header_for(video, cfg, len(frames)), frames)
    return bs, VideoSequence(w, h, video.fps_num, video.fps_den, recon_frames)


def encode_sequence(video: VideoSequence, cfg: EncoderConfig, mvs=None) -> CodedBitstream:
    return encode_with_reconstruction(video, cfg, mvs)[0]


# -- decoder ---------------------------------------------------------------------


@dataclass
class ParsedFrame:
    frame_type: int
    qp: int
    syntax: FrameSyntax
    mvs: np.ndarray  # (nmb, 2) as decoded, before any position clamping


def parse_bitstream(bs: CodedBitstream, cipher: CipherSpec | None = None) -> list[ParsedFrame]:
    """Entropy-decode every frame; decrypt sign slots when ``cipher`` is given."""
    h = bs.header
    n = h.profile.block_size
    out = []
    for i, cf in enumerate(bs.frames):
        try:
            fs = decode_frame(cf.payload, h.n_mb, n)
        except EntropyError as exc:
            raise BitstreamError(f"frame {i}: {exc}") from exc
        if (cf.frame_type == FRAME_I) != bool((fs.mb_types == 0).all()):
            raise BitstreamError(f"frame {i}: macroblock types contradict frame type")
        if cf.frame_type == FRAME_P and i == 0:
            raise BitstreamError("first frame must be intra")
        if cipher is not None:
            fs = apply_sign_mask(fs, cipher, i)
        mvs = mvs_from_mvds(fs.mvd, fs.mb_types, h.mb_cols, h.mb_rows)
        out.append(ParsedFrame(cf.frame_type, cf.qp, fs, mvs))
    return out


def cipher_for(bs: CodedBitstream, key: bytes) -> CipherSpec:
    return CipherSpec(bs.header.cipher_kind, key, bs.header.nonce)


def decode_parsed(header: BitstreamHeader, parsed: list[ParsedFrame]) -> VideoSequence:
    n = header.profile.block_size
    w, h = header.width, header.height
    frames = []
    ref = None
    for i, pf in enumerate(parsed):
        if pf.frame_type == FRAME_I:
            pred = np.full((header.n_mb, pf.syntax.coefs.shape[1], n, n), 128, np.int64)
        else:
            pred = to_blocks(compensate_frame(_planes(ref), pf.mvs, header.mb_cols), n)
        recon = reconstruct(pred, residual_from(pf.syntax, pf.qp))
        ref = _frame_from_blocks(recon, n, w, h, i)
        frames.append(ref)
    return VideoSequence(w, h, header.fps_num, header.fps_den, frames)


def decode_sequence(bs: CodedBitstream, key: bytes | None = None) -> VideoSequence:
    """Decode to pixels. Without ``key`` encrypted signs are used as they are (scrambled output)."""
    cipher = cipher_for(bs, key) if key is not None and bs.header.cipher_kind != CipherKind.NULL else None
    return decode_parsed(bs.header, parse_bitstream(bs, cipher))


def extract_mv_sidecar(bs: CodedBitstream) -> MvSidecar:
    """Motion vectors of every inter macroblock, decoded without a key."""
    h = bs.header
    records = []
    for i, pf in enumerate(parse_bitstream(bs)):
        for m in np.flatnonzero(pf.syntax.mb_types == 1):
            mv = pf.mvs[m]
            records.append(MvRecord(i, int(m % h.mb_cols), int(m // h.mb_cols), MotionVector(int(mv[0]), int(mv[1]))))
    return MvSidecar(records)
