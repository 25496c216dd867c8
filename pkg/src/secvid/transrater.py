"""Keyless requantization of CVB1 streams to higher QPs.

Open loop requantizes each level on its own. Closed loop also carries a
pixel-domain drift buffer (what the input decoder would show minus what the
output decoder will show), motion-compensates it with the in-stream vectors
and folds it into the next frame's coefficients before requantization.

None of these entry points takes a key: sign bins pass through exactly as
found, encrypted or not. Only :func:`cascade_reference`, the full
decode/re-encode benchmark, needs one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import xqnt
from .codec import (
    FRAME_I,
    BitstreamError,
    CodedBitstream,
    CodedFrame,
    EncoderConfig,
    ParsedFrame,
    cipher_for,
    decode_sequence,
    encode_sequence,
    from_blocks,
    parse_bitstream,
    to_blocks,
)
from .motion import MvSidecar, compensate_frame
from .syntax import FrameSyntax, encode_frame

__all__ = [
    "TransrateError",
    "TransrateJob",
    "DriftStats",
    "transrate_open",
    "transrate_closed",
    "transrate_many",
    "transrate",
    "cascade_reference",
]

log = logging.getLogger(__name__)

DRIFT_LIMIT = 32767


class TransrateError(ValueError):
    pass


@dataclass
class TransrateJob:
    """A keyless transrating request. There is deliberately no key field."""

    input: CodedBitstream
    targets: list[int]
    mode: str = "open"
    mv_sidecar: MvSidecar | None = None

    def run(self) -> list[CodedBitstream]:
        return transrate_many(self.input, self.targets, self.mode)


@dataclass
class DriftStats:
    saturated: int = 0  # drift samples clipped to +-32767
    peak: int = 0
    per_frame_energy: list[float] = field(default_factory=list)


def _check_target(bs: CodedBitstream, q2: int) -> None:
    if not 0 <= q2 <= 51:
        raise TransrateError(f"target qp {q2} outside 0..51")
    if q2 <= bs.header.qp:
        raise TransrateError(f"target qp {q2} must exceed the stream qp {bs.header.qp}")


def _parse(bs: CodedBitstream) -> list[ParsedFrame]:
    try:
        return parse_bitstream(bs)
    except BitstreamError as exc:
        raise TransrateError(f"corrupt input: {exc}") from exc


def _modes(fs: FrameSyntax) -> np.ndarray:
    """Per-macroblock intra flag broadcast over (nmb, 1, 1, 1)."""
    return (fs.mb_types == 0)[:, None, None, None]


def _requant_mag(w16_abs, intra, qp: int, n: int):
    qi = xqnt.quant_spec(qp, n, intra=True)
    qb = xqnt.quant_spec(qp, n, intra=False)
    dz = np.where(intra, qi.deadzone, qb.deadzone)
    return xqnt.quantize_mag(w16_abs, qi.step, dz)


class _Prepared:
    """Target-independent work: parsing and dequantization, done once per input."""

    def __init__(self, bs: CodedBitstream, closed: bool):
        self.bs = bs
        self.header = bs.header
        self.n = bs.header.profile.block_size
        self.parsed = _parse(bs)
        self.w16 = []
        self.residual_in = []
        tspec = xqnt.transform_spec(self.n)
        for pf in self.parsed:
            fs = pf.syntax
            step = xqnt.quant_spec(pf.qp, self.n).step
            w16 = fs.coefs.reshape(fs.coefs.shape[0], -1, self.n, self.n) * (16 * step)
            self.w16.append(w16)
            if closed:
                self.residual_in.append(xqnt.inverse(w16, tspec))

    def output(self, q2: int, levels_per_frame) -> CodedBitstream:
        frames = []
        for pf, levels in zip(self.parsed, levels_per_frame):
            fs = pf.syntax
            out = FrameSyntax(fs.mb_types, fs.mvd, levels.reshape(fs.coefs.shape), self.n)
            frames.append(CodedFrame(pf.frame_type, q2, encode_frame(out)))
        return CodedBitstream(replace(self.header, qp=q2), frames)

    def open_loop(self, q2: int) -> CodedBitstream:
        levels = []
        for pf, w16 in zip(self.parsed, self.w16):
            mag = _requant_mag(np.abs(w16), _modes(pf.syntax), q2, self.n)
            levels.append(np.sign(w16) * mag)
        return self.output(q2, levels)

    def closed_loop(self, q2: int, stats: DriftStats | None = None) -> CodedBitstream:
        h = self.header
        n = self.n
        tspec = xqnt.transform_spec(n)
        step2 = xqnt.quant_spec(q2, n).step
        drift = None
        levels = []
        for pf, w16_in, res_in in zip(self.parsed, self.w16, self.residual_in):
            intra = _modes(pf.syntax)
            if pf.frame_type == FRAME_I or drift is None:
                e_pred = np.zeros_like(w16_in)
            else:
                e_pred = to_blocks(compensate_frame(drift, pf.mvs, h.mb_cols), n)
                e_pred = np.where(intra, 0, e_pred)
            # 16x-raw domain: dequantized input plus the transformed drift prediction
            w16 = w16_in + 16 * xqnt.forward(e_pred, tspec)
            q_out = np.sign(w16) * _requant_mag(np.abs(w16), intra, q2, n)
            res_out = xqnt.inverse(q_out * (16 * step2), tspec)
            err = res_in + e_pred - res_out
            clipped = np.clip(err, -DRIFT_LIMIT, DRIFT_LIMIT)
            if stats is not None:
                stats.saturated += int(np.count_nonzero(clipped != err))
                stats.peak = max(stats.peak, int(np.abs(err).max(initial=0)))
                stats.per_frame_energy.append(float(np.mean(clipped.astype(np.float64) ** 2)))
            drift = tuple(p.astype(np.int16) for p in from_blocks(clipped, n, h.width, h.height))
            levels.append(q_out)
        if stats is not None and stats.saturated:
            log.warning("drift buffer saturated on %d samples", stats.saturated)
        return self.output(q2, levels)


def transrate_open(bs: CodedBitstream, q2: int) -> CodedBitstream:
    """Requantize every level to ``q2``; signs, MVDs and structure copied verbatim."""
    _check_target(bs, q2)
    return _Prepared(bs, closed=False).open_loop(q2)


def transrate_closed(bs: CodedBitstream, q2: int, stats: DriftStats | None = None) -> CodedBitstream:
    """Drift-compensated requantization. Works on the levels as found in the stream."""
    _check_target(bs, q2)
    return _Prepared(bs, closed=True).closed_loop(q2, stats)


def transrate_many(bs: CodedBitstream, targets, mode: str = "closed") -> list[CodedBitstream]:
    """Parse and dequantize once, then requantize to each target.

    Output for each target is byte-identical to the matching single-target call.
    """
    targets = list(targets)
    if mode not in ("open", "closed"):
        raise TransrateError(f"unknown mode {mode!r}")
    for q2 in targets:
        _check_target(bs, q2)
    if not targets:
        return []
    prep = _Prepared(bs, closed=mode == "closed")
    run = prep.closed_loop if mode == "closed" else prep.open_loop
    return [run(q2) for q2 in targets]


def transrate(bs: CodedBitstream, q2: int, mode: str = "closed") -> CodedBitstream:
    if mode == "open":
        return transrate_open(bs, q2)
    if mode == "closed":
        return transrate_closed(bs, q2)
    raise TransrateError(f"unknown mode {mode!r}")


def cascade_reference(bs: CodedBitstream, q2: int, key: bytes | None) -> CodedBitstream:
    """Decode (decrypting with ``key``), then re-encode at ``q2`` reusing the decoded vectors.

    The benchmark path. A wrong key is not detected here; it shows up only as
    poor quality downstream.
    """
    _check_target(bs, q2)
    h = bs.header
    if key is None:
        if h.cipher_kind != 0:
            raise TransrateError("cascade transcoding of an encrypted stream needs the key")
        key = bytes(16)
    cipher = cipher_for(bs, key)
    parsed = parse_bitstream(bs, None if cipher.is_null else cipher)
    video = decode_sequence(bs, key)
    cfg = EncoderConfig(profile=h.profile, qp=q2, gop=h.gop, cipher=cipher)
    return encode_sequence(video, cfg, mvs=[pf.mvs for pf in parsed])
