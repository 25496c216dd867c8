"""Quality and security measurements, plus the multi-QP crypto-transrating experiment."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cipher import CipherKind, CipherSpec
from .codec import EncoderConfig, Profile, decode_sequence, encode_sequence
from .frame_io import Frame, VideoSequence, frame_to_rgb, read_y4m, write_ppm
from .transrater import transrate_many

__all__ = [
    "INFINITE",
    "psnr",
    "ssim",
    "sequence_psnr",
    "mean_ssim",
    "delta_percent",
    "delta_bitrate",
    "delta_psnr",
    "delta_time",
    "QualityReport",
    "HistogramReport",
    "quality_report",
    "histogram",
    "entropy",
    "laplacian_edges",
    "pixelate",
    "ExperimentConfig",
    "run_experiment",
    "RESULT_COLUMNS",
    "TIMING_COLUMNS",
]

INFINITE = math.inf  # PSNR of identical planes
SSIM_WINDOW = 8
C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


def _pair(ref, test) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"plane shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _psnr_from_mse(mse: float) -> float:
    return INFINITE if mse == 0 else 10.0 * math.log10(255.0**2 / mse)


def psnr(ref, test) -> float:
    a, b = _pair(ref, test)
    return _psnr_from_mse(float(np.mean((a - b) ** 2)))


def ssim(ref, test) -> float:
    """Mean SSIM over every 8x8 window (stride 1, uniform weights, population moments)."""
    a, b = _pair(ref, test)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"planes must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    win = np.lib.stride_tricks.sliding_window_view
    wa = win(a, (SSIM_WINDOW, SSIM_WINDOW))
    wb = win(b, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(-1, -2))
    mu_b = wb.mean(axis=(-1, -2))
    var_a = wa.var(axis=(-1, -2))
    var_b = wb.var(axis=(-1, -2))
    cov = (wa * wb).mean(axis=(-1, -2)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a**2 + mu_b**2 + C1) * (var_a + var_b + C2)
    return float(np.mean(num / den))


def sequence_psnr(ref: VideoSequence, test: VideoSequence, plane: int = 0) -> float:
    """PSNR of the MSE pooled over all frames."""
    mses = [np.mean((r.planes[plane].astype(np.float64) - t.planes[plane]) ** 2) for r, t in zip(ref, test)]
    return _psnr_from_mse(float(np.mean(mses)))


def mean_ssim(ref: VideoSequence, test: VideoSequence) -> float:
    return float(np.mean([ssim(r.y, t.y) for r, t in zip(ref, test)]))


def delta_percent(base: float, other: float) -> float:
    """``(other - base) / base * 100``; base is the first (AVC-like) operand."""
    if base == 0:
        raise ZeroDivisionError("delta against a zero baseline")
    return (other - base) / base * 100.0


delta_bitrate = delta_psnr = delta_time = delta_percent


@dataclass
class QualityReport:
    psnr_y: list[float]
    psnr_u: list[float]
    psnr_v: list[float]
    seq_psnr_y: float
    seq_psnr_u: float
    seq_psnr_v: float
    ssim_y: list[float]
    mean_ssim_y: float
    bitrate: float | None = None
    enc_time_ms: float | None = None
    transrate_time_ms: float | None = None


def bitrate(size_bytes: int, frames: int, fps_num: int, fps_den: int) -> float:
    """Bits per second for a stream of ``size_bytes`` holding ``frames`` frames."""
    if frames == 0:
        return 0.0
    return size_bytes * 8 * fps_num / (frames * fps_den)


def quality_report(ref: VideoSequence, test: VideoSequence, size_bytes: int | None = None) -> QualityReport:
    if len(ref) != len(test):
        raise ValueError("sequences differ in length")
    per = [[psnr(r.planes[p], t.planes[p]) for r, t in zip(ref, test)] for p in range(3)]
    ss = [ssim(r.y, t.y) for r, t in zip(ref, test)]
    br = None if size_bytes is None else bitrate(size_bytes, len(ref), ref.fps_num, ref.fps_den)
    return QualityReport(
        per[0], per[1], per[2],
        sequence_psnr(ref, test, 0), sequence_psnr(ref, test, 1), sequence_psnr(ref, test, 2),
        ss, float(np.mean(ss)) if ss else math.nan, br,
    )


# -- histograms ------------------------------------------------------------------

CHANNELS = ("r", "g", "b", "y")


@dataclass
class HistogramReport:
    counts: dict[str, np.ndarray]
    entropy_bits: dict[str, float]

    @property
    def mean_entropy(self) -> float:
        return float(np.mean(list(self.entropy_bits.values())))

    def __add__(self, other: "HistogramReport") -> "HistogramReport":
        counts = {c: self.counts[c] + other.counts[c] for c in CHANNELS}
        return HistogramReport(counts, {c: entropy(counts[c]) for c in CHANNELS})


def entropy(hist) -> float:
    """Shannon entropy in bits of a count histogram."""
    h = np.asarray(hist, dtype=np.float64)
    total = h.sum()
    if total == 0:
        return 0.0
    p = h[h > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def histogram(frames) -> HistogramReport:
    """256-bin R, G, B and raw Y counts, pooled over one frame or an iterable of frames."""
    if isinstance(frames, Frame):
        frames = [frames]
    counts = {c: np.zeros(256, dtype=np.int64) for c in CHANNELS}
    for f in frames:
        rgb = frame_to_rgb(f)
        for i, c in enumerate("rgb"):
            counts[c] += np.bincount(rgb[..., i].ravel(), minlength=256)
        counts["y"] += np.bincount(f.y.ravel(), minlength=256)
    return HistogramReport(counts, {c: entropy(counts[c]) for c in CHANNELS})


# -- image tests ----------------------------------------------------------------

def laplacian_edges(f: Frame) -> np.ndarray:
    """|4-neighbour Laplacian| of luma with replicated borders, clipped to 0..255."""
    y = np.pad(f.y.astype(np.int64), 1, mode="edge")
    h, w = f.y.shape
    resp = (
        y[0:h, 1 : w + 1] + y[2 : h + 2, 1 : w + 1] + y[1 : h + 1, 0:w] + y[1 : h + 1, 2 : w + 2]
        - 4 * y[1 : h + 1, 1 : w + 1]
    )
    return np.clip(np.abs(resp), 0, 255).astype(np.uint8)


def edge_frame(f: Frame) -> Frame:
    """Edge map wrapped as a grey frame for PPM export."""
    e = laplacian_edges(f)
    u = np.full((f.height // 2, f.width // 2), 128, np.uint8)
    # map 0..255 onto studio range so the export shows black..white
    y = (16 + (e.astype(np.int64) * 219 + 127) // 255).astype(np.uint8)
    return Frame(y, u, u.copy(), f.index)


def _block_means(plane: np.ndarray, size: int) -> np.ndarray:
    h, w = plane.shape
    blocks = plane.astype(np.int64).reshape(h // size, size, w // size, size)
    total = blocks.sum(axis=(1, 3))
    area = size * size
    mean = (2 * total + area) // (2 * area)  # round half away from zero (values are non-negative)
    return np.repeat(np.repeat(mean, size, axis=0), size, axis=1).astype(np.uint8)


def pixelate(f: Frame, size: int = 8) -> Frame:
    """Replace each 8x8 luma block (4x4 chroma) by its rounded mean."""
    if f.width % size or f.height % size:
        raise ValueError(f"frame dimensions must be multiples of {size}")
    return Frame(_block_means(f.y, size), _block_means(f.u, size // 2), _block_means(f.v, size // 2), f.index)


# -- experiment ------------------------------------------------------------------

RESULT_COLUMNS = [
    "clip", "profile", "cipher", "qp", "stage", "frames", "size_bytes", "bitrate_bps",
    "psnr_y_keyless", "psnr_y_keyed", "ssim_keyless", "ssim_keyed", "entropy_keyless",
]
TIMING_COLUMNS = ["enc_time_ms", "transrate_time_ms"]
DELTA_COLUMNS = [
    "clip", "cipher", "qp", "bitrate_A", "bitrate_H", "delta_bitrate_pct",
    "psnr_y_A", "psnr_y_H", "delta_psnr_pct", "time_A_ms", "time_H_ms", "delta_time_pct",
]


@dataclass
class ExperimentConfig:
    """Settings for :func:`run_experiment`.

    ``key`` and ``nonce`` drive every encrypted run; they are never written
    to any report.
    """

    key: bytes
    nonce: bytes
    profiles: tuple[str, ...] = ("A", "H")
    ciphers: tuple[CipherKind, ...] = (CipherKind.AES128_CFB,)
    base_qp: int = 12
    targets: tuple[int, ...] = (24, 36, 48)
    gop: int = 16
    mode: str = "closed"
    export_frame: int | None = None  # frame index for image exports, default middle frame


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.4f}"
    return str(x)


def _load_corpus(corpus) -> list[tuple[str, VideoSequence]]:
    if isinstance(corpus, (str, Path)):
        paths = sorted(Path(corpus).glob("*.y4m"))
        if not paths:
            raise FileNotFoundError(f"no .y4m clips in {corpus}")
        out = []
        for p in paths:
            with open(p, "rb") as fh:
                out.append((p.stem, read_y4m(fh)))
        return out
    if isinstance(corpus, dict):
        return list(corpus.items())
    return [(f"clip{i:02d}", v) for i, v in enumerate(corpus)]


def _export(report: Path, name: str, video: VideoSequence, idx: int) -> None:
    f = video[idx]
    for suffix, frame in (("", f), ("_edges", edge_frame(f)), ("_pixelated", pixelate(f))):
        with open(report / f"{name}{suffix}.ppm", "wb") as fh:
            write_ppm(frame, fh)


def _write_hist(path: Path, hist: HistogramReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", *CHANNELS])
        for v in range(256):
            w.writerow([v, *(int(hist.counts[c][v]) for c in CHANNELS)])


def _run_clip(name: str, video: VideoSequence, config: ExperimentConfig, report: Path) -> list[dict]:
    rows = []
    idx = config.export_frame if config.export_frame is not None else len(video) // 2
    if len(video):
        _export(report, f"{name}_original", video, idx)
        _write_hist(report / f"{name}_original_hist.csv", histogram(video.frames))
    for prof in config.profiles:
        profile = Profile.parse(prof)
        for kind in config.ciphers:
            spec = CipherSpec(kind, config.key, config.nonce)
            cfg = EncoderConfig(profile=profile, qp=config.base_qp, gop=config.gop, cipher=spec)
            t0 = time.perf_counter()
            base = encode_sequence(video, cfg)
            enc_ms = (time.perf_counter() - t0) * 1e3
            t0 = time.perf_counter()
            outs = transrate_many(base, config.targets, config.mode)
            tr_ms = (time.perf_counter() - t0) * 1e3
            streams = [(config.base_qp, "encode", base)] + [(q, "transrate", o) for q, o in zip(config.targets, outs)]
            for qp, stage, bs in streams:
                keyless = decode_sequence(bs)
                keyed = decode_sequence(bs, config.key)
                size = len(bs.to_bytes())
                hist = histogram(keyless.frames)
                tag = f"{name}_{profile.name}_{kind.name.lower()}_qp{qp}"
                if len(video):
                    _export(report, f"{tag}_keyless", keyless, idx)
                _write_hist(report / f"{tag}_keyless_hist.csv", hist)
                rows.append(
                    dict(
                        clip=name, profile=profile.name, cipher=kind.name, qp=qp, stage=stage,
                        frames=len(video), size_bytes=size,
                        bitrate_bps=bitrate(size, len(video), video.fps_num, video.fps_den),
                        psnr_y_keyless=sequence_psnr(video, keyless),
                        psnr_y_keyed=sequence_psnr(video, keyed),
                        ssim_keyless=mean_ssim(video, keyless),
                        ssim_keyed=mean_ssim(video, keyed),
                        entropy_keyless=hist.mean_entropy,
                        enc_time_ms=enc_ms if stage == "encode" else 0.0,
                        transrate_time_ms=tr_ms / len(config.targets) if stage == "transrate" else 0.0,
                    )
                )
    return rows


def run_experiment(corpus, config: ExperimentConfig, report_dir, jobs: int = 1) -> dict:
    """Crypto-encode, keylessly transrate, and measure every clip/profile/cipher.

    Writes ``results.csv`` (one row per clip, profile, cipher and qp),
    ``deltas.csv`` (profile A vs H via the relative-difference formulas),
    ``summary.json``, per-stream histogram CSVs, and PPM exports of one frame
    (original, keyless decode, edge map, pixelated). Returns the summary dict.
    Clips run in ``jobs`` worker processes; timing columns are only meaningful
    with ``jobs=1``.
    """
    report = Path(report_dir)
    report.mkdir(parents=True, exist_ok=True)
    clips = _load_corpus(corpus)
    if jobs > 1 and len(clips) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_clip, name, video, config, report) for name, video in clips]
            per_clip = [f.result() for f in futures]
    else:
        per_clip = [_run_clip(name, video, config, report) for name, video in clips]
    rows = [r for clip_rows in per_clip for r in clip_rows]
    with open(report / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS + TIMING_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in RESULT_COLUMNS + TIMING_COLUMNS])

    deltas = []
    if {"A", "H"} <= {Profile.parse(p).name for p in config.profiles}:
        keyed_rows = {(r["clip"], r["profile"], r["cipher"], r["qp"]): r for r in rows}
        for (clip, prof, cipher, qp), ra in keyed_rows.items():
            if prof != "A":
                continue
            rh = keyed_rows[(clip, "H", cipher, qp)]
            ta = ra["enc_time_ms"] + ra["transrate_time_ms"]
            th = rh["enc_time_ms"] + rh["transrate_time_ms"]
            deltas.append(
                dict(
                    clip=clip, cipher=cipher, qp=qp,
                    bitrate_A=ra["bitrate_bps"], bitrate_H=rh["bitrate_bps"],
                    delta_bitrate_pct=delta_bitrate(ra["bitrate_bps"], rh["bitrate_bps"]),
                    psnr_y_A=ra["psnr_y_keyless"], psnr_y_H=rh["psnr_y_keyless"],
                    delta_psnr_pct=delta_psnr(ra["psnr_y_keyless"], rh["psnr_y_keyless"]),
                    time_A_ms=ta, time_H_ms=th,
                    delta_time_pct=delta_time(ta, th) if ta > 0 else math.nan,
                )
            )
        with open(report / "deltas.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DELTA_COLUMNS)
            for d in deltas:
                w.writerow([_fmt(d[c]) for c in DELTA_COLUMNS])

    summary = {
        "corpus": [name for name, _ in clips],
        "config": {
            "profiles": [Profile.parse(p).name for p in config.profiles],
            "ciphers": [k.name for k in config.ciphers],
            "base_qp": config.base_qp,
            "targets": list(config.targets),
            "gop": config.gop,
            "mode": config.mode,
            "ssim_window": f"{SSIM_WINDOW}x{SSIM_WINDOW} uniform, stride 1",
            "psnr_pooling": "pooled MSE over frames",
            "psnr_reference": "original input clip",
        },
        "streams": [{k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in r.items()} for r in rows],
        "deltas": [{k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()} for d in deltas],
    }
    with open(report / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary
