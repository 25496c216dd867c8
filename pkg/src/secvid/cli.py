"""``secvid`` command line.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 key/crypto error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .cipher import CipherKind, CipherSpec, KeyError_, format_key_file, generate_key_material, load_key_file
from .codec import BitstreamError, CodedBitstream, EncoderConfig, decode_sequence, encode_sequence, extract_mv_sidecar
from .corpus import synthetic_corpus
from .evalkit import ExperimentConfig, edge_frame, histogram, pixelate, quality_report, run_experiment
from .frame_io import VideoSequence, Y4MError, read_y4m, write_ppm, write_y4m
from .transrater import TransrateError, cascade_reference, transrate_many

KEY_ENV = "CVB_KEY_FILE"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_KEY = 0, 1, 2, 3

log = logging.getLogger("secvid")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _targets(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad target list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="secvid", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help, *flags):
        sp = sub.add_parser(name, help=help)
        for f in flags:
            f(sp)
        return sp

    def io(sp):
        sp.add_argument("--in", dest="inp", required=True)
        sp.add_argument("--out", required=True)

    def key(sp):
        sp.add_argument("--key-file", help=f"56 hex chars (key||nonce); default ${KEY_ENV}")

    def frame(sp):
        sp.add_argument("--frame", type=int, default=0)

    enc = add("encode", "crypto-encode a .y4m clip", io, key)
    enc.add_argument("--qp", type=int, default=12)
    enc.add_argument("--gop", type=int, default=16)
    enc.add_argument("--profile", choices=["A", "H"], default="A")
    enc.add_argument("--cipher", choices=["null", "aes-cfb", "xor-fixed", "xor-prng"], default="null")

    add("decode", "decode a .cvb stream (keyless unless a key is supplied)", io, key)

    tr = add("transrate", "keyless requantization to one or more higher QPs", io)
    tr.add_argument("--targets", type=_targets, required=True)
    tr.add_argument("--mode", choices=["open", "closed", "cascade"], default="closed")
    tr.add_argument("--mv-out", help="also write an MVS1 sidecar of the input's vectors")
    # accepted only so it can be refused with a clear message
    tr.add_argument("--key-file", help=argparse.SUPPRESS)

    add("extract-mv", "write the MVS1 motion-vector sidecar of a stream (no key)", io)

    m = add("metrics", "PSNR/SSIM of a clip against a reference clip")
    m.add_argument("--ref", required=True)
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--out")
    m.add_argument("--cvb", help="stream whose size gives the bitrate")

    add("histogram", "R/G/B/Y histograms and entropy of a clip, as CSV", io)
    add("edges", "Laplacian edge map of one frame, as PPM", io, frame)
    add("pixelate", "8x8 pixelation of one frame, as PPM", io, frame)

    ex = add("experiment", "run the multi-QP crypto-transrating evaluation")
    ex.add_argument("--corpus", help="directory of .y4m clips; synthesized when omitted")
    ex.add_argument("--report", required=True)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--clips", type=int, default=10)
    ex.add_argument("--frames", type=int, default=12)
    ex.add_argument("--qp", type=int, default=12)
    ex.add_argument("--targets", type=_targets, default=[24, 36, 48])
    ex.add_argument("--gop", type=int, default=16)
    ex.add_argument("--mode", choices=["open", "closed"], default="closed")
    ex.add_argument("--cipher", action="append", choices=["aes-cfb", "xor-fixed", "xor-prng"])
    ex.add_argument("--jobs", type=int, default=1)
    key(ex)

    kg = add("keygen", "write fresh key material (16-byte key || 12-byte nonce) as hex")
    kg.add_argument("--out", required=True)
    return p


def _key_path(args, env) -> str | None:
    return getattr(args, "key_file", None) or env.get(KEY_ENV)


def _load_key(args, env, required: bool) -> tuple[bytes, bytes] | None:
    path = _key_path(args, env)
    if path is None:
        if required:
            raise KeyError_(f"this operation needs --key-file or ${KEY_ENV}")
        return None
    try:
        return load_key_file(Path(path).read_text())
    except OSError as exc:
        raise KeyError_(f"cannot read key file: {exc}") from exc


def _read_video(path) -> VideoSequence:
    with open(path, "rb") as fh:
        return read_y4m(fh)


def _read_stream(path) -> CodedBitstream:
    with open(path, "rb") as fh:
        return CodedBitstream.read(fh)


def _cmd_encode(args, env):
    video = _read_video(args.inp)
    kind = CipherKind.from_name(args.cipher)
    km = _load_key(args, env, required=kind != CipherKind.NULL)
    spec = CipherSpec(kind, *km) if km else CipherSpec()
    bs = encode_sequence(video, EncoderConfig(profile=args.profile, qp=args.qp, gop=args.gop, cipher=spec))
    Path(args.out).write_bytes(bs.to_bytes())
    log.info("wrote %s (%d bytes, %d frames)", args.out, len(bs), len(bs.frames))


def _cmd_decode(args, env):
    bs = _read_stream(args.inp)
    km = _load_key(args, env, required=False)
    video = decode_sequence(bs, km[0] if km else None)
    with open(args.out, "wb") as fh:
        write_y4m(video, fh)


def _output_paths(out: str, targets: list[int]) -> list[Path]:
    if len(targets) == 1:
        return [Path(out)]
    p = Path(out)
    return [p.with_name(f"{p.stem}_qp{q}{p.suffix or '.cvb'}") for q in targets]


def _cmd_transrate(args, env):
    if args.key_file or env.get(KEY_ENV):
        raise UsageError("transrate accepts no key")
    bs = _read_stream(args.inp)
    if args.mode == "cascade":
        if bs.header.cipher_kind != CipherKind.NULL:
            raise KeyError_("cascade transcoding needs decryption; it is not offered for encrypted streams here")
        outs = [cascade_reference(bs, q, None) for q in args.targets]
    else:
        outs = transrate_many(bs, args.targets, args.mode)
    for path, out in zip(_output_paths(args.out, args.targets), outs):
        path.write_bytes(out.to_bytes())
    if args.mv_out:
        Path(args.mv_out).write_bytes(extract_mv_sidecar(bs).to_bytes())


def _cmd_extract_mv(args, env):
    Path(args.out).write_bytes(extract_mv_sidecar(_read_stream(args.inp)).to_bytes())


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else None
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    return x


def _cmd_metrics(args, env):
    ref, test = _read_video(args.ref), _read_video(args.inp)
    size = Path(args.cvb).stat().st_size if args.cvb else None
    rep = quality_report(ref, test, size)
    text = json.dumps({k: _json_safe(v) for k, v in vars(rep).items()}, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _cmd_histogram(args, env):
    hist = histogram(_read_video(args.inp).frames)
    with open(args.out, "w") as fh:
        fh.write("value,r,g,b,y\n")
        for v in range(256):
            fh.write(f"{v},{hist.counts['r'][v]},{hist.counts['g'][v]},{hist.counts['b'][v]},{hist.counts['y'][v]}\n")
        fh.write("entropy," + ",".join(f"{hist.entropy_bits[c]:.6f}" for c in "rgby") + "\n")


def _one_frame(args):
    video = _read_video(args.inp)
    if not 0 <= args.frame < len(video):
        raise UsageError(f"frame {args.frame} out of range (clip has {len(video)})")
    return video[args.frame]


def _cmd_edges(args, env):
    with open(args.out, "wb") as fh:
        write_ppm(edge_frame(_one_frame(args)), fh)


def _cmd_pixelate(args, env):
    with open(args.out, "wb") as fh:
        write_ppm(pixelate(_one_frame(args)), fh)


def _cmd_experiment(args, env):
    km = _load_key(args, env, required=False)
    if km is None:
        raw = generate_key_material()
        km = (raw[:16], raw[16:])
    kinds = tuple(CipherKind.from_name(c) for c in (args.cipher or ["aes-cfb"]))
    cfg = ExperimentConfig(key=km[0], nonce=km[1], ciphers=kinds, base_qp=args.qp,
                           targets=tuple(args.targets), gop=args.gop, mode=args.mode)
    corpus = args.corpus or synthetic_corpus(args.clips, seed=args.seed, frames=args.frames)
    run_experiment(corpus, cfg, args.report, jobs=args.jobs)


def _cmd_keygen(args, env):
    path = Path(args.out)
    path.write_text(format_key_file(generate_key_material()))
    path.chmod(0o600)


COMMANDS = {
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "transrate": _cmd_transrate,
    "extract-mv": _cmd_extract_mv,
    "metrics": _cmd_metrics,
    "histogram": _cmd_histogram,
    "edges": _cmd_edges,
    "pixelate": _cmd_pixelate,
    "experiment": _cmd_experiment,
    "keygen": _cmd_keygen,
}


def main(argv=None, env=None) -> int:
    env = os.environ if env is None else env
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args, env)
    except UsageError as exc:
        print(f"secvid {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError_ as exc:
        print(f"secvid {args.command}: key error: {exc}", file=sys.stderr)
        return EXIT_KEY
    except (Y4MError, BitstreamError, TransrateError, ValueError, OSError) as exc:
        print(f"secvid {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
