"""
Transrating without the key
===========================

A middlebox receives the encrypted stream and must cut its bitrate. It has no
key and needs none: requantization is an odd function, so a sign it cannot
read is carried through unchanged. The receiver, who holds the key, decodes
what the middlebox produced.

Run:  python demos/02_keyless_transrating.py
"""

from secvid.cipher import CipherKind, CipherSpec, generate_key_material
from secvid.codec import EncoderConfig, decode_sequence, encode_sequence, extract_mv_sidecar
from secvid.corpus import synthetic_clip
from secvid.evalkit import sequence_psnr
from secvid.transrater import DriftStats, cascade_reference, transrate_closed, transrate_many, transrate_open

clip = synthetic_clip(seed=11, width=96, height=96, frames=16)
raw = generate_key_material()
key = raw[:16]
cfg = EncoderConfig(profile="H", qp=12, cipher=CipherSpec(CipherKind.AES128_CFB, key, raw[16:]))
source = encode_sequence(clip, cfg)
plain = encode_sequence(clip, EncoderConfig(profile="H", qp=12))

# what the middlebox can see: structure and motion, but not the signs
sidecar = extract_mv_sidecar(source)
print(f"{len(sidecar)} inter macroblocks, vectors recovered without a key")

targets = [24, 36, 48]
outputs = transrate_many(source, targets, mode="open")
print("\n qp   bytes   PSNR_Y keyed   keyless   same as plain pipeline")
for q2, out in zip(targets, outputs):
    keyed = decode_sequence(out, key)
    reference = decode_sequence(transrate_open(plain, q2))
    print(
        f"{q2:3d} {len(out.to_bytes()):7d} {sequence_psnr(clip, keyed):12.2f}"
        f" {sequence_psnr(clip, decode_sequence(out)):9.2f}   {keyed == reference}"
    )

# open loop lets requantization error pile up across P frames; closed loop
# feeds it back. Compare both against a full decode and re-encode.
print("\n qp   open vs cascade   closed vs cascade   drift peak")
for q2 in targets:
    cascade = decode_sequence(cascade_reference(plain, q2, None))
    stats = DriftStats()
    closed = decode_sequence(transrate_closed(plain, q2, stats))
    opened = decode_sequence(transrate_open(plain, q2))
    print(f"{q2:3d} {sequence_psnr(cascade, opened):15.2f} {sequence_psnr(cascade, closed):19.2f} {stats.peak:12d}")
