"""
Encrypting signs inside the bitstream
=====================================

A clip is encoded once with AES sign encryption. The stream decodes with or
without the key; without it the picture is scrambled but the decoder never
notices anything wrong. Frames are written as PPM files for a look.

Run:  python demos/01_encrypt_and_view.py [output-dir]
"""

import sys
from pathlib import Path

from secvid.cipher import CipherKind, CipherSpec, generate_key_material
from secvid.codec import EncoderConfig, decode_sequence, encode_sequence
from secvid.corpus import synthetic_clip
from secvid.evalkit import edge_frame, pixelate, sequence_psnr
from secvid.frame_io import write_ppm

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/01")
out.mkdir(parents=True, exist_ok=True)

# a 128x96 synthetic clip: panning texture with a few moving boxes
clip = synthetic_clip(seed=3, width=128, height=96, frames=16)

raw = generate_key_material()
key, nonce = raw[:16], raw[16:]
aes = CipherSpec(CipherKind.AES128_CFB, key, nonce)

plain = encode_sequence(clip, EncoderConfig(profile="A", qp=12))
secret = encode_sequence(clip, EncoderConfig(profile="A", qp=12, cipher=aes))

# sign bins are bypass coded, so flipping them never changes the byte count
print(f"plain stream     {len(plain.to_bytes()):7d} bytes")
print(f"encrypted stream {len(secret.to_bytes()):7d} bytes")

keyed = decode_sequence(secret, key)
keyless = decode_sequence(secret)
print(f"PSNR_Y with key    {sequence_psnr(clip, keyed):6.2f} dB")
print(f"PSNR_Y without key {sequence_psnr(clip, keyless):6.2f} dB")
print("keyed decode equals plain decode:", keyed == decode_sequence(plain))

mid = len(clip) // 2
for name, frame in (
    ("original", clip[mid]),
    ("keyed", keyed[mid]),
    ("keyless", keyless[mid]),
    ("keyless_edges", edge_frame(keyless[mid])),
    ("keyless_pixelated", pixelate(keyless[mid])),
):
    with open(out / f"{name}.ppm", "wb") as fh:
        write_ppm(frame, fh)
print("frames written to", out)
