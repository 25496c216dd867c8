"""Format-compliant selective encryption of a block-transform video codec, with keyless transrating."""

from .cipher import CipherKind, CipherSpec
from .codec import CodedBitstream, EncoderConfig, Profile, decode_sequence, encode_sequence, extract_mv_sidecar
from .frame_io import Frame, VideoSequence, read_y4m, write_y4m
from .transrater import cascade_reference, transrate, transrate_closed, transrate_many, transrate_open

__version__ = "0.1.0"

__all__ = [
    "CipherKind",
    "CipherSpec",
    "CodedBitstream",
    "EncoderConfig",
    "Profile",
    "decode_sequence",
    "encode_sequence",
    "extract_mv_sidecar",
    "Frame",
    "VideoSequence",
    "read_y4m",
    "write_y4m",
    "cascade_reference",
    "transrate",
    "transrate_closed",
    "transrate_many",
    "transrate_open",
]
