"""Keystreams for sign-bin encryption: AES-128 feedback mode, a fixed repeating XOR key, and SplitMix64.

A keystream is restarted for every frame from ``(key, nonce, frame_index)``
and is consumed one bit per *sign slot*, i.e. per coefficient position and per
MVD component, whether or not that slot carries a sign in a given stream.
Tying bits to slots rather than to the running count of present signs is
what keeps decryption aligned after a keyless requantizer zeroes coefficients.
"""

from __future__ import annotations

import enum
import secrets
import warnings
from dataclasses import dataclass, field

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

__all__ = [
    "CipherKind",
    "CipherSpec",
    "KeyError_",
    "aes_block",
    "splitmix64",
    "Keystream",
    "keystream",
    "encrypt_bins",
    "decrypt_bins",
    "load_key_file",
    "format_key_file",
    "generate_key_material",
]

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1


class KeyError_(ValueError):
    """Bad or missing key material."""


class CipherKind(enum.IntEnum):
    NULL = 0
    AES128_CFB = 1
    XOR_FIXED = 2
    XOR_PRNG = 3

    @classmethod
    def from_name(cls, name: str) -> "CipherKind":
        names = {"null": cls.NULL, "aes-cfb": cls.AES128_CFB, "xor-fixed": cls.XOR_FIXED, "xor-prng": cls.XOR_PRNG}
        try:
            return names[name.lower()]
        except KeyError:
            raise ValueError(f"unknown cipher {name!r}; expected one of {sorted(names)}") from None


@dataclass(frozen=True)
class CipherSpec:
    kind: CipherKind = CipherKind.NULL
    key: bytes = field(default=bytes(16), repr=False)
    nonce: bytes = bytes(12)

    def __post_init__(self):
        object.__setattr__(self, "kind", CipherKind(self.kind))
        if len(self.key) != 16:
            raise KeyError_(f"key must be 16 bytes, got {len(self.key)}")
        if len(self.nonce) != 12:
            raise KeyError_(f"nonce must be 12 bytes, got {len(self.nonce)}")
        if self.kind == CipherKind.XOR_FIXED and not any(self.key):
            warnings.warn("XOR_FIXED with an all-zero key leaves every sign in clear", stacklevel=3)

    @property
    def is_null(self) -> bool:
        return self.kind == CipherKind.NULL


def aes_block(key: bytes, block: bytes) -> bytes:
    """AES-128 forward cipher on one 16-byte block."""
    if len(key) != 16 or len(block) != 16:
        raise ValueError("AES-128 takes a 16-byte key and a 16-byte block")
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` SplitMix64 outputs for ``seed`` as uint64."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _M64) + idx * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class Keystream:
    """Per-frame keystream state. Bits come MSB-first from 128-bit (AES, fixed key) or 64-bit (PRNG) words."""

    def __init__(self, spec: CipherSpec, frame_index: int):
        self.spec = spec
        self.frame_index = frame_index
        self.blocks_used = 0  # AES evaluations so far
        self._bits = np.zeros(0, dtype=np.uint8)
        self._cursor = 0
        self._words = 0
        kind = spec.kind
        if kind == CipherKind.AES128_CFB:
            self._register = spec.nonce + (frame_index & 0xFFFFFFFF).to_bytes(4, "big")
            self._aes = Cipher(algorithms.AES(spec.key), modes.ECB()).encryptor()
        elif kind == CipherKind.XOR_PRNG:
            self._seed = (
                int.from_bytes(spec.key[:8], "little") ^ int.from_bytes(spec.nonce[:8], "little") ^ frame_index
            ) & _M64

    def _refill(self, need: int) -> None:
        kind = self.spec.kind
        if kind == CipherKind.NULL:
            fresh = np.zeros(need, dtype=np.uint8)
        elif kind == CipherKind.XOR_FIXED:
            key_bits = np.unpackbits(np.frombuffer(self.spec.key, dtype=np.uint8))
            fresh = np.tile(key_bits, -(-need // 128))
        elif kind == CipherKind.XOR_PRNG:
            nwords = -(-need // 64)
            words = splitmix64(self._seed, self._words + nwords)[self._words :]
            self._words += nwords
            fresh = np.unpackbits(words.astype(">u8").view(np.uint8))
        else:
            nblocks = -(-need // 128)
            out = bytearray()
            reg = self._register
            for _ in range(nblocks):
                # the register is fed back with the previous output block
                reg = self._aes.update(reg)
                out += reg
            self._register = reg
            self.blocks_used += nblocks
            fresh = np.unpackbits(np.frombuffer(bytes(out), dtype=np.uint8))
        self._bits = np.concatenate([self._bits[self._cursor :], fresh])
        self._cursor = 0

    def take(self, count: int) -> np.ndarray:
        if len(self._bits) - self._cursor < count:
            self._refill(count - (len(self._bits) - self._cursor))
        out = self._bits[self._cursor : self._cursor + count]
        self._cursor += count
        return out

    def next_bit(self) -> int:
        return int(self.take(1)[0])


def keystream(spec: CipherSpec, frame_index: int, count: int) -> np.ndarray:
    return Keystream(spec, frame_index).take(count)


def encrypt_bins(bins, spec: CipherSpec, frame_index: int) -> np.ndarray:
    """XOR an ordered bin sequence with the frame keystream. Self-inverse."""
    bins = np.asarray(bins, dtype=np.uint8)
    return bins ^ keystream(spec, frame_index, bins.size)


decrypt_bins = encrypt_bins


def generate_key_material() -> bytes:
    """16-byte key followed by a 12-byte nonce, from the OS entropy source."""
    return secrets.token_bytes(28)


def format_key_file(material: bytes) -> str:
    if len(material) != 28:
        raise KeyError_("key material is 16 key bytes + 12 nonce bytes")
    return material.hex() + "\n"


def load_key_file(text: str) -> tuple[bytes, bytes]:
    """Parse 56 hex characters into (key, nonce)."""
    s = text.strip()
    if len(s) != 56:
        raise KeyError_(f"key file must hold 56 hex characters, found {len(s)}")
    try:
        raw = bytes.fromhex(s)
    except ValueError as exc:
        raise KeyError_("key file is not hexadecimal") from exc
    return raw[:16], raw[16:]
