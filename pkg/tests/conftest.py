import numpy as np
import pytest

from secvid.cipher import CipherKind, CipherSpec
from secvid.codec import EncoderConfig, encode_sequence
from secvid.corpus import synthetic_clip, synthetic_corpus

# first draw of default_rng(0); a balanced key, unlike bytes(range(16))
KEY = bytes.fromhex("5f82c2d9cfeb0fa321d7d982f8bd1045")
NONCE = bytes.fromhex("b8e8cd4ea93d7d0a1df04213")
ENCRYPTED = (CipherKind.AES128_CFB, CipherKind.XOR_PRNG, CipherKind.XOR_FIXED)


def spec(kind, key=KEY, nonce=NONCE):
    return CipherSpec(kind, key, nonce) if kind != CipherKind.NULL else CipherSpec()


def encode(video, kind=CipherKind.NULL, profile="A", qp=12, gop=16):
    return encode_sequence(video, EncoderConfig(profile=profile, qp=qp, gop=gop, cipher=spec(kind)))


@pytest.fixture(scope="session")
def small_clip():
    return synthetic_clip(7, width=48, height=32, frames=5)


@pytest.fixture(scope="session")
def corpus():
    """Ten 64x64 twelve-frame clips; the acceptance corpus."""
    return synthetic_corpus(10, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one criterion outcome for the end-of-run summary."""

    def _record(number, title, ok, detail=""):
        _ACCEPTANCE[number] = (title, bool(ok), detail)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
