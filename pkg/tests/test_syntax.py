import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secvid.entropy import BYPASS, EntropyError, binarize_level, binarize_mvd
from secvid.syntax import FrameSyntax, binarize_frame, blocks_per_mb, decode_frame, encode_frame, sign_slots, zigzag


def test_zigzag_4():
    assert zigzag(4).tolist() == [0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15]


@pytest.mark.parametrize("n", [4, 8])
def test_zigzag_is_permutation_by_antidiagonal(n):
    z = zigzag(n)
    assert sorted(z.tolist()) == list(range(n * n))
    diag = [r + c for r, c in (divmod(int(i), n) for i in z)]
    assert diag == sorted(diag)


def random_syntax(rng, nmb, n, p_inter=0.7, density=0.3, scale=20):
    nl, nc = blocks_per_mb(n)
    nblk = nl + 2 * nc
    mb_types = (rng.random(nmb) < p_inter).astype(np.int64)
    mvd = rng.integers(-40, 41, (nmb, 2)) * mb_types[:, None]
    coefs = np.where(rng.random((nmb, nblk, n * n)) < density, rng.integers(-scale, scale + 1, (nmb, nblk, n * n)), 0)
    coefs[rng.random((nmb, nblk)) < 0.3] = 0
    return FrameSyntax(mb_types, mvd, coefs, n)


def element_oracle(fs):
    """Bin trace assembled from the per-element binarizers."""
    out = []
    nl = fs.n_luma
    scan = zigzag(fs.n)
    for m in range(len(fs.mb_types)):
        out.append((int(fs.mb_types[m]), 0, False))
        if fs.mb_types[m]:
            for c in range(2):
                out += [(b.value, BYPASS if b.ctx is None else 1 + c, b.encryptable) for b in binarize_mvd(int(fs.mvd[m, c]))]
        for b in range(fs.coefs.shape[1]):
            ch = int(b >= nl)
            blk = fs.coefs[m, b]
            out.append((int(blk.any()), 3 + ch, False))
            if not blk.any():
                continue
            for k, pos in enumerate(scan):
                lv = int(blk[pos])
                cls = 0 if k == 0 else 1 if k <= 2 else 2 if k <= 6 else 3
                out.append((int(lv != 0), 5 + 4 * ch + cls, False))
                if lv:
                    out += [(x.value, BYPASS if x.ctx is None else 13 + ch, x.encryptable) for x in binarize_level(lv)]
    return out


@pytest.mark.parametrize("n", [4, 8])
def test_binarize_frame_matches_element_oracle(n, rng):
    fs = random_syntax(rng, 6, n)
    bins, ctxs, enc = binarize_frame(fs)
    assert list(zip(bins.tolist(), ctxs.tolist(), enc.astype(bool).tolist())) == element_oracle(fs)


def test_encryptable_bins_are_exactly_signs(rng):
    fs = random_syntax(rng, 8, 4)
    _, ctxs, enc = binarize_frame(fs)
    n_signs = np.count_nonzero(fs.coefs) + np.count_nonzero(fs.mvd)
    assert enc.sum() == n_signs
    assert (ctxs[enc.astype(bool)] == BYPASS).all()


@pytest.mark.parametrize("n", [4, 8])
def test_frame_round_trip(n, rng):
    for _ in range(5):
        fs = random_syntax(rng, 12, n)
        assert decode_frame(encode_frame(fs), 12, n) == fs


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.sampled_from([4, 8]), st.integers(0, 2**32 - 1), st.integers(1, 3000))
def test_frame_round_trip_property(nmb, n, seed, scale):
    fs = random_syntax(np.random.default_rng(seed), nmb, n, scale=scale)
    assert decode_frame(encode_frame(fs), nmb, n) == fs


def test_errors(rng):
    fs = random_syntax(rng, 10, 4)
    data = encode_frame(fs)
    with pytest.raises(EntropyError):
        decode_frame(data[:-3], 10, 4)
    with pytest.raises(EntropyError):
        decode_frame(data + b"\x00", 10, 4)


def test_sign_slots():
    assert sign_slots(3, 4) == 3 * (2 + 24 * 16)
    assert sign_slots(1, 8) == 2 + 6 * 64
