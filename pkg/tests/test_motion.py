import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secvid.frame_io import Frame
from secvid.motion import (
    MotionVector,
    MvRecord,
    MvSidecar,
    SidecarError,
    chroma_mv,
    compensate,
    compensate_frame,
    estimate,
    estimate_frame,
    mvds_from_mvs,
    mvs_from_mvds,
    predict_mv,
)


def textured(rng, w=64, h=48):
    return Frame(
        rng.integers(0, 256, (h, w), dtype=np.uint8),
        rng.integers(0, 256, (h // 2, w // 2), dtype=np.uint8),
        rng.integers(0, 256, (h // 2, w // 2), dtype=np.uint8),
    )


def brute_force(cur, ref, mb_x, mb_y, r=16):
    """Every in-bounds candidate, SAD then the documented tie order."""
    h, w = ref.y.shape
    x0, y0 = 16 * mb_x, 16 * mb_y
    blk = cur.y[y0 : y0 + 16, x0 : x0 + 16].astype(int)
    scored = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            x, y = x0 + dx, y0 + dy
            if 0 <= x <= w - 16 and 0 <= y <= h - 16:
                sad = int(np.abs(blk - ref.y[y : y + 16, x : x + 16].astype(int)).sum())
                scored.append((sad, abs(dx) + abs(dy), dy, dx))
    sad, _, dy, dx = min(scored)
    return (dx, dy), sad


def test_identical_frames(rng):
    f = textured(rng)
    assert estimate(f, f, 1, 1) == (MotionVector(0, 0), 0)


def test_shifted_reference(rng):
    cur = textured(rng)
    ref = Frame(np.roll(cur.y, 3, axis=1), cur.u, cur.v)
    mv, sad = estimate(cur, ref, 1, 1)
    assert mv == (3, 0) and sad == 0
    y, _, _ = compensate(ref, 1, 1, mv)
    assert np.array_equal(y, cur.y[16:32, 16:32])


def test_flat_frames_tie_to_origin():
    f = Frame.blank(64, 48, value=(90, 128, 128))
    assert estimate(f, f, 2, 1)[0] == (0, 0)


def test_matches_brute_force(rng):
    ref = textured(rng, 48, 48)
    cur = Frame((ref.y // 2 + rng.integers(0, 4, ref.y.shape)).astype(np.uint8), ref.u, ref.v)
    for mb_x in range(3):
        for mb_y in range(3):
            mv, sad = estimate(cur, ref, mb_x, mb_y)
            assert (tuple(mv), sad) == brute_force(cur, ref, mb_x, mb_y)


def test_tie_order_with_coarse_image():
    # blocky content makes many candidates tie
    r = np.random.default_rng(3)
    y = np.kron(r.integers(0, 3, (6, 8)), np.ones((8, 8), dtype=np.int64)).astype(np.uint8)
    ref = Frame(y, np.full((24, 32), 128, np.uint8), np.full((24, 32), 128, np.uint8))
    cur = Frame(np.roll(y, 8, axis=0), ref.u, ref.v)
    for mb_x in range(4):
        for mb_y in range(3):
            mv, sad = estimate(cur, ref, mb_x, mb_y)
            assert (tuple(mv), sad) == brute_force(cur, ref, mb_x, mb_y)


def test_estimate_frame_agrees(rng):
    ref = textured(rng)
    cur = Frame(np.roll(ref.y, (2, -5), axis=(0, 1)), ref.u, ref.v)
    mvs = estimate_frame(cur, ref)
    for m, (dx, dy) in enumerate(mvs):
        assert (dx, dy) == tuple(estimate(cur, ref, m % 4, m // 4)[0])


def test_chroma_rounding():
    assert chroma_mv((3, 1)) == (1, 0)
    assert chroma_mv((-3, -1)) == (-1, 0)
    assert chroma_mv((-4, 5)) == (-2, 2)


def test_compensate_bounds(rng):
    f = textured(rng)
    with pytest.raises(ValueError):
        compensate(f, 0, 0, (-1, 0))
    y, _, _ = compensate(f, 0, 0, (-40, 0), clamp=True)
    assert np.array_equal(y, f.y[0:16, 0:16])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(-60, 60), st.integers(-60, 60)), min_size=12, max_size=12))
def test_compensate_frame_matches_per_block(mvs):
    f = textured(np.random.default_rng(0))
    mvs = np.array(mvs)
    py, pu, pv = compensate_frame(f.planes, mvs, 4)
    for m, mv in enumerate(mvs):
        bx, by = m % 4, m // 4
        y, u, v = compensate(f, bx, by, tuple(int(c) for c in mv), clamp=True)
        assert np.array_equal(py[16 * by : 16 * by + 16, 16 * bx : 16 * bx + 16], y)
        assert np.array_equal(pu[8 * by : 8 * by + 8, 8 * bx : 8 * bx + 8], u)
        assert np.array_equal(pv[8 * by : 8 * by + 8, 8 * bx : 8 * bx + 8], v)


def test_median_predictor():
    assert predict_mv() == (0, 0)
    assert predict_mv((1, 1), (5, 2), (3, 9)) == (3, 2)
    assert predict_mv(left=(4, -2)) == (0, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_mvd_round_trip(mbw, mbh, seed):
    r = np.random.default_rng(seed)
    mvs = r.integers(-16, 17, (mbw * mbh, 2))
    mvd = mvds_from_mvs(mvs, mbw, mbh)
    assert np.array_equal(mvs_from_mvds(mvd, np.ones(mbw * mbh), mbw, mbh), mvs)
    # scalar predictor oracle
    grid = mvs.reshape(mbh, mbw, 2)
    for m in range(mbw * mbh):
        x, y = m % mbw, m // mbw
        left = tuple(grid[y, x - 1]) if x else None
        top = tuple(grid[y - 1, x]) if y else None
        tr = tuple(grid[y - 1, x + 1]) if y and x + 1 < mbw else None
        assert tuple(mvs[m] - mvd[m]) == predict_mv(left, top, tr)


def test_sidecar_round_trip():
    recs = [MvRecord(1, 2, 3, MotionVector(-4, 5)), MvRecord(7, 0, 0, MotionVector(16, -16))]
    data = MvSidecar(recs).to_bytes()
    assert data[:4] == b"MVS1" and len(data) == 8 + 2 * 13
    assert MvSidecar.from_bytes(data).records == recs
    assert MvSidecar([]).to_bytes() == b"MVS1" + bytes(4)
    with pytest.raises(SidecarError):
        MvSidecar.from_bytes(data[:-1])
    with pytest.raises(SidecarError):
        MvSidecar.from_bytes(b"XXXX" + data[4:])


def test_sidecar_saturates():
    data = MvSidecar([MvRecord(0, 0, 0, MotionVector(40000, -40000))]).to_bytes()
    assert MvSidecar.from_bytes(data).records[0].mv == (32767, -32768)
