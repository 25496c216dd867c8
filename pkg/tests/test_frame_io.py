import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secvid.frame_io import Frame, VideoSequence, Y4MError, frame_to_rgb, read_y4m, write_ppm, write_y4m


def _frame(rng, w, h, index=0):
    return Frame(
        rng.integers(0, 256, (h, w), dtype=np.uint8),
        rng.integers(0, 256, (h // 2, w // 2), dtype=np.uint8),
        rng.integers(0, 256, (h // 2, w // 2), dtype=np.uint8),
        index,
    )


def _y4m(seq):
    buf = io.BytesIO()
    write_y4m(seq, buf)
    return buf.getvalue()


def test_single_frame_record():
    data = b"YUV4MPEG2 W16 H16 F30:1\n" + b"FRAME\n" + bytes(range(256)) + bytes(128)
    seq = read_y4m(data)
    assert len(seq) == 1 and (seq.width, seq.height) == (16, 16)
    assert seq[0].y.shape == (16, 16) and seq[0].u.shape == (8, 8)
    assert seq[0].y[0, 5] == 5


def test_empty_body_is_valid():
    seq = read_y4m(b"YUV4MPEG2 W16 H16 F25:1\n")
    assert len(seq) == 0 and seq.fps_num == 25


def test_truncated_frame_raises():
    data = b"YUV4MPEG2 W16 H16 F30:1\nFRAME\n" + bytes(383)
    with pytest.raises(Y4MError):
        read_y4m(data)


@pytest.mark.parametrize("header", [b"YUV4MPEG2 W16 H16 F30:1 C444\n", b"NOTY4M W16 H16\n", b"YUV4MPEG2 W15 H16 F30:1\n"])
def test_bad_headers_rejected(header):
    with pytest.raises(Y4MError):
        read_y4m(header)


def test_round_trip(rng):
    seq = VideoSequence(16, 16, 30, 1, [_frame(rng, 16, 16, i) for i in range(2)])
    assert read_y4m(_y4m(seq)) == seq


def test_zero_frames_writes_header_only():
    data = _y4m(VideoSequence(32, 16, 30, 1, []))
    assert data.count(b"\n") == 1 and data.startswith(b"YUV4MPEG2 W32 H16")


def test_cif_payload_size():
    w, h, n = 352, 288, 3
    seq = VideoSequence(w, h, 30, 1, [Frame.blank(w, h, index=i) for i in range(n)])
    data = _y4m(seq)
    header = data.index(b"\n") + 1
    assert len(data) == header + n * (6 + 152064)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_round_trip_property(mw, mh, frames, seed):
    r = np.random.default_rng(seed)
    seq = VideoSequence(16 * mw, 16 * mh, 24, 1, [_frame(r, 16 * mw, 16 * mh, i) for i in range(frames)])
    assert read_y4m(_y4m(seq)) == seq


@pytest.mark.parametrize(
    "yuv, rgb", [((16, 128, 128), 0), ((235, 128, 128), 255), ((128, 128, 128), 130)]
)
def test_rgb_anchor_points(yuv, rgb):
    f = Frame.blank(2, 2, value=yuv)
    assert (frame_to_rgb(f) == rgb).all()


def test_rgb_matches_scalar_oracle(rng):
    import math

    def rnd(x):
        return max(0, min(255, int(math.copysign(math.floor(abs(x) + 0.5), x))))

    f = _frame(rng, 16, 16)
    out = frame_to_rgb(f)
    for r in range(16):
        for c in range(16):
            y, u, v = int(f.y[r, c]) - 16, int(f.u[r // 2, c // 2]) - 128, int(f.v[r // 2, c // 2]) - 128
            expect = (rnd(1.164 * y + 1.596 * v), rnd(1.164 * y - 0.813 * v - 0.391 * u), rnd(1.164 * y + 2.018 * u))
            assert tuple(out[r, c]) == expect


def test_ppm_black():
    buf = io.BytesIO()
    write_ppm(Frame.blank(2, 2), buf)
    assert buf.getvalue() == b"P6\n2 2\n255\n" + bytes(12)


def test_ppm_gray():
    buf = io.BytesIO()
    write_ppm(Frame.blank(4, 4, value=(128, 128, 128)), buf)
    assert set(buf.getvalue()[len(b"P6\n4 4\n255\n"):]) == {130}
