import csv
import json
import subprocess
import sys

import pytest

from secvid.cipher import load_key_file
from secvid.cli import main
from secvid.codec import CodedBitstream
from secvid.corpus import synthetic_clip, synthetic_corpus
from secvid.frame_io import write_y4m
from secvid.motion import MvSidecar


@pytest.fixture
def work(tmp_path):
    with open(tmp_path / "a.y4m", "wb") as fh:
        write_y4m(synthetic_clip(4, width=32, height=32, frames=4), fh)
    assert main(["keygen", "--out", str(tmp_path / "k.hex")], env={}) == 0
    return tmp_path


def run(work, *args, env=None):
    return main([str(a) for a in args], env=env or {})


def test_keygen(work):
    text = (work / "k.hex").read_text().strip()
    assert len(text) == 56 and int(text, 16) >= 0


def test_step_by_step_pipeline(work):
    w = work
    assert run(w, "encode", "--in", w / "a.y4m", "--out", w / "a.cvb", "--qp", 12, "--cipher", "aes-cfb",
               "--profile", "H", "--key-file", w / "k.hex") == 0
    assert run(w, "decode", "--in", w / "a.cvb", "--out", w / "b.y4m") == 0
    assert run(w, "extract-mv", "--in", w / "a.cvb", "--out", w / "a.mvs") == 0
    assert len(MvSidecar.from_bytes((w / "a.mvs").read_bytes())) == 3 * 4
    assert run(w, "transrate", "--in", w / "a.cvb", "--out", w / "t.cvb", "--targets", "24,36,48", "--mode", "open") == 0
    for q in (24, 36, 48):
        assert CodedBitstream.from_bytes((w / f"t_qp{q}.cvb").read_bytes()).header.qp == q
    assert run(w, "decode", "--in", w / "t_qp36.cvb", "--out", w / "c.y4m", env={"CVB_KEY_FILE": str(w / "k.hex")}) == 0
    assert run(w, "metrics", "--ref", w / "a.y4m", "--in", w / "c.y4m", "--cvb", w / "t_qp36.cvb", "--out", w / "m.json") == 0
    keyed = json.loads((w / "m.json").read_text())["seq_psnr_y"]
    assert run(w, "metrics", "--ref", w / "a.y4m", "--in", w / "b.y4m", "--out", w / "n.json") == 0
    keyless = json.loads((w / "n.json").read_text())["seq_psnr_y"]
    assert keyless < 20 < keyed


def test_transrate_refuses_keys(work, capsys):
    w = work
    run(w, "encode", "--in", w / "a.y4m", "--out", w / "a.cvb")
    args = ["transrate", "--in", w / "a.cvb", "--out", w / "t.cvb", "--targets", "24,36,48", "--mode", "open"]
    assert run(w, *args, "--key-file", w / "k.hex") == 1
    assert "transrate accepts no key" in capsys.readouterr().err
    assert run(w, *args, env={"CVB_KEY_FILE": str(w / "k.hex")}) == 1
    assert not list(w.glob("t*.cvb"))


def test_transrate_single_target_and_cascade(work):
    w = work
    run(w, "encode", "--in", w / "a.y4m", "--out", w / "p.cvb")
    assert run(w, "transrate", "--in", w / "p.cvb", "--out", w / "one.cvb", "--targets", "30") == 0
    assert (w / "one.cvb").exists()
    assert run(w, "transrate", "--in", w / "p.cvb", "--out", w / "cas.cvb", "--targets", "30", "--mode", "cascade") == 0
    run(w, "encode", "--in", w / "a.y4m", "--out", w / "e.cvb", "--cipher", "xor-prng", "--key-file", w / "k.hex")
    assert run(w, "transrate", "--in", w / "e.cvb", "--out", w / "x.cvb", "--targets", "30", "--mode", "cascade") == 3


def test_exit_codes(work):
    w = work
    assert run(w, "frobnicate") == 1
    assert run(w, "encode", "--in", w / "a.y4m") == 1
    assert run(w, "encode", "--in", w / "a.y4m", "--out", w / "x.cvb", "--cipher", "aes-cfb") == 3
    (w / "bad.hex").write_text("abc")
    assert run(w, "encode", "--in", w / "a.y4m", "--out", w / "x.cvb", "--cipher", "aes-cfb", "--key-file", w / "bad.hex") == 3
    assert run(w, "decode", "--in", w / "a.y4m", "--out", w / "x.y4m") == 2
    assert run(w, "encode", "--in", w / "missing.y4m", "--out", w / "x.cvb") == 2
    run(w, "encode", "--in", w / "a.y4m", "--out", w / "p.cvb", "--qp", 30)
    assert run(w, "transrate", "--in", w / "p.cvb", "--out", w / "t.cvb", "--targets", "24") == 2
    assert run(w, "edges", "--in", w / "a.y4m", "--out", w / "e.ppm", "--frame", 9) == 1


def test_image_commands(work):
    w = work
    assert run(w, "edges", "--in", w / "a.y4m", "--out", w / "e.ppm", "--frame", 2) == 0
    assert run(w, "pixelate", "--in", w / "a.y4m", "--out", w / "p.ppm") == 0
    assert (w / "e.ppm").read_bytes().startswith(b"P6\n32 32\n255\n")
    assert run(w, "histogram", "--in", w / "a.y4m", "--out", w / "h.csv") == 0
    rows = list(csv.reader(open(w / "h.csv")))
    assert rows[0] == ["value", "r", "g", "b", "y"] and len(rows) == 258
    assert sum(int(r[4]) for r in rows[1:257]) == 4 * 32 * 32


def test_experiment_command_and_key_absence(work):
    w = work
    corpus = w / "corpus"
    corpus.mkdir()
    for i, clip in enumerate(synthetic_corpus(2, seed=3, frames=3, width=32, height=32)):
        with open(corpus / f"c{i}.y4m", "wb") as fh:
            write_y4m(clip, fh)
    assert run(w, "experiment", "--corpus", corpus, "--report", w / "out", "--key-file", w / "k.hex",
               "--cipher", "aes-cfb", "--cipher", "xor-fixed") == 0
    out = w / "out"
    assert (out / "results.csv").exists() and (out / "summary.json").exists() and list(out.glob("*.ppm"))
    key, nonce = load_key_file((w / "k.hex").read_text())
    for p in out.iterdir():
        data = p.read_bytes()
        assert key not in data and key.hex() not in data.decode("latin-1")


def test_no_output_contains_the_key(work):
    w = work
    key, _ = load_key_file((w / "k.hex").read_text())
    run(w, "encode", "--in", w / "a.y4m", "--out", w / "a.cvb", "--cipher", "xor-fixed", "--key-file", w / "k.hex")
    run(w, "decode", "--in", w / "a.cvb", "--out", w / "d.y4m", "--key-file", w / "k.hex")
    run(w, "transrate", "--in", w / "a.cvb", "--out", w / "t.cvb", "--targets", "24,36", "--mv-out", w / "t.mvs")
    for p in w.iterdir():
        if p.name != "k.hex":
            data = p.read_bytes()
            assert key not in data and key.hex().encode() not in data


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "secvid.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "transrate" in res.stdout
