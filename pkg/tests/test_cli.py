import subprocess
import sys

import numpy as np
import pytest

from randquant.cli import main
from randquant.modality_io import WavClip, decode_csv, decode_pnm, decode_xyz, encode_pnm, encode_wav, encode_xyz
from randquant.tensor import ChannelTensor, from_grid

TINY_CONFIG = """
# small enough for unit tests
n_classes = 3
samples_per_class = 8
seq_len = 16
channels = 3
segments = 4
epochs = 2
batch_size = 8
hidden = 8
embed_dim = 4
seeds = 0 1
sweep_bins = 1 4
n_samples = 20000
distortion_bins = 1 4
"""


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(0)
    (tmp_path / "img.ppm").write_bytes(encode_pnm(from_grid(rng.random((12, 10, 3)))))
    (tmp_path / "tone.wav").write_bytes(encode_wav(WavClip(16000, 0.5 * np.sin(np.arange(4000) * 0.17))))
    (tmp_path / "cloud.xyz").write_bytes(encode_xyz(ChannelTensor(rng.normal(size=(50, 3)))))
    (tmp_path / "tiny.cfg").write_text(TINY_CONFIG)
    return tmp_path


def _dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_augment_writes_named_views(files):
    out = files / "out"
    assert main(["augment", "--input", str(files / "img.ppm"), "--format", "ppm", "--out", str(out), "--views", "3"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["img.view0.ppm", "img.view1.ppm", "img.view2.ppm"]
    view = decode_pnm((out / "img.view0.ppm").read_bytes())
    assert view.grid_shape == (12, 10)
    # default image bin count is 8; pixel values are snapped to 8-bit codes
    for c in range(3):
        assert len(np.unique(view.data[:, c])) <= 8


def test_augment_rrc_changes_shape(files):
    out = files / "out"
    args = ["augment", "--input", str(files / "img.ppm"), "--format", "ppm", "--out", str(out), "--rrc", "6x5"]
    assert main(args + ["--scale", "0.3,0.9"]) == 0
    assert decode_pnm((out / "img.view1.ppm").read_bytes()).grid_shape == (6, 5)


def test_augment_pointcloud_axis_cardinality(files):
    out = files / "out"
    assert main(["augment", "--input", str(files / "cloud.xyz"), "--format", "xyz", "--out", str(out), "--bins", "5"]) == 0
    t = decode_xyz((out / "cloud.view0.xyz").read_bytes())
    assert all(len(np.unique(t.data[:, c])) <= 5 for c in range(3))


def test_augment_spectrogram_writes_csv(files):
    out = files / "out"
    assert main(["augment", "--input", str(files / "tone.wav"), "--format", "wav", "--out", str(out), "--spectrogram"]) == 0
    t, header = decode_csv((out / "tone.view0.csv").read_bytes())
    assert t.channels == 64 and header is None


def test_augment_is_deterministic_across_threads(files):
    for fmt, name in (("ppm", "img.ppm"), ("wav", "tone.wav"), ("xyz", "cloud.xyz")):
        base = ["augment", "--input", str(files / name), "--format", fmt, "--seed", "42", "--views", "4"]
        main(base + ["--out", str(files / f"a_{fmt}"), "--threads", "1"])
        main(base + ["--out", str(files / f"b_{fmt}"), "--threads", "4"])
        assert _dir_bytes(files / f"a_{fmt}") == _dir_bytes(files / f"b_{fmt}")


def test_augment_mode_none_is_identity(files):
    out = files / "out"
    assert main(["augment", "--input", str(files / "img.ppm"), "--format", "ppm", "--out", str(out), "--mode", "none"]) == 0
    assert (out / "img.view0.ppm").read_bytes() == (files / "img.ppm").read_bytes()


@pytest.mark.parametrize(
    "extra",
    [["--bins", "0"], ["--bins", "x"], ["--mode", "weird"], ["--rrc", "axb"], ["--scale", "1"], ["--spectrogram"]],
)
def test_usage_errors_exit_2(files, extra, capsys):
    argv = ["augment", "--input", str(files / "img.ppm"), "--format", "ppm", "--out", str(files / "o")] + extra
    assert main(argv) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: usage: ")


def test_rrc_on_gridless_input_is_usage_error(files, capsys):
    argv = ["augment", "--input", str(files / "cloud.xyz"), "--format", "xyz", "--out", str(files / "o"), "--rrc", "2x2"]
    assert main(argv) == 2


def test_codec_error_exit_1(files, capsys):
    bad = files / "bad.pgm"
    bad.write_bytes(b"P5\n2 2\n255\n\x00")
    assert main(["augment", "--input", str(bad), "--format", "pgm", "--out", str(files / "o")]) == 1
    assert capsys.readouterr().err.startswith("error: codec: ")


def test_missing_input_exit_1(files, capsys):
    assert main(["augment", "--input", str(files / "nope.ppm"), "--format", "ppm", "--out", str(files / "o")]) == 1
    assert capsys.readouterr().err.startswith("error: io: ")


def test_missing_config_exit_2(files, capsys):
    assert main(["train-toy", "--config", str(files / "none.cfg"), "--out", str(files / "o")]) == 2
    assert capsys.readouterr().err.startswith("error: config: ")


def test_unknown_config_key_exit_2(files):
    cfg = files / "bad.cfg"
    cfg.write_text("n_classes = 3\nbogus = 1\n")
    assert main(["analyze", "mode-matrix", "--config", str(cfg), "--out", str(files / "o")]) == 2


def test_train_toy_and_probe(files):
    out = files / "run"
    cfg = str(files / "tiny.cfg")
    assert main(["train-toy", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
    loss = (out / "loss.csv").read_text().splitlines()
    assert loss[0] == "epoch,loss" and len(loss) == 4
    probe = (out / "probe.csv").read_text().splitlines()
    assert probe[0] == "stage,train_accuracy,test_accuracy"
    assert [line.split(",")[0] for line in probe[1:]] == ["init", "final"]
    again = files / "run2"
    main(["train-toy", "--config", cfg, "--out", str(again), "--seed", "3"])
    assert _dir_bytes(out) == _dir_bytes(again)
    p = files / "p"
    assert main(["probe", "--config", cfg, "--params", str(out / "params.npz"), "--out", str(p), "--seed", "3"]) == 0
    final = probe[2].split(",", 1)[1]
    assert (p / "probe.csv").read_text().splitlines()[1] == "probe," + final


def test_train_toy_zero_epochs(files):
    out = files / "z"
    assert main(["train-toy", "--config", str(files / "tiny.cfg"), "--out", str(out), "--epochs", "0"]) == 0
    assert len((out / "probe.csv").read_text().splitlines()) == 2


@pytest.mark.parametrize("which,name", [("distortion", "distortion"), ("bins-sweep", "bins_sweep"), ("mode-matrix", "mode_matrix")])
def test_analyze_outputs_and_thread_invariance(files, which, name):
    cfg = str(files / "tiny.cfg")
    a, b = files / "a", files / "b"
    assert main(["analyze", which, "--config", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert main(["analyze", which, "--config", cfg, "--out", str(b), "--threads", "3"]) == 0
    assert (a / f"{name}.csv").exists()
    assert _dir_bytes(a) == _dir_bytes(b)


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "randquant", "augment", "--bins", "0"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("error: usage: ")
