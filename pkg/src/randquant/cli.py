"""Command line entry point.

Exit codes: 0 success, 1 runtime/codec/io failure, 2 usage error. Failures
print one line to stderr: ``error: <code>: <message>``.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from randquant import analysis
from randquant.augment import DEFAULT_BINS, AugmentPipeline, RandomCrop, RandomizedQuantize, RandomResizedCrop
from randquant.config import ConfigError, experiment_from_config, int_list, load_config, parse_size
from randquant.dsp import log_mel_spectrogram
from randquant.modality_io import FORMATS, CodecError, WavClip, decode_any, encode_csv
from randquant.quantizer import ALL_MODES, QuantizerConfig, RandomMode
from randquant.rng import SeedPolicy
from randquant.toy_ssl import (
    EncoderParams,
    TrainingDiverged,
    evaluate_loss,
    generate_dataset,
    linear_probe,
    split_dataset,
    train,
)

EXT = {"ppm": "ppm", "pgm": "pgm", "wav": "wav", "xyz": "xyz", "csv": "csv"}
MODALITY = {"ppm": "image", "pgm": "image", "wav": "audio", "xyz": "pointcloud", "csv": "generic"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def seed_int(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def float_pair(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


def size_arg(text):
    try:
        return parse_size(text)
    except (ConfigError, ValueError):
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="randquant", description="Randomized channel-wise quantization toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("augment", help="write augmented views of one file")
    a.add_argument("--input", required=True, type=Path)
    a.add_argument("--format", required=True, choices=FORMATS)
    a.add_argument("--bins", type=positive_int, help="bins per channel (default depends on the modality)")
    a.add_argument("--mode", default="full", choices=["none"] + [m.name for m in ALL_MODES])
    a.add_argument("--seed", type=seed_int, default=0)
    a.add_argument("--views", type=positive_int, default=2)
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--rrc", type=size_arg, metavar="HxW", help="random resized crop to HxW before quantizing")
    a.add_argument("--scale", type=float_pair, default=(0.2, 1.0), metavar="LO,HI")
    a.add_argument("--crop", type=size_arg, metavar="HxW", help="random fixed-size crop before quantizing")
    a.add_argument("--spectrogram", action="store_true", help="wav only: quantize the log-mel spectrogram, write CSV")
    a.add_argument("--threads", type=positive_int, default=1)

    an = sub.add_parser("analyze", help="run an analysis and write CSV/SVG reports")
    an.add_argument("analysis", choices=["distortion", "bins-sweep", "mode-matrix"])
    an.add_argument("--config", type=Path)
    an.add_argument("--out", required=True, type=Path)
    an.add_argument("--threads", type=positive_int)

    t = sub.add_parser("train-toy", help="train the toy encoder once and probe it")
    t.add_argument("--config", type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=seed_int, default=0)

    pr = sub.add_parser("probe", help="linear-probe saved encoder parameters")
    pr.add_argument("--params", required=True, type=Path)
    pr.add_argument("--config", type=Path)
    pr.add_argument("--out", required=True, type=Path)
    pr.add_argument("--seed", type=seed_int, default=0)
    return p


# --------------------------------------------------------------------------


def cmd_augment(args) -> None:
    if args.spectrogram and args.format != "wav":
        raise UsageError("--spectrogram requires --format wav")
    decoded = decode_any(args.input.read_bytes(), args.format)
    tensor = decoded.tensor
    if args.spectrogram:
        tensor = log_mel_spectrogram(WavClip(decoded.sample_rate, decoded.tensor.data[:, 0]))
    if (args.rrc or args.crop) and (tensor.grid_shape is None):
        raise UsageError(f"--rrc/--crop need grid data; {args.format} input has none")
    stages = []
    if args.rrc:
        stages.append(RandomResizedCrop(*args.rrc, scale_range=args.scale))
    if args.crop:
        stages.append(RandomCrop(*args.crop))
    if args.mode != "none":
        n = args.bins or DEFAULT_BINS["audio" if args.spectrogram else MODALITY[args.format]]
        stages.append(RandomizedQuantize(QuantizerConfig(n, RandomMode.parse(args.mode))))
    pipe = AugmentPipeline(tuple(stages), SeedPolicy(args.seed))

    ext = "csv" if args.spectrogram else EXT[args.format]

    def render(k):
        view = pipe(tensor, 0, k)
        return encode_csv(view) if args.spectrogram else decoded.encode(view)

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        blobs = list(pool.map(render, range(args.views)))
    args.out.mkdir(parents=True, exist_ok=True)
    for k, blob in enumerate(blobs):
        (args.out / f"{args.input.stem}.view{k}.{ext}").write_bytes(blob)


def _config(path):
    return load_config(path) if path is not None else {}


def cmd_analyze(args) -> None:
    cfg = _config(args.config)
    exp = experiment_from_config(cfg)
    if args.threads:
        exp = replace(exp, threads=args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.analysis == "distortion":
        dist = cfg.get("distribution", "uniform")
        if "distribution_file" in cfg:
            dist = decode_any(Path(cfg["distribution_file"]).read_bytes(), "csv").tensor.data[:, 0]
        modes = [RandomMode.parse(m) for m in cfg.get("distortion_modes", "uniform rand-values rand-bins full").split()]
        rows = analysis.distortion_curve(
            dist,
            bins=int_list(cfg.get("distortion_bins", "1 2 4 8 16 32 64")),
            modes=modes,
            n_samples=int(cfg.get("n_samples", 10**6)),
            seed=int(cfg.get("seed", 0)),
        )
        for r in rows:
            r["mse"] = f"{r['mse']:.9e}"
            r["uniform_law"] = f"{analysis.uniform_mse_law(r['n_bins']):.9e}"
        analysis.write_rows(args.out / "distortion.csv", rows)
        plot_rows = [dict(r, mse=float(r["mse"])) for r in rows]
        (args.out / "distortion.svg").write_text(analysis.distortion_svg(plot_rows))
    elif args.analysis == "bins-sweep":
        bins = int_list(cfg.get("sweep_bins", "1 2 4 8 16 32 64"))
        rows = analysis.bins_sweep(exp, bins)
        analysis.write_rows(args.out / "bins_sweep.csv", [r.as_dict() for r in rows])
        (args.out / "bins_sweep.svg").write_text(analysis.sweep_svg(rows))
    else:
        rows = analysis.mode_matrix(exp)
        analysis.write_rows(args.out / "mode_matrix.csv", [r.as_dict() for r in rows])


def cmd_train_toy(args) -> None:
    exp = experiment_from_config(_config(args.config))
    training = exp.training if args.epochs is None else replace(exp.training, epochs=args.epochs)
    if training.epochs < 0:
        raise UsageError("--epochs must be >= 0")
    ds = generate_dataset(replace(exp.dataset, seed=args.seed))
    train_set, test_set = split_dataset(ds, exp.test_fraction, args.seed)
    cfg = replace(training, seed=args.seed, pipeline=exp.pipeline(args.seed))
    result = train(train_set, cfg)
    losses = [{"epoch": 0, "loss": f"{evaluate_loss(result.initial, train_set, cfg):.9f}"}]
    losses += [{"epoch": e + 1, "loss": f"{v:.9f}"} for e, v in enumerate(result.losses)]
    probes = [("init", linear_probe(result.initial, train_set, test_set))]
    if training.epochs > 0:
        probes.append(("final", linear_probe(result.params, train_set, test_set)))
    args.out.mkdir(parents=True, exist_ok=True)
    analysis.write_rows(args.out / "loss.csv", losses)
    analysis.write_rows(args.out / "probe.csv", [_probe_row(stage, r) for stage, r in probes])
    p = result.params
    with open(args.out / "params.npz", "wb") as fh:
        np.savez(fh, w1=p.w1, b1=p.b1, w2=p.w2, b2=p.b2)


def _probe_row(stage, report):
    return {
        "stage": stage,
        "train_accuracy": f"{report.train_accuracy:.6f}",
        "test_accuracy": f"{report.test_accuracy:.6f}",
    }


def cmd_probe(args) -> None:
    exp = experiment_from_config(_config(args.config))
    with np.load(args.params) as z:
        params = EncoderParams(z["w1"], z["b1"], z["w2"], z["b2"])
    ds = generate_dataset(replace(exp.dataset, seed=args.seed))
    train_set, test_set = split_dataset(ds, exp.test_fraction, args.seed)
    if params.w1.shape[1] != 2 * ds.data.shape[2]:
        raise UsageError("parameter shapes do not match the configured dataset")
    args.out.mkdir(parents=True, exist_ok=True)
    analysis.write_rows(args.out / "probe.csv", [_probe_row("probe", linear_probe(params, train_set, test_set))])


COMMANDS = {"augment": cmd_augment, "analyze": cmd_analyze, "train-toy": cmd_train_toy, "probe": cmd_probe}


def _fail(code, message, status):
    print(f"error: {code}: {message}".replace("\n", " "), file=sys.stderr)
    return status


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as err:
        return _fail("usage", err, 2)
    except ConfigError as err:
        return _fail("config", err, 2)
    except CodecError as err:
        return _fail("codec", err, 1)
    except OSError as err:
        return _fail("io", err, 1)
    except TrainingDiverged as err:
        return _fail("diverged", err, 1)
    except ValueError as err:
        return _fail("runtime", err, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
