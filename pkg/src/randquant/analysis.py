"""Experiment drivers: distortion curves, toy bin sweeps and the randomness-mode matrix."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from html import escape
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from randquant.augment import AugmentPipeline, AugmentStage, RandomizedQuantize
from randquant.quantizer import ALL_MODES, FULL, UNIFORM, QuantizerConfig, RandomMode, apply, build_quantizer
from randquant.rng import CounterRng, SeedPolicy, derive_key
from randquant.toy_ssl import (
    ProbeReport,
    SyntheticDatasetSpec,
    TrainConfig,
    generate_dataset,
    linear_probe,
    split_dataset,
    train,
)

# --------------------------------------------------------------------------
# distortion


def draw_samples(distribution, n_samples: int, seed: int) -> np.ndarray:
    """Monte-Carlo samples: 'uniform' is U(0, 1), 'gaussian' is N(0, 1), an array is resampled with replacement."""
    rng = CounterRng(derive_key(seed, 10))
    if isinstance(distribution, str):
        if distribution == "uniform":
            return rng.random(n_samples)
        if distribution == "gaussian":
            return rng.normal(n_samples)
        raise ValueError(f"unknown distribution {distribution!r}")
    values = np.asarray(distribution, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty sample pool")
    return values[rng.integers(0, values.size - 1, size=n_samples)]


def distortion_curve(
    distribution="uniform",
    bins: Sequence[int] = (1, 2, 4, 8, 16),
    modes: Sequence[RandomMode] = ALL_MODES,
    n_samples: int = 10**6,
    seed: int = 0,
    chunk: int = 4096,
) -> List[Dict]:
    """Mean squared quantization error for every (n_bins, mode) pair.

    Samples are cut into chunks of ``chunk`` values; each chunk plays the role
    of one channel and gets its own quantizer over its own min/max.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not bins or not modes:
        raise ValueError("empty configuration grid")
    xs = draw_samples(distribution, n_samples, seed)
    # U(0, 1) has a known support; everything else uses each chunk's own range
    known_support = isinstance(distribution, str) and distribution == "uniform"
    rows = []
    for n in sorted(bins):
        for mode in modes:
            cfg = QuantizerConfig(n, mode)
            sq = 0.0
            for k, start in enumerate(range(0, n_samples, chunk)):
                part = xs[start : start + chunk]
                if known_support:
                    lo, hi = 0.0, 1.0
                else:
                    lo, hi = part.min(), part.max()
                q = build_quantizer(lo, hi, cfg, CounterRng(derive_key(seed, 11, n, k)))
                sq += float(np.sum((apply(q, part) - part) ** 2))
            rows.append({"n_bins": n, "mode": mode.name, "mse": sq / n_samples})
    return rows


def uniform_mse_law(n_bins: int, width: float = 1.0) -> float:
    return (width / n_bins) ** 2 / 12.0


# --------------------------------------------------------------------------
# toy runs


@dataclass(frozen=True)
class ToyExperiment:
    """Everything needed to train and probe one augmentation setting over several seeds."""

    dataset: SyntheticDatasetSpec = field(default_factory=SyntheticDatasetSpec)
    training: TrainConfig = field(default_factory=TrainConfig)
    base_stages: Tuple[AugmentStage, ...] = ()
    n_bins: int = 8
    mode: RandomMode = FULL
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    test_fraction: float = 0.5
    threads: int = 1

    def pipeline(self, seed: int, quantize: bool = True) -> AugmentPipeline:
        stages = list(self.base_stages)
        if quantize:
            stages.append(RandomizedQuantize(QuantizerConfig(self.n_bins, self.mode)))
        return AugmentPipeline(tuple(stages), SeedPolicy(derive_key(seed, 5)))


def run_toy_seed(exp: ToyExperiment, seed: int, quantize: bool = True) -> ProbeReport:
    ds = generate_dataset(replace(exp.dataset, seed=seed))
    train_set, test_set = split_dataset(ds, exp.test_fraction, seed)
    cfg = replace(exp.training, seed=seed, pipeline=exp.pipeline(seed, quantize))
    result = train(train_set, cfg)
    report = linear_probe(result.params, train_set, test_set)
    if quantize:
        report.mode, report.n_bins = exp.mode.name, exp.n_bins
    return report


def _run_all(jobs, threads: int) -> List[ProbeReport]:
    """Run (experiment, seed, quantize) jobs; order of results matches order of jobs."""
    if threads <= 1:
        return [run_toy_seed(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: run_toy_seed(*job), jobs))


@dataclass
class SweepRow:
    label: str
    n_bins: Optional[int]
    random_bins: Optional[bool]
    random_values: Optional[bool]
    accuracies: List[float]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    def as_dict(self) -> Dict:
        return {
            "label": self.label,
            "n_bins": "" if self.n_bins is None else self.n_bins,
            "random_bins": "" if self.random_bins is None else int(self.random_bins),
            "random_values": "" if self.random_values is None else int(self.random_values),
            "mean_test_accuracy": f"{self.mean_accuracy:.6f}",
            "seed_accuracies": " ".join(f"{a:.6f}" for a in self.accuracies),
        }


def _collect(settings, exp: ToyExperiment) -> List[List[float]]:
    jobs = [(e, s, q) for e, q in settings for s in exp.seeds]
    reports = _run_all(jobs, exp.threads)
    k = len(exp.seeds)
    return [[r.test_accuracy for r in reports[i * k : (i + 1) * k]] for i in range(len(settings))]


def bins_sweep(exp: ToyExperiment, bins: Sequence[int]) -> List[SweepRow]:
    """Seed-averaged probe accuracy for each bin count, at the experiment's mode."""
    if not bins:
        raise ValueError("empty bins list")
    for n in bins:
        if n < 1:
            raise ValueError(f"bin counts must be >= 1, got {n}")
    settings = [(replace(exp, n_bins=n), True) for n in bins]
    accs = _collect(settings, exp)
    return [
        SweepRow(f"n={n}", n, exp.mode.random_bins, exp.mode.random_values, a) for n, a in zip(bins, accs)
    ]


MODE_ROWS = (
    ("baseline", None),
    ("+ quantize", UNIFORM),
    ("+ quantize", RandomMode(False, True)),
    ("+ quantize", RandomMode(True, False)),
    ("+ quantize", FULL),
)


def mode_matrix(exp: ToyExperiment) -> List[SweepRow]:
    """Baseline without quantization, then the four randomness modes, in that order."""
    settings = [(exp, False) if mode is None else (replace(exp, mode=mode), True) for _, mode in MODE_ROWS]
    accs = _collect(settings, exp)
    rows = []
    for (label, mode), a in zip(MODE_ROWS, accs):
        if mode is None:
            rows.append(SweepRow(label, None, False, False, a))
        else:
            rows.append(SweepRow(label, exp.n_bins, mode.random_bins, mode.random_values, a))
    return rows


# --------------------------------------------------------------------------
# report emission


def rows_to_csv(rows: Sequence[Dict]) -> str:
    if not rows:
        raise ValueError("no rows")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_rows(path, rows: Sequence[Dict]) -> None:
    Path(path).write_text(rows_to_csv(rows))


def line_chart_svg(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
    log_x: bool = False,
    log_y: bool = False,
    width: int = 480,
    height: int = 320,
) -> str:
    """A static SVG 1.1 line chart. Output depends only on the inputs."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    tx = np.log10 if log_x else (lambda v: np.asarray(v, dtype=float))
    ty = np.log10 if log_y else (lambda v: np.asarray(v, dtype=float))
    all_x = np.concatenate([tx(np.asarray(xs, dtype=float)) for xs, _ in series.values()])
    all_y = np.concatenate([ty(np.asarray(ys, dtype=float)) for _, ys in series.values()])
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 60, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(x_label)}</text>',
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(y_label)}</text>',
    ]
    for v, label in ((x0, x0), (x1, x1)):
        shown = 10**label if log_x else label
        out.append(f'<text x="{px(v):.1f}" y="{top + ph + 15}" text-anchor="middle" font-size="10">{shown:.4g}</text>')
    for v in (y0, y1):
        shown = 10**v if log_y else v
        out.append(f'<text x="{left - 4}" y="{py(v) + 3:.1f}" text-anchor="end" font-size="10">{shown:.4g}</text>')
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[i % len(colors)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx(np.asarray(xs, float)), ty(np.asarray(ys, float))))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 + 14 * i}" text-anchor="end" font-size="11" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def distortion_svg(rows: Sequence[Dict]) -> str:
    series = {}
    for mode in dict.fromkeys(r["mode"] for r in rows):
        pts = [(r["n_bins"], r["mse"]) for r in rows if r["mode"] == mode]
        series[mode] = ([p[0] for p in pts], [p[1] for p in pts])
    return line_chart_svg(series, "Quantization distortion", "bins", "MSE", log_x=True, log_y=True)


def sweep_svg(rows: Sequence[SweepRow]) -> str:
    xs = [r.n_bins for r in rows]
    ys = [r.mean_accuracy for r in rows]
    return line_chart_svg({"probe accuracy": (xs, ys)}, "Bin sweep", "bins", "test accuracy", log_x=True)
