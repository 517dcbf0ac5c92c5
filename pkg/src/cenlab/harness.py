"""Command-line experiment runner: GAN vs CEN on the synthetic shapes and MNIST."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datasets import (
    MNIST123_SUBSET,
    SYNTHETIC,
    Rng,
    load_mnist_idx,
    subset_mnist,
)
from .estimator import CooperativeGAN
from .exceptions import (
    CenlabError,
    ComparisonError,
    ConfigurationError,
    NumericDivergenceError,
)
from .metrics import RunLog, fit_support, image_projection

logger = logging.getLogger(__name__)

DATASETS = ("sine", "ellipses", "circles", "mnist", "mnist123")
MODES = ("gan", "cen", "both")
CSV_HEADER = ["epoch", "js_divergence", "cumulative_time_ms", "g_updates", "d_updates"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

BLUE = "#1f77b4"
ORANGE = "#ff7f0e"


@dataclass
class ExperimentConfig:
    mode: str = "both"
    dataset: str = "sine"
    epochs: int = 800
    batch_size: Optional[int] = None  # 64 for 2-D data, 128 for MNIST
    dataset_size: Optional[int] = None  # 2048 for 2-D data, all images for MNIST
    seed: int = 42
    checkpoint_every: int = 100
    bins: int = 50
    out_dir: str = "runs"
    mnist_images: Optional[str] = None
    mnist_labels: Optional[str] = None
    no_timing: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dataset not in DATASETS:
            raise ConfigurationError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        for name in ("epochs", "batch_size", "dataset_size", "checkpoint_every", "bins"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {value}")
        if self.is_mnist and not (self.mnist_images and self.mnist_labels):
            raise ConfigurationError(
                f"dataset {self.dataset!r} needs --mnist-images and --mnist-labels"
            )

    @property
    def is_mnist(self):
        return self.dataset.startswith("mnist")

    @property
    def modes(self):
        return ["gan", "cen"] if self.mode == "both" else [self.mode]


@dataclass(frozen=True)
class ComparisonSummary:
    gan_final_js: float
    cen_final_js: float
    gan_time_ns: int
    cen_time_ns: int
    gan_g_updates: int
    gan_d_updates: int
    cen_g_updates: int
    cen_d_updates: int

    @property
    def time_ratio(self):
        return self.cen_time_ns / self.gan_time_ns

    @property
    def js_delta(self):
        return self.cen_final_js - self.gan_final_js


def _build_parser():
    p = argparse.ArgumentParser(
        prog="cenlab", description="Train GAN and/or CEN and compare them."
    )
    p.add_argument("--mode", choices=MODES, default="both")
    p.add_argument("--dataset", choices=DATASETS, default="sine")
    p.add_argument("--epochs", type=int, default=800)
    p.add_argument("--batch-size", type=int, default=None,
                   help="default 64 (2-D data) or 128 (MNIST)")
    p.add_argument("--dataset-size", type=int, default=None,
                   help="synthetic points (default 2048); caps MNIST rows if given")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--checkpoint-every", type=int, default=100)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--mnist-images")
    p.add_argument("--mnist-labels")
    p.add_argument("--no-timing", action="store_true",
                   help="write zeros in time columns so outputs are byte-deterministic")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_cli(argv=None) -> ExperimentConfig:
    """Parse flags into a config; usage problems exit with status 2."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = ExperimentConfig(
            mode=args.mode,
            dataset=args.dataset,
            epochs=args.epochs,
            batch_size=args.batch_size,
            dataset_size=args.dataset_size,
            seed=args.seed,
            checkpoint_every=args.checkpoint_every,
            bins=args.bins,
            out_dir=args.out_dir,
            mnist_images=args.mnist_images,
            mnist_labels=args.mnist_labels,
            no_timing=args.no_timing,
        )
    except ConfigurationError as exc:
        parser.error(str(exc))
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    return config


def load_dataset(config: ExperimentConfig) -> np.ndarray:
    if not config.is_mnist:
        n = config.dataset_size or 2048
        return SYNTHETIC[config.dataset](n, Rng(config.seed))
    data = load_mnist_idx(config.mnist_images, config.mnist_labels)
    if config.dataset == "mnist123":
        data = subset_mnist(data, MNIST123_SUBSET)
    images = data.images
    if config.dataset_size:
        images = images[: config.dataset_size]
    return images


def make_estimator(config: ExperimentConfig, mode: str) -> CooperativeGAN:
    common = dict(
        mode=mode,
        epochs=config.epochs,
        checkpoint_every=min(config.checkpoint_every, config.epochs),
        bins=config.bins,
        random_state=config.seed,
    )
    if config.is_mnist:
        return CooperativeGAN(
            latent_dim=64,
            hidden=(256,),
            output_activation="sigmoid",
            batch_size=config.batch_size or 128,
            projection=image_projection,
            **common,
        )
    return CooperativeGAN(batch_size=config.batch_size or 64, **common)


def _fmt(x):
    return f"{x:.6f}"


def emit_metrics_csv(log: RunLog, path, no_timing=False):
    """Write one row per checkpoint; floats carry six decimals."""
    if not len(log):
        raise ConfigurationError(f"refusing to write empty run log to {path}")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in log:
            ms = 0.0 if no_timing else row.cumulative_elapsed_ns / 1e6
            w.writerow([row.epoch, _fmt(row.js_divergence), _fmt(ms), row.g_updates, row.d_updates])


def emit_scatter_svg(real, generated, path, support=None):
    """Ground truth in blue under the generated sample in orange."""
    real = np.asarray(real, dtype=np.float64)
    generated = np.asarray(generated, dtype=np.float64)
    if len(real) == 0 or len(generated) == 0:
        raise ConfigurationError("scatter plot needs two non-empty samples")
    x0, x1, y0, y1 = support or fit_support(real)
    w, h = x1 - x0, y1 - y0
    r = 0.004 * max(w, h)
    # y is negated so larger values are drawn higher up
    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="480" height="480" '
        f'viewBox="{x0:.6g} {-y1:.6g} {w:.6g} {h:.6g}" preserveAspectRatio="none">',
        f'<rect x="{x0:.6g}" y="{-y1:.6g}" width="{w:.6g}" height="{h:.6g}" fill="white"/>',
    ]
    for cls, colour, pts in (("real", BLUE, real), ("generated", ORANGE, generated)):
        lines.append(f'<g class="{cls}" fill="{colour}">')
        lines.extend(f'<circle cx="{x:.6g}" cy="{-y:.6g}" r="{r:.3g}"/>' for x, y in pts)
        lines.append("</g>")
    lines.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def emit_digit_grid_svg(images, path, shape=(28, 28), grid=4):
    """The first ``grid*grid`` images as grayscale pixel rectangles."""
    rows, cols = shape
    images = np.clip(np.asarray(images, dtype=np.float64)[: grid * grid], 0.0, 1.0)
    size = grid * (cols + 1) + 1
    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size * 4}" '
        f'height="{size * 4}" viewBox="0 0 {size} {size}" shape-rendering="crispEdges">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="black"/>',
    ]
    for k, img in enumerate(images):
        ox = 1 + (k % grid) * (cols + 1)
        oy = 1 + (k // grid) * (rows + 1)
        levels = np.rint(img.reshape(rows, cols) * 255).astype(int)
        for i, j in zip(*np.nonzero(levels)):
            v = levels[i, j]
            lines.append(
                f'<rect x="{ox + j}" y="{oy + i}" width="1" height="1" fill="rgb({v},{v},{v})"/>'
            )
    lines.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def compare_runs(gan_log: RunLog, cen_log: RunLog) -> ComparisonSummary:
    if not len(gan_log) or not len(cen_log):
        raise ComparisonError("cannot compare empty run logs")
    if gan_log.epochs != cen_log.epochs:
        raise ComparisonError(
            f"checkpoint epochs differ: gan {gan_log.epochs} vs cen {cen_log.epochs}"
        )
    g, c = gan_log.last, cen_log.last
    return ComparisonSummary(
        g.js_divergence, c.js_divergence,
        g.cumulative_elapsed_ns, c.cumulative_elapsed_ns,
        g.g_updates, g.d_updates, c.g_updates, c.d_updates,
    )


SUMMARY_HEADER = [
    "gan_final_js", "cen_final_js", "js_delta",
    "gan_time_ms", "cen_time_ms", "time_ratio_cen_over_gan",
    "gan_g_updates", "gan_d_updates", "cen_g_updates", "cen_d_updates",
]


def emit_summary_csv(summary: ComparisonSummary, path, no_timing=False):
    if no_timing:
        times = [_fmt(0.0)] * 3
    else:
        times = [
            _fmt(summary.gan_time_ns / 1e6),
            _fmt(summary.cen_time_ns / 1e6),
            _fmt(summary.time_ratio),
        ]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerow([
            _fmt(summary.gan_final_js), _fmt(summary.cen_final_js), _fmt(summary.js_delta),
            *times,
            summary.gan_g_updates, summary.gan_d_updates,
            summary.cen_g_updates, summary.cen_d_updates,
        ])


def run_experiment(config: ExperimentConfig):
    """Run every requested mode and write CSVs and snapshots to ``config.out_dir``.

    Returns ``[(mode, RunLog), ...]`` in the order the modes ran (GAN first).
    """
    if config.epochs < config.checkpoint_every:
        logger.warning(
            "epochs (%d) < checkpoint_every (%d); checkpointing at the final epoch only",
            config.epochs, config.checkpoint_every,
        )
    os.makedirs(config.out_dir, exist_ok=True)
    data = load_dataset(config)
    support = None if config.is_mnist else fit_support(data)

    results = []
    for mode in config.modes:
        def snapshot(epoch, sample, row, mode=mode):
            logger.info("%s epoch %d: js=%.4f g=%d d=%d", mode, epoch,
                        row.js_divergence, row.g_updates, row.d_updates)
            if config.is_mnist:
                path = os.path.join(config.out_dir, f"grid_{mode}_{epoch}.svg")
                emit_digit_grid_svg(sample, path)
            else:
                path = os.path.join(config.out_dir, f"scatter_{mode}_{epoch}.svg")
                emit_scatter_svg(data, sample, path, support)

        est = make_estimator(config, mode).fit(data, on_checkpoint=snapshot)
        emit_metrics_csv(
            est.log_, os.path.join(config.out_dir, f"metrics_{mode}.csv"), config.no_timing
        )
        results.append((mode, est.log_))

    if config.mode == "both":
        summary = compare_runs(results[0][1], results[1][1])
        emit_summary_csv(summary, os.path.join(config.out_dir, "summary.csv"), config.no_timing)
        logger.info("time ratio cen/gan %.3f, final js gan %.4f cen %.4f",
                    summary.time_ratio, summary.gan_final_js, summary.cen_final_js)
    return results


def main(argv=None) -> int:
    config = parse_cli(argv)
    try:
        run_experiment(config)
    except NumericDivergenceError as exc:
        print(f"cenlab: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CenlabError, OSError) as exc:
        print(f"cenlab: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
