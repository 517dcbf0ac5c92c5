"""Histogram-based Jensen-Shannon divergence and the per-checkpoint run log."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, OrderingError

DEFAULT_BINS = 50
SUPPORT_MARGIN = 0.1


@dataclass(frozen=True)
class Histogram2D:
    mass: np.ndarray  # (bins_x, bins_y), sums to 1 or is all zero
    support: tuple  # (x_min, x_max, y_min, y_max)
    dropped: int = 0

    @property
    def bins(self):
        return self.mass.shape

    @property
    def empty(self):
        return not self.mass.any()


def fit_support(ground_truth) -> tuple:
    """Bounding box of ``ground_truth`` widened by 10% of its span on each side.

    An axis with zero span is widened by 0.5 on each side instead.
    """
    pts = np.asarray(ground_truth, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ConfigurationError(f"need a non-empty (N, 2) array, got shape {pts.shape}")
    bounds = []
    for axis in range(2):
        lo, hi = float(pts[:, axis].min()), float(pts[:, axis].max())
        span = hi - lo
        if span > 0.0:
            bounds += [lo - SUPPORT_MARGIN * span, hi + SUPPORT_MARGIN * span]
        else:
            bounds += [lo - 0.5, hi + 0.5]
    return tuple(bounds)


def histogram2d(points, support, bins=DEFAULT_BINS) -> Histogram2D:
    """Normalized 2-D histogram over ``support``; outside points are dropped."""
    if bins < 1:
        raise ConfigurationError(f"bins must be >= 1, got {bins}")
    x0, x1, y0, y1 = support
    if not (x0 < x1 and y0 < y1):
        raise ConfigurationError(f"degenerate support {support}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    inside = (
        (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    )
    counts, _, _ = np.histogram2d(
        pts[inside, 0], pts[inside, 1], bins=bins, range=[[x0, x1], [y0, y1]]
    )
    total = counts.sum()
    mass = counts / total if total > 0 else counts
    return Histogram2D(mass, tuple(support), int(len(pts) - inside.sum()))


def _kl_to_mixture(p, m):
    # m can underflow to zero next to subnormal masses; such bins contribute 0
    nz = (p > 0.0) & (m > 0.0)
    return float(np.sum(p[nz] * np.log2(p[nz] / m[nz])))


def js_divergence(p: Histogram2D, q: Histogram2D) -> float:
    """Jensen-Shannon divergence in bits, so the result lies in [0, 1].

    An all-zero histogram against a non-empty one counts as fully disjoint
    (1.0); two empty histograms give 0.0.
    """
    if p.mass.shape != q.mass.shape or p.support != q.support:
        raise ConfigurationError(
            f"histogram geometry differs: {p.mass.shape} on {p.support} vs "
            f"{q.mass.shape} on {q.support}"
        )
    if p.empty or q.empty:
        return 0.0 if p.empty and q.empty else 1.0
    a = p.mass.ravel()
    b = q.mass.ravel()
    m = 0.5 * (a + b)
    js = 0.5 * _kl_to_mixture(a, m) + 0.5 * _kl_to_mixture(b, m)
    return min(max(js, 0.0), 1.0)


def js_between_samples(generated, ground_truth, bins=DEFAULT_BINS, support=None) -> float:
    """JS divergence of two 2-D samples on a grid fit to the ground truth."""
    generated = np.asarray(generated, dtype=np.float64)
    ground_truth = np.asarray(ground_truth, dtype=np.float64)
    if len(generated) == 0 or len(ground_truth) == 0:
        raise ConfigurationError("both samples must be non-empty")
    if support is None:
        support = fit_support(ground_truth)
    return js_divergence(
        histogram2d(generated, support, bins), histogram2d(ground_truth, support, bins)
    )


def image_projection(images) -> np.ndarray:
    """Map each flattened image to (pixel mean, pixel variance)."""
    images = np.asarray(images, dtype=np.float64)
    return np.column_stack([images.mean(axis=1), images.var(axis=1)])


@dataclass(frozen=True)
class LogRow:
    epoch: int
    js_divergence: float
    cumulative_elapsed_ns: int
    g_updates: int
    d_updates: int


@dataclass
class RunLog:
    rows: list[LogRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def epochs(self):
        return [r.epoch for r in self.rows]

    @property
    def last(self):
        return self.rows[-1]


def record_checkpoint(log: RunLog, epoch, elapsed_ns, counts, js) -> RunLog:
    """Append a row, enforcing increasing epochs/time and non-decreasing counts."""
    g, d = counts
    row = LogRow(int(epoch), float(js), int(elapsed_ns), int(g), int(d))
    if log.rows:
        prev = log.rows[-1]
        if row.epoch <= prev.epoch:
            raise OrderingError(f"epoch {row.epoch} does not follow {prev.epoch}")
        if row.cumulative_elapsed_ns <= prev.cumulative_elapsed_ns:
            raise OrderingError(
                f"cumulative time {row.cumulative_elapsed_ns} ns does not exceed "
                f"{prev.cumulative_elapsed_ns} ns"
            )
        if row.g_updates < prev.g_updates or row.d_updates < prev.d_updates:
            raise OrderingError(
                f"update counts went backwards: ({prev.g_updates}, {prev.d_updates})"
                f" -> ({row.g_updates}, {row.d_updates})"
            )
    log.rows.append(row)
    return log
