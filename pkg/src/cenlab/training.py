"""Competitive (GAN) and cooperative gated (CEN) training iterations.

Both loops are assembled from the same three primitives, so the gate in
:func:`cen_iteration` is the only thing separating them:

* :func:`compute_errors` measures ``dx`` (real rows called fake) and
  ``dz`` (generated rows called real) without touching any weights;
* :func:`train_discriminator_step` descends on ``dx + dz``;
* :func:`train_generator_step` ascends on ``dz``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import nn
from .datasets import Rng, batches, sample_latent
from .exceptions import ConfigurationError, NumericDivergenceError, ShapeError
from .metrics import RunLog, fit_support, histogram2d, js_divergence, record_checkpoint

MODES = ("gan", "cen")


@dataclass
class GanModel:
    generator: nn.Mlp
    discriminator: nn.Mlp
    gen_opt: nn.AdamState
    disc_opt: nn.AdamState

    def __post_init__(self):
        if self.generator.out_dim != self.discriminator.in_dim:
            raise ShapeError(
                "discriminator input dim", self.generator.out_dim, self.discriminator.in_dim
            )
        last = self.discriminator.layers[-1]
        if last.out_dim != 1 or last.activation != "sigmoid":
            raise ConfigurationError(
                "discriminator must end in a single sigmoid unit, got "
                f"{last.out_dim} x {last.activation}"
            )

    @property
    def latent_dim(self) -> int:
        return self.generator.in_dim

    @property
    def data_dim(self) -> int:
        return self.generator.out_dim


def build_model(
    data_dim,
    latent_dim,
    hidden=(32, 32),
    output_activation="identity",
    hidden_activation="leaky_relu",
    seed=None,
    lr=2e-4,
    beta1=0.5,
    beta2=0.999,
):
    """Generator ``latent -> hidden... -> data`` and discriminator ``data -> hidden... -> 1``.

    Both networks are initialized from one seed, so equal seeds give
    bit-identical starting weights.
    """
    init_rng = np.random.default_rng(seed)
    hidden = list(hidden)
    g = nn.init_mlp(
        [latent_dim, *hidden, data_dim],
        [hidden_activation] * len(hidden) + [output_activation],
        init_rng,
    )
    d = nn.init_mlp(
        [data_dim, *hidden, 1], [hidden_activation] * len(hidden) + ["sigmoid"], init_rng
    )
    return GanModel(
        g,
        d,
        nn.AdamState.for_model(g, lr, beta1, beta2),
        nn.AdamState.for_model(d, lr, beta1, beta2),
    )


@dataclass(frozen=True)
class ErrorPair:
    dx: float
    dz: float

    @property
    def generator_error(self):
        return self.dz

    @property
    def discriminator_error(self):
        return self.dx + self.dz

    def is_finite(self):
        return math.isfinite(self.dx) and math.isfinite(self.dz)


@dataclass(frozen=True)
class GateState:
    """Errors seen at the top of the previous CEN iteration (None before the first)."""

    prev_gen_error: Optional[float] = None
    prev_disc_error: Optional[float] = None

    def __post_init__(self):
        if (self.prev_gen_error is None) != (self.prev_disc_error is None):
            raise ConfigurationError("gate state must hold both errors or neither")

    @property
    def empty(self):
        return self.prev_gen_error is None


@dataclass(frozen=True)
class StepReport:
    errors: ErrorPair
    g_updated: bool
    d_updated: bool
    elapsed_ns: int


def _ones(n):
    return np.ones((n, 1))


def _zeros(n):
    return np.zeros((n, 1))


def compute_errors(model: GanModel, real_batch, rng: Rng) -> ErrorPair:
    """``dx`` and ``dz`` on this batch and a fresh latent draw; no weights change."""
    n = len(real_batch)
    if n == 0:
        raise ConfigurationError("real batch is empty")
    z = sample_latent(n, model.latent_dim, rng)
    fake = nn.predict(model.generator, z)
    dx = nn.bce_loss(nn.predict(model.discriminator, real_batch), _ones(n))
    dz = nn.bce_loss(nn.predict(model.discriminator, fake), _zeros(n))
    return ErrorPair(dx, dz)


def train_discriminator_step(model: GanModel, real_batch, rng: Rng) -> ErrorPair:
    """One Adam step on the discriminator minimizing ``dx + dz``.

    Returns the errors measured before the update.
    """
    n = len(real_batch)
    if n == 0:
        raise ConfigurationError("real batch is empty")
    d = model.discriminator
    z = sample_latent(n, model.latent_dim, rng)
    fake = nn.predict(model.generator, z)
    out_real, cache_real = nn.forward(d, real_batch)
    out_fake, cache_fake = nn.forward(d, fake)
    ones, zeros = _ones(n), _zeros(n)
    errors = ErrorPair(nn.bce_loss(out_real, ones), nn.bce_loss(out_fake, zeros))
    g_real = nn.backward(d, cache_real, ones)
    g_fake = nn.backward(d, cache_fake, zeros)
    grads = [nn.LayerGrad(a.weights + b.weights, a.bias + b.bias) for a, b in zip(g_real, g_fake)]
    nn.optimizer_step(d, grads, model.disc_opt)
    return errors


def train_generator_step(model: GanModel, batch_rows, rng: Rng) -> float:
    """One Adam step on the generator that increases ``dz``.

    This is literal gradient ascent on ``bce(D(G(z)), 0)``. Returns ``dz``
    before the update.
    """
    if batch_rows < 1:
        raise ConfigurationError(f"batch_rows must be >= 1, got {batch_rows}")
    z = sample_latent(batch_rows, model.latent_dim, rng)
    fake, cache_g = nn.forward(model.generator, z)
    out, cache_d = nn.forward(model.discriminator, fake)
    zeros = _zeros(batch_rows)
    dz = nn.bce_loss(out, zeros)
    _, d_fake = nn.backward(model.discriminator, cache_d, zeros, return_input_grad=True)
    g_grads, _ = nn.backprop(model.generator, cache_g, d_fake)
    nn.optimizer_step(model.generator, nn.negate(g_grads), model.gen_opt)
    return dz


def gan_iteration(model: GanModel, real_batch, rng: Rng) -> StepReport:
    """Discriminator step, then generator step on a fresh latent draw."""
    start = time.perf_counter_ns()
    errors = train_discriminator_step(model, real_batch, rng)
    train_generator_step(model, len(real_batch), rng)
    return StepReport(errors, True, True, max(1, time.perf_counter_ns() - start))


def cen_gate(current: ErrorPair, state: GateState) -> tuple[bool, bool]:
    """Decide which modules to train this iteration.

    The generator is trained only if its error (``dz``) strictly dropped;
    the discriminator only if its error (``dx + dz``) strictly rose. Ties
    leave a module untouched. With no history both are trained.
    """
    if state.empty:
        return True, True
    train_g = current.generator_error < state.prev_gen_error
    train_d = current.discriminator_error > state.prev_disc_error
    return train_g, train_d


def cen_iteration(model: GanModel, real_batch, state: GateState, rng: Rng):
    """Measure errors, consult the gate, and train only the weaker side.

    Returns ``(report, new_state)``. The new state always holds this
    iteration's measured errors, whether or not anything was trained.
    """
    start = time.perf_counter_ns()
    errors = compute_errors(model, real_batch, rng)
    train_g, train_d = cen_gate(errors, state)
    if train_g:
        train_generator_step(model, len(real_batch), rng)
    if train_d:
        train_discriminator_step(model, real_batch, rng)
    elapsed = max(1, time.perf_counter_ns() - start)
    new_state = GateState(errors.generator_error, errors.discriminator_error)
    return StepReport(errors, train_g, train_d, elapsed), new_state


def histogram_metric(ground_truth, bins=50, projection=None) -> Callable:
    """Build ``metric(generated) -> JS divergence`` against a fixed ground truth.

    ``projection`` maps rows to 2-D first (used for images).
    """
    gt = ground_truth if projection is None else projection(ground_truth)
    support = fit_support(gt)
    reference = histogram2d(gt, support, bins)

    def metric(generated):
        pts = generated if projection is None else projection(generated)
        return js_divergence(histogram2d(pts, support, bins), reference)

    return metric


def run_training(
    model: GanModel,
    dataset,
    mode,
    epochs,
    batch_size,
    checkpoint_every,
    rng: Rng,
    *,
    bins=50,
    metric=None,
    eval_rng=None,
    on_checkpoint=None,
    on_step=None,
) -> RunLog:
    """Train for ``epochs`` passes over ``dataset`` and log every ``checkpoint_every`` epochs.

    At each checkpoint a sample the size of ``dataset`` is generated from
    ``eval_rng`` (``rng`` if not given) and scored with ``metric``
    (histogram JS divergence by default). ``on_checkpoint(epoch, sample, row)``
    and ``on_step(epoch, batch, report)`` are optional hooks.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    if epochs < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {epochs}")
    if checkpoint_every < 1:
        raise ConfigurationError(f"checkpoint_every must be >= 1, got {checkpoint_every}")
    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[1] != model.data_dim:
        raise ShapeError("dataset shape (N, data_dim)", ("N", model.data_dim), dataset.shape)
    if metric is None:
        metric = histogram_metric(dataset, bins)
    eval_rng = rng if eval_rng is None else eval_rng

    log = RunLog()
    state = GateState()
    elapsed = 0
    g_count = d_count = 0
    for epoch in range(1, epochs + 1):
        for b, batch in enumerate(batches(dataset, batch_size, rng)):
            if mode == "gan":
                report = gan_iteration(model, batch, rng)
            else:
                report, state = cen_iteration(model, batch, state, rng)
            if not report.errors.is_finite():
                raise NumericDivergenceError(epoch, b, report.errors)
            elapsed += report.elapsed_ns
            g_count += report.g_updated
            d_count += report.d_updated
            if on_step is not None:
                on_step(epoch, b, report)
        if epoch % checkpoint_every == 0:
            z = sample_latent(len(dataset), model.latent_dim, eval_rng)
            sample = nn.predict(model.generator, z)
            if not np.all(np.isfinite(sample)):
                raise NumericDivergenceError(epoch, "checkpoint", "non-finite generator output")
            record_checkpoint(log, epoch, elapsed, (g_count, d_count), metric(sample))
            if on_checkpoint is not None:
                on_checkpoint(epoch, sample, log.last)
    return log
