"""scikit-learn style front end for GAN / CEN training."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import nn
from .datasets import Rng, sample_latent
from .exceptions import ConfigurationError
from .training import MODES, build_model, histogram_metric, run_training


class CooperativeGAN(BaseEstimator):
    """Generator/discriminator pair trained competitively or cooperatively.

    Parameters
    ----------
    mode : {"cen", "gan"}, default="cen"
        ``"gan"`` updates both networks on every batch. ``"cen"`` gates the
        updates so only the module that got worse since the previous batch
        is trained.
    latent_dim : int, default=2
        Width of the uniform[-1, 1] latent input.
    hidden : tuple of int, default=(32, 32)
        Hidden widths, shared by generator and discriminator.
    output_activation : str, default="identity"
        Generator output activation; use ``"sigmoid"`` for [0, 1] images.
    epochs, batch_size, checkpoint_every : int
        Training length, batch size and logging cadence (in epochs).
    bins : int, default=50
        Histogram resolution per axis for the JS divergence metric.
    learning_rate, beta1, beta2 : float
        Adam hyperparameters, identical for both networks.
    projection : callable or None
        Maps data rows to 2-D before histogramming (needed for images).
    random_state : int or None
        Seeds weight init, batch shuffling/latent draws and checkpoint
        sampling (three independent streams).

    Attributes
    ----------
    model_ : GanModel
        Trained networks and optimizer states.
    log_ : RunLog
        One row per checkpoint.
    n_features_in_ : int
    """

    def __init__(
        self,
        mode="cen",
        latent_dim=2,
        hidden=(32, 32),
        output_activation="identity",
        epochs=800,
        batch_size=64,
        checkpoint_every=100,
        bins=50,
        learning_rate=2e-4,
        beta1=0.5,
        beta2=0.999,
        projection=None,
        random_state=None,
    ):
        self.mode = mode
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.output_activation = output_activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.checkpoint_every = checkpoint_every
        self.bins = bins
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.projection = projection
        self.random_state = random_state

    def _check_params(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("latent_dim", "epochs", "batch_size", "checkpoint_every", "bins"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value}")

    def init_model(self, n_features):
        """The untrained model ``fit`` would start from."""
        init_seed, _, _ = np.random.SeedSequence(self.random_state).spawn(3)
        return build_model(
            n_features,
            self.latent_dim,
            hidden=self.hidden,
            output_activation=self.output_activation,
            seed=init_seed,
            lr=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
        )

    def fit(self, X, y=None, *, on_checkpoint=None, on_step=None):
        """Train on the rows of ``X``; ``y`` is ignored.

        ``on_checkpoint`` and ``on_step`` are forwarded to
        :func:`cenlab.training.run_training`.
        """
        self._check_params()
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        self.n_features_in_ = X.shape[1]
        _, train_ss, eval_ss = np.random.SeedSequence(self.random_state).spawn(3)
        self.model_ = self.init_model(X.shape[1])
        self.log_ = run_training(
            self.model_,
            X,
            self.mode,
            self.epochs,
            self.batch_size,
            self.checkpoint_every,
            Rng(train_ss),
            metric=histogram_metric(X, self.bins, self.projection),
            eval_rng=Rng(eval_ss),
            on_checkpoint=on_checkpoint,
            on_step=on_step,
        )
        return self

    def sample(self, n_samples=1, random_state=None):
        """Draw ``n_samples`` rows from the trained generator."""
        check_is_fitted(self, "model_")
        z = sample_latent(n_samples, self.latent_dim, Rng(random_state))
        return nn.predict(self.model_.generator, z)

    def predict_proba(self, X):
        """Discriminator probability that each row of ``X`` is real."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return nn.predict(self.model_.discriminator, X)[:, 0]

    def score(self, X, y=None, random_state=0):
        """Negative JS divergence between ``len(X)`` generated rows and ``X``."""
        X = check_array(X, dtype=np.float64)
        generated = self.sample(len(X), random_state)
        return -histogram_metric(X, self.bins, self.projection)(generated)
