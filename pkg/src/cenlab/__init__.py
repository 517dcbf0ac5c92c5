"""GAN and cooperatively gated (CEN) training over a small numpy network engine."""

from .estimator import CooperativeGAN
from .training import (
    ErrorPair,
    GanModel,
    GateState,
    StepReport,
    build_model,
    cen_gate,
    cen_iteration,
    gan_iteration,
    run_training,
)

__all__ = [
    "CooperativeGAN",
    "ErrorPair",
    "GanModel",
    "GateState",
    "StepReport",
    "build_model",
    "cen_gate",
    "cen_iteration",
    "gan_iteration",
    "run_training",
]
__version__ = "0.1.0"
