"""Freezing, alignment-layer replacement and CORAL/MMD-regularized personalization."""

from .alignment import AlignmentPenalty, coral_grad, coral_loss, covariance, mmd_grad, mmd_loss
from .personalize import (
    ALIGNMENT_LAYER,
    FROZEN_LAYERS,
    Personalizer,
    TransferConfig,
    build_personalized,
    personalize,
)

__all__ = [
    "ALIGNMENT_LAYER",
    "FROZEN_LAYERS",
    "AlignmentPenalty",
    "Personalizer",
    "TransferConfig",
    "build_personalized",
    "coral_grad",
    "coral_loss",
    "covariance",
    "mmd_grad",
    "mmd_loss",
    "personalize",
]
