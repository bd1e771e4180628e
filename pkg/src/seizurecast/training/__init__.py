"""SVI training loop, optimizer and class balancing."""

from seizurecast.training.optim import Adam
from seizurecast.training.sampling import balance_classes, minibatches
from seizurecast.training.svi import (
    ElboTerms,
    EpochRecord,
    TrainReport,
    elbo_terms,
    kl_weight_for,
    negative_elbo,
    train,
)

__all__ = [
    "Adam",
    "ElboTerms",
    "EpochRecord",
    "TrainReport",
    "balance_classes",
    "elbo_terms",
    "kl_weight_for",
    "minibatches",
    "negative_elbo",
    "train",
]
