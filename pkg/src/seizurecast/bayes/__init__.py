"""Variational layers, the Bayesian CNN and its checkpoint format."""

from seizurecast.bayes.layers import (
    BayesConv2d,
    BayesDense,
    BayesLayer,
    PriorSpec,
    VariationalParam,
    kl_to_prior,
    sample_weights,
)
from seizurecast.bayes.network import BayesianCNN

__all__ = [
    "BayesConv2d",
    "BayesDense",
    "BayesLayer",
    "BayesianCNN",
    "PriorSpec",
    "VariationalParam",
    "kl_to_prior",
    "sample_weights",
]
