"""
Seizurecast: Bayesian CNN seizure-risk forecasting.

Variational Bayesian convolutional networks over EEG spectrogram windows,
event-time priors (time of day, day of week) fused by Bayes' rule, and
Monte-Carlo uncertainty levels for every prediction.
"""

__version__ = "0.4.0"

from seizurecast.bayes.network import BayesianCNN
from seizurecast.core.config import Config, load_config, validate_config
from seizurecast.core.contracts import SeizurecastError, ValidationError

__all__ = [
    "BayesianCNN",
    "Config",
    "SeizurecastError",
    "ValidationError",
    "__version__",
    "load_config",
    "validate_config",
]
