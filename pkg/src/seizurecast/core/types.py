"""Shared type aliases.

Import these instead of spelling out raw ``Dict[str, Any]`` / ndarray unions
so call-site intent stays readable.
"""

from __future__ import annotations

from typing import Any, Dict

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
"""Dense float64 array; the only dtype the autodiff layer computes in."""

IntArray = npt.NDArray[np.int64]

EventData = Dict[str, Any]
"""Payload dict for EventBus events (e.g. epoch_done, train_done)."""

ConfigOverrides = Dict[str, Any]
"""CLI / programmatic overrides passed to load_config().

Keys are dotted config paths (``train.epochs``) or top-level field names;
values are already typed.
"""
