"""
Bayesian CNN over spectrogram windows.

Layout: K conv blocks (conv → bias → ReLU → max-pool) → flatten → dense
hidden (ReLU) → dense 2. The final dense layer's output is the pre-softmax
"layer l" that event-time fusion acts on; column 0 is interictal, column 1
preictal.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from seizurecast.autodiff import ops
from seizurecast.autodiff.tensor import Tensor, no_grad
from seizurecast.bayes.layers import (
    BayesConv2d,
    BayesDense,
    BayesLayer,
    PriorSpec,
    VariationalParam,
)
from seizurecast.core.config import ArchitectureConfig
from seizurecast.core.contracts import ConfigurationError, ContractError, DimensionError
from seizurecast.core.types import FloatArray

logger = logging.getLogger("seizurecast.bayes.network")

N_CLASSES = 2
PREICTAL = 1
InputShape = Tuple[int, int, int]
Noise = List[Dict[str, FloatArray]]


class BayesianCNN:
    def __init__(self, input_shape: Sequence[int], layers: List[BayesLayer]) -> None:
        if len(input_shape) != 3:
            raise DimensionError(f"input shape must be C×F×T, got {tuple(input_shape)}")
        c, f, t = (int(d) for d in input_shape)
        self.input_shape: InputShape = (c, f, t)
        self.layers = layers

    # ── Construction ──────────────────────────────────────────────────────

    @classmethod
    def build(
        cls,
        input_shape: Sequence[int],
        arch: ArchitectureConfig,
        prior: PriorSpec,
        rng: np.random.Generator,
        deterministic: bool = False,
    ) -> "BayesianCNN":
        shape: InputShape = (int(input_shape[0]), int(input_shape[1]), int(input_shape[2]))
        layers: List[BayesLayer] = []
        current = shape
        for i, width in enumerate(arch.conv_channels, start=1):
            conv = BayesConv2d.create(
                f"conv{i}", current[0], width, arch.kernel_size, rng, prior,
                stride=arch.stride, padding=arch.padding, pool=arch.pool,
                rho_init=arch.rho_init, deterministic=deterministic,
            )
            current = conv.output_shape(current)
            if current[1] < 1 or current[2] < 1:
                raise ConfigurationError(
                    f"input {shape} is too small for {len(arch.conv_channels)} conv blocks "
                    f"(block {i} would output {current})"
                )
            layers.append(conv)
        flat = current[0] * current[1] * current[2]
        layers.append(BayesDense.create(
            "dense1", flat, arch.hidden_units, rng, prior,
            rho_init=arch.rho_init, activation="relu", deterministic=deterministic,
        ))
        layers.append(BayesDense.create(
            "dense2", arch.hidden_units, N_CLASSES, rng, prior,
            rho_init=arch.rho_init, activation="none", deterministic=deterministic,
        ))
        model = cls(shape, layers)
        logger.debug("built %s with %d parameters", model.summary(), model.num_parameters())
        return model

    # ── Introspection ─────────────────────────────────────────────────────

    @property
    def deterministic(self) -> bool:
        return all(layer.deterministic for layer in self.layers)

    def set_deterministic(self, flag: bool) -> None:
        for layer in self.layers:
            layer.set_deterministic(flag)

    def named_params(self) -> Dict[str, VariationalParam]:
        return {
            f"{layer.name}.{name}": p
            for layer in self.layers
            for name, p in layer.params.items()
        }

    def parameters(self) -> List[Tensor]:
        """Trainable tensors in a fixed order (μ, then ρ unless frozen, per parameter)."""
        return [t for layer in self.layers for t in layer.trainable()]

    def num_parameters(self) -> int:
        """Number of weights (each has a μ and a ρ)."""
        return sum(p.size for p in self.named_params().values())

    def summary(self) -> str:
        widths = [layer.weight.shape[0] for layer in self.layers if isinstance(layer, BayesConv2d)]
        hidden = self.layers[-1].weight.shape[0]
        return f"BayesianCNN(input={self.input_shape}, conv={widths}, hidden={hidden})"

    def mean_sigma(self) -> Dict[str, float]:
        return {
            layer.name: float(np.mean(np.concatenate([
                p.sigma_array().reshape(-1) for p in layer.params.values()
            ])))
            for layer in self.layers
        }

    def architecture(self) -> Dict[str, Any]:
        return {
            "input_shape": list(self.input_shape),
            "layers": [layer.hyperparameters() for layer in self.layers],
        }

    # ── Forward ───────────────────────────────────────────────────────────

    def draw_noise(self, rng: np.random.Generator) -> Noise:
        """ε for every layer, drawn in layer order."""
        return [layer.draw_noise(rng) for layer in self.layers]

    def _as_batch(self, x: Any) -> Tensor:
        t = x if isinstance(x, Tensor) else Tensor(x)
        if t.ndim == 3:
            t = ops.reshape(t, (1, *t.shape))
        if t.ndim != 4 or t.shape[1:] != self.input_shape:
            raise DimensionError(f"expected input N×{self.input_shape}, got {t.shape}")
        return t

    def forward(
        self,
        x: Any,
        rng: Optional[np.random.Generator] = None,
        noise: Optional[Noise] = None,
    ) -> Tensor:
        """Pre-softmax logits (N×2) under one fresh weight draw."""
        if noise is None and not self.deterministic:
            if rng is None:
                raise ContractError("forward() needs an rng or frozen noise")
            noise = self.draw_noise(rng)
        h = self._as_batch(x)
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BayesDense) and h.ndim > 2:
                h = ops.flatten(h)
            h = layer.forward(h, noise=noise[i] if noise is not None else None)
        return h

    def kl(self) -> Tensor:
        total = self.layers[0].kl()
        for layer in self.layers[1:]:
            total = ops.add(total, layer.kl())
        return total

    def predict_logits(
        self,
        x: Any,
        rng: Optional[np.random.Generator] = None,
        noise: Optional[Noise] = None,
    ) -> FloatArray:
        with no_grad():
            return self.forward(x, rng=rng, noise=noise).data

    def predict_proba(
        self,
        x: Any,
        rng: Optional[np.random.Generator] = None,
        noise: Optional[Noise] = None,
    ) -> FloatArray:
        """Preictal softmax probability per window under one weight draw."""
        return ops.softmax_array(self.predict_logits(x, rng=rng, noise=noise))[:, PREICTAL]

    def mean_logits(self, x: Any) -> FloatArray:
        """Logits with every weight at its posterior mean; no graph is recorded."""
        with no_grad():
            h = self._as_batch(x)
            for layer in self.layers:
                if isinstance(layer, BayesDense) and h.ndim > 2:
                    h = ops.flatten(h)
                h = layer._apply(h, layer.weight.mu, layer.bias.mu)
        return h.data
