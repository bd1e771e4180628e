"""
Variational layers.

Every trainable parameter is a factorized Gaussian q(w) = N(μ, σ²) with
σ = softplus(ρ). A forward pass draws one weight sample for the whole batch
via the reparameterization w = μ + σ·ε, so gradients reach μ and ρ through
the tape. ``kl_to_prior`` is the closed-form KL(q‖p) against a fixed
Gaussian prior.

A layer flagged ``deterministic`` uses w = μ and leaves ρ frozen; a network
built that way is the plain CNN baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, List, Optional, Tuple

import numpy as np

from seizurecast.autodiff import ops
from seizurecast.autodiff.tensor import Tensor
from seizurecast.core.contracts import ConfigurationError, ContractError, DimensionError
from seizurecast.core.types import FloatArray

PARAM_NAMES: Tuple[str, ...] = ("weight", "bias")
_ACTIVATIONS = ("relu", "none")


@dataclass(frozen=True)
class PriorSpec:
    """Weight prior p(w) = N(mean, std²), shared by every element of a layer."""

    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self) -> None:
        if not (self.std > 0 and math.isfinite(self.std)):
            raise ConfigurationError(f"prior std must be a positive finite number, got {self.std}")


class VariationalParam:
    """Posterior mean μ and raw scale ρ for one weight tensor."""

    def __init__(self, mu: Any, rho: Any, trainable_rho: bool = True) -> None:
        mu_arr = np.array(mu, dtype=np.float64, copy=True)
        rho_arr = np.array(rho, dtype=np.float64, copy=True)
        if mu_arr.shape != rho_arr.shape:
            raise DimensionError(f"mu {mu_arr.shape} and rho {rho_arr.shape} differ")
        self.mu = Tensor(mu_arr, requires_grad=True)
        self.rho = Tensor(rho_arr, requires_grad=trainable_rho)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.mu.shape

    @property
    def size(self) -> int:
        return self.mu.size

    def sigma(self) -> Tensor:
        return ops.softplus(self.rho)

    def sigma_array(self) -> FloatArray:
        return np.logaddexp(0.0, self.rho.data)

    def sample(self, eps: Optional[FloatArray]) -> Tensor:
        """μ + σ·ε; ``eps=None`` returns μ itself."""
        if eps is None:
            return self.mu
        if eps.shape != self.shape:
            raise DimensionError(f"noise {eps.shape} does not match parameter {self.shape}")
        return ops.add(self.mu, ops.mul(self.sigma(), Tensor(eps)))


def kl_to_prior(param: VariationalParam, prior: PriorSpec) -> Tensor:
    """Σ ln(σp/σq) + (σq² + (μq − μp)²) / (2σp²) − ½ over all elements."""
    sigma_q = param.sigma()
    centered = ops.sub(param.mu, prior.mean)
    spread = ops.add(ops.mul(sigma_q, sigma_q), ops.mul(centered, centered))
    quad = ops.div(spread, 2.0 * prior.std ** 2)
    per_element = ops.add(ops.sub(quad, ops.log(sigma_q)), math.log(prior.std) - 0.5)
    return ops.sum(per_element)


def he_uniform(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator) -> FloatArray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


# ── Layers ───────────────────────────────────────────────────────────────────


class BayesLayer:
    """Common machinery: parameter pair, noise draws, KL, activation."""

    kind: ClassVar[str] = ""

    def __init__(
        self,
        name: str,
        weight: VariationalParam,
        bias: VariationalParam,
        prior: PriorSpec,
        activation: str = "relu",
        deterministic: bool = False,
    ) -> None:
        if activation not in _ACTIVATIONS:
            raise ConfigurationError(f"{name}: unknown activation {activation!r}")
        self.name = name
        self.weight = weight
        self.bias = bias
        self.prior = prior
        self.activation = activation
        self.deterministic = False
        self.set_deterministic(deterministic)

    @property
    def params(self) -> Dict[str, VariationalParam]:
        return {"weight": self.weight, "bias": self.bias}

    def set_deterministic(self, flag: bool) -> None:
        self.deterministic = bool(flag)
        for p in self.params.values():
            p.rho.requires_grad = not self.deterministic

    def trainable(self) -> List[Tensor]:
        tensors: List[Tensor] = []
        for p in self.params.values():
            tensors.append(p.mu)
            if not self.deterministic:
                tensors.append(p.rho)
        return tensors

    def draw_noise(self, rng: np.random.Generator) -> Dict[str, FloatArray]:
        if self.deterministic:
            return {}
        return {name: rng.standard_normal(self.params[name].shape) for name in PARAM_NAMES}

    def kl(self) -> Tensor:
        return ops.add(kl_to_prior(self.weight, self.prior), kl_to_prior(self.bias, self.prior))

    def forward(
        self,
        x: Tensor,
        rng: Optional[np.random.Generator] = None,
        noise: Optional[Dict[str, FloatArray]] = None,
    ) -> Tensor:
        w = sample_weights(self, rng=rng, noise=noise)
        return self._apply(x, w["weight"], w["bias"])

    def _activate(self, y: Tensor) -> Tensor:
        return ops.relu(y) if self.activation == "relu" else y

    def _apply(self, x: Tensor, w: Tensor, b: Tensor) -> Tensor:  # pragma: no cover - abstract
        raise NotImplementedError

    def hyperparameters(self) -> Dict[str, Any]:
        return {"kind": self.kind, "name": self.name, "activation": self.activation}


def sample_weights(
    layer: BayesLayer,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[Dict[str, FloatArray]] = None,
) -> Dict[str, Tensor]:
    """One reparameterized draw per parameter of *layer*.

    Pass *noise* (as returned by ``layer.draw_noise``) to freeze ε; otherwise
    ε is drawn from *rng*. Deterministic layers return μ unchanged.
    """
    if layer.deterministic:
        return {name: p.mu for name, p in layer.params.items()}
    if noise is None:
        if rng is None:
            raise ContractError(f"{layer.name}: sampling needs an rng or frozen noise")
        noise = layer.draw_noise(rng)
    return {name: p.sample(noise[name]) for name, p in layer.params.items()}


class BayesConv2d(BayesLayer):
    kind = "conv2d"

    def __init__(
        self,
        name: str,
        weight: VariationalParam,
        bias: VariationalParam,
        prior: PriorSpec,
        stride: int = 1,
        padding: int = 1,
        pool: int = 2,
        activation: str = "relu",
        deterministic: bool = False,
    ) -> None:
        if len(weight.shape) != 4 or bias.shape != (weight.shape[0],):
            raise DimensionError(f"{name}: conv weight {weight.shape} / bias {bias.shape} mismatch")
        self.stride = stride
        self.padding = padding
        self.pool = pool
        super().__init__(name, weight, bias, prior, activation, deterministic)

    @classmethod
    def create(
        cls,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        prior: PriorSpec,
        stride: int = 1,
        padding: int = 1,
        pool: int = 2,
        rho_init: float = -3.0,
        activation: str = "relu",
        deterministic: bool = False,
    ) -> "BayesConv2d":
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        weight = VariationalParam(
            he_uniform(shape, in_channels * kernel_size * kernel_size, rng),
            np.full(shape, rho_init),
        )
        bias = VariationalParam(np.zeros(out_channels), np.full(out_channels, rho_init))
        return cls(name, weight, bias, prior, stride, padding, pool, activation, deterministic)

    def output_shape(self, in_shape: Tuple[int, int, int]) -> Tuple[int, int, int]:
        c_out, c_in, kh, kw = self.weight.shape
        _, h, w = in_shape
        h = (h + 2 * self.padding - kh) // self.stride + 1
        w = (w + 2 * self.padding - kw) // self.stride + 1
        if self.pool > 1:
            h, w = h // self.pool, w // self.pool
        return (c_out, h, w)

    def _apply(self, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
        y = ops.conv2d(x, w, stride=self.stride, padding=self.padding)
        y = ops.bias_add(y, b, axis=1 if y.ndim == 4 else 0)
        y = self._activate(y)
        if self.pool > 1:
            y = ops.max_pool2d(y, self.pool)
        return y

    def hyperparameters(self) -> Dict[str, Any]:
        c_out, c_in, k, _ = self.weight.shape
        return {
            **super().hyperparameters(),
            "in_channels": c_in,
            "out_channels": c_out,
            "kernel_size": k,
            "stride": self.stride,
            "padding": self.padding,
            "pool": self.pool,
        }


class BayesDense(BayesLayer):
    kind = "dense"

    def __init__(
        self,
        name: str,
        weight: VariationalParam,
        bias: VariationalParam,
        prior: PriorSpec,
        activation: str = "relu",
        deterministic: bool = False,
    ) -> None:
        if len(weight.shape) != 2 or bias.shape != (weight.shape[1],):
            raise DimensionError(
                f"{name}: dense weight {weight.shape} / bias {bias.shape} mismatch"
            )
        super().__init__(name, weight, bias, prior, activation, deterministic)

    @classmethod
    def create(
        cls,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        prior: PriorSpec,
        rho_init: float = -3.0,
        activation: str = "relu",
        deterministic: bool = False,
    ) -> "BayesDense":
        shape = (in_features, out_features)
        weight = VariationalParam(he_uniform(shape, in_features, rng), np.full(shape, rho_init))
        bias = VariationalParam(np.zeros(out_features), np.full(out_features, rho_init))
        return cls(name, weight, bias, prior, activation, deterministic)

    def _apply(self, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
        if x.ndim == 1:
            x = ops.reshape(x, (1, x.shape[0]))
        if x.ndim != 2 or x.shape[1] != w.shape[0]:
            raise DimensionError(f"{self.name}: input {x.shape} does not fit weight {w.shape}")
        return self._activate(ops.bias_add(ops.matmul(x, w), b, axis=-1))

    def hyperparameters(self) -> Dict[str, Any]:
        fan_in, fan_out = self.weight.shape
        return {**super().hyperparameters(), "in_features": fan_in, "out_features": fan_out}
