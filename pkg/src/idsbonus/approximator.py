"""Small multilayer perceptrons in plain numpy, with hand-written backprop.

Parameters are held in :class:`MlpParams`, a list of weight matrices and bias
vectors. ``forward`` and ``backward`` accept either a single input vector or a
batch of row vectors; gradients are summed over the batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "identity")


class ConfigurationError(ValueError):
    """Raised when shapes or settings are inconsistent."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ConfigurationError("weights, biases and activations differ in length")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigurationError(f"layer {i}: weight {w.shape} and bias {b.shape} mismatch")
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"layer {i}: unknown activation {act!r}")
            if i > 0 and self.weights[i - 1].shape[0] != w.shape[1]:
                raise ConfigurationError(
                    f"layer {i} expects width {w.shape[1]}, previous layer emits {self.weights[i - 1].shape[0]}"
                )

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def in_width(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_width(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Flat list of parameter arrays, weights and biases interleaved per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpParams":
        return MlpParams(list(arrays[0::2]), list(arrays[1::2]), self.activations)

    def zeros_like(self) -> "MlpParams":
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])

    def copy(self) -> "MlpParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


# Gradients share the parameter layout.
Gradients = MlpParams


def init_mlp(
    widths: Sequence[int],
    rng: np.random.Generator,
    activations: Sequence[str] | None = None,
    output_activation: str = "identity",
) -> MlpParams:
    """Glorot-uniform weights, zero biases.

    ``widths`` lists every layer width including input and output. Hidden
    layers default to tanh.
    """
    if len(widths) < 2:
        raise ConfigurationError("need at least input and output widths")
    if activations is None:
        activations = ["tanh"] * (len(widths) - 2) + [output_activation]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, tuple(activations))


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    return np.tanh(z) if act == "tanh" else z


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.in_width:
        raise ConfigurationError(f"input shape {x.shape} does not match input width {params.in_width}")
    return x, single


def _forward_layers(params: MlpParams, x: np.ndarray) -> list[np.ndarray]:
    outs = [x]
    for w, b, act in zip(params.weights, params.biases, params.activations):
        outs.append(_activate(outs[-1] @ w.T + b, act))
    return outs


def forward(params: MlpParams, x) -> np.ndarray:
    xb, single = _as_batch(params, x)
    y = _forward_layers(params, xb)[-1]
    return y[0] if single else y


def backward(params: MlpParams, x, output_grad) -> Gradients:
    """Gradient of ``sum(output_grad * forward(params, x))`` w.r.t. the parameters."""
    xb, single = _as_batch(params, x)
    g = np.asarray(output_grad, dtype=float)
    if single:
        g = g[None, :] if g.ndim == 1 else g
    if g.shape != (xb.shape[0], params.out_width):
        raise ConfigurationError(f"output_grad shape {g.shape} does not match output {(xb.shape[0], params.out_width)}")
    outs = _forward_layers(params, xb)
    gw: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    for i in range(len(params.weights) - 1, -1, -1):
        if params.activations[i] == "tanh":
            g = g * (1.0 - outs[i + 1] ** 2)
        gw[i] = g.T @ outs[i]
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = g @ params.weights[i]
    return MlpParams(gw, gb, params.activations)


@dataclass
class OptimizerState:
    """Adam moments (or plain SGD when ``kind == "sgd"``)."""

    lr: float = 3e-4
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    skipped: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigurationError("learning rate must be non-negative")
        if self.kind not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.kind!r}")


def step_arrays(
    arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray], opt: OptimizerState
) -> tuple[list[np.ndarray], OptimizerState, bool]:
    """One descent step over a list of arrays.

    Returns new arrays, new optimizer state, and whether the step was applied.
    Non-finite gradients leave everything untouched except the skip counter.
    """
    if len(arrays) != len(grads) or any(a.shape != g.shape for a, g in zip(arrays, grads)):
        raise ConfigurationError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(g)) for g in grads):
        logger.warning("non-finite gradient, optimizer step skipped")
        new_opt = OptimizerState(opt.lr, opt.kind, opt.beta1, opt.beta2, opt.eps, opt.step, opt.m, opt.v, opt.skipped + 1)
        return list(arrays), new_opt, False

    t = opt.step + 1
    if opt.kind == "sgd":
        new = [a - opt.lr * g for a, g in zip(arrays, grads)]
        return new, OptimizerState(opt.lr, opt.kind, opt.beta1, opt.beta2, opt.eps, t, [], [], opt.skipped), True

    m_prev = opt.m or [np.zeros_like(a) for a in arrays]
    v_prev = opt.v or [np.zeros_like(a) for a in arrays]
    m = [opt.beta1 * mp + (1 - opt.beta1) * g for mp, g in zip(m_prev, grads)]
    v = [opt.beta2 * vp + (1 - opt.beta2) * g * g for vp, g in zip(v_prev, grads)]
    c1 = 1 - opt.beta1**t
    c2 = 1 - opt.beta2**t
    if opt.lr == 0:
        new = list(arrays)
    else:
        new = [a - opt.lr * (mi / c1) / (np.sqrt(vi / c2) + opt.eps) for a, mi, vi in zip(arrays, m, v)]
    return new, OptimizerState(opt.lr, opt.kind, opt.beta1, opt.beta2, opt.eps, t, m, v, opt.skipped), True


def apply_gradient(params: MlpParams, grads: Gradients, opt: OptimizerState) -> tuple[MlpParams, OptimizerState]:
    """Descent step on ``params``; callers negate gradients for ascent."""
    new, new_opt, _ = step_arrays(params.arrays(), grads.arrays(), opt)
    return params.with_arrays(new), new_opt
