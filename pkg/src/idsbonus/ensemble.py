"""Ensemble state-value critic: shared trunk, K linear heads, frozen random priors.

Head k evaluates ``(w_k + beta * c_k) . phi(s) + (b_k + beta * cb_k)`` where
``phi`` is the trunk output and ``c_k`` are prior weights fixed at init.
The ensemble is summarised by its median (consensus) and the median absolute
deviation around it (dispersion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .approximator import (
    ConfigurationError,
    MlpParams,
    OptimizerState,
    backward,
    forward,
    init_mlp,
    step_arrays,
)


def median(values, axis: int = -1) -> np.ndarray | float:
    """Median along ``axis``; even counts use the midpoint of the two central values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or v.shape[axis] == 0:
        raise ValueError("median of empty input")
    s = np.sort(v, axis=axis)
    n = s.shape[axis]
    hi = np.take(s, n // 2, axis=axis)
    if n % 2:
        out = hi
    else:
        lo = np.take(s, n // 2 - 1, axis=axis)
        out = 0.5 * (lo + hi)
    return float(out) if np.ndim(out) == 0 else out


def dispersion(values, axis: int = -1) -> np.ndarray | float:
    """Median absolute deviation from the median (no normal-consistency factor)."""
    v = np.asarray(values, dtype=float)
    center = median(v, axis=axis)
    dev = np.abs(v - np.expand_dims(center, axis)) if np.ndim(center) else np.abs(v - center)
    return median(dev, axis=axis)


class ValueReadout(NamedTuple):
    per_head: np.ndarray
    consensus: np.ndarray | float
    dispersion: np.ndarray | float


class TdErrors(NamedTuple):
    consensus: np.ndarray
    per_head: np.ndarray


@dataclass
class EnsembleCritic:
    trunk: MlpParams
    head_w: np.ndarray  # (K, F)
    head_b: np.ndarray  # (K,)
    prior_w: np.ndarray  # (K, F), frozen
    prior_b: np.ndarray  # (K,), frozen
    prior_scale: float = 1.0
    gamma: float = 0.99
    consensus: str = "median"
    bootstrap: str = "self"

    def __post_init__(self):
        k, f = self.head_w.shape
        if k < 1:
            raise ConfigurationError("ensemble needs at least one head")
        if f != self.trunk.out_width:
            raise ConfigurationError(f"head width {f} != trunk output width {self.trunk.out_width}")
        if self.prior_w.shape != (k, f) or self.head_b.shape != (k,) or self.prior_b.shape != (k,):
            raise ConfigurationError("prior/head shapes disagree")
        if self.prior_scale < 0:
            raise ConfigurationError("prior scale must be non-negative")
        if not 0 <= self.gamma < 1:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if self.consensus not in ("median", "mean"):
            raise ConfigurationError(f"unknown consensus {self.consensus!r}")
        if self.bootstrap not in ("self", "consensus"):
            raise ConfigurationError(f"unknown bootstrap {self.bootstrap!r}")

    @property
    def n_heads(self) -> int:
        return self.head_w.shape[0]

    def effective_heads(self) -> tuple[np.ndarray, np.ndarray]:
        return self.head_w + self.prior_scale * self.prior_w, self.head_b + self.prior_scale * self.prior_b


def init_critic(
    obs_dim: int,
    rng: np.random.Generator,
    hidden: tuple[int, ...] = (64, 64),
    n_heads: int = 10,
    prior_scale: float = 1.0,
    gamma: float = 0.99,
    zero_heads: bool = False,
    **kwargs,
) -> EnsembleCritic:
    trunk = init_mlp((obs_dim, *hidden), rng, activations=["tanh"] * len(hidden))
    f = hidden[-1]
    bound = np.sqrt(6.0 / (f + n_heads))
    head_w = np.zeros((n_heads, f)) if zero_heads else rng.uniform(-bound, bound, size=(n_heads, f))
    prior_w = rng.uniform(-bound, bound, size=(n_heads, f))
    return EnsembleCritic(
        trunk, head_w, np.zeros(n_heads), prior_w, np.zeros(n_heads), prior_scale, gamma, **kwargs
    )


def value_heads(critic: EnsembleCritic, s) -> np.ndarray:
    """Per-head values; shape (K,) for one state or (N, K) for a batch."""
    phi = forward(critic.trunk, s)
    w, b = critic.effective_heads()
    return phi @ w.T + b


def _center(critic: EnsembleCritic, heads: np.ndarray):
    if critic.consensus == "mean":
        return heads.mean(axis=-1)
    return median(heads, axis=-1)


def read(critic: EnsembleCritic, s) -> ValueReadout:
    heads = value_heads(critic, s)
    return ValueReadout(heads, _center(critic, heads), dispersion(heads, axis=-1))


def td_errors(
    critic: EnsembleCritic, s, s_next, reward, done, heads_s=None, heads_next=None
) -> TdErrors:
    """Consensus and per-head one-step TD errors for a batch.

    ``reward`` is the already-composed reward. Precomputed head values may be
    passed to avoid re-evaluating the critic.
    """
    heads_s = value_heads(critic, s) if heads_s is None else heads_s
    heads_next = value_heads(critic, s_next) if heads_next is None else heads_next
    heads_s = np.atleast_2d(heads_s)
    heads_next = np.atleast_2d(heads_next)
    r = np.atleast_1d(np.asarray(reward, dtype=float))
    cont = 1.0 - np.atleast_1d(np.asarray(done, dtype=float))
    if not (len(r) == len(cont) == len(heads_s) == len(heads_next)):
        raise ConfigurationError("batch sizes disagree")
    g = critic.gamma
    delta = r + g * _center(critic, heads_next) * cont - _center(critic, heads_s)
    if critic.bootstrap == "self":
        boot = heads_next
    else:
        boot = np.repeat(np.atleast_1d(_center(critic, heads_next))[:, None], critic.n_heads, axis=1)
    delta_k = r[:, None] + g * boot * cont[:, None] - heads_s
    return TdErrors(np.asarray(delta, dtype=float), delta_k)


@dataclass
class CriticOptimizer:
    trunk: OptimizerState
    heads: OptimizerState


def critic_update(
    critic: EnsembleCritic, s, delta_k: np.ndarray, opt: CriticOptimizer
) -> tuple[EnsembleCritic, CriticOptimizer, float, bool]:
    """Semi-gradient step on mean over batch of sum_k 0.5 * delta_k**2.

    Each head follows its own error; the trunk receives the head gradients
    summed and divided by K. Returns (critic, optimizer, loss, applied).
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    delta_k = np.atleast_2d(delta_k)
    n, k = delta_k.shape
    loss = float(0.5 * np.mean(np.sum(delta_k**2, axis=1)))
    if not np.isfinite(loss):
        return critic, opt, loss, False

    phi = forward(critic.trunk, s)
    # d loss / d V_k(s) = -delta_k (targets detached)
    g_v = -delta_k / n
    g_head_w = g_v.T @ phi
    g_head_b = g_v.sum(axis=0)
    w_eff, _ = critic.effective_heads()
    g_phi = (g_v @ w_eff) / k
    g_trunk = backward(critic.trunk, s, g_phi)
    if not (g_trunk.is_finite() and np.all(np.isfinite(g_head_w)) and np.all(np.isfinite(g_head_b))):
        return critic, opt, loss, False

    new_heads, heads_opt, _ = step_arrays([critic.head_w, critic.head_b], [g_head_w, g_head_b], opt.heads)
    new_trunk, trunk_opt, _ = step_arrays(critic.trunk.arrays(), g_trunk.arrays(), opt.trunk)
    updated = EnsembleCritic(
        critic.trunk.with_arrays(new_trunk),
        new_heads[0],
        new_heads[1],
        critic.prior_w,
        critic.prior_b,
        critic.prior_scale,
        critic.gamma,
        critic.consensus,
        critic.bootstrap,
    )
    return updated, CriticOptimizer(trunk_opt, heads_opt), loss, True
