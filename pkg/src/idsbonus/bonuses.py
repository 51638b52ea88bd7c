"""Intrinsic reward bonuses.

``dfs_bonus`` rewards a change in ensemble disagreement between successive
states (deepening search). ``bfs_bonus`` rewards replayed actions the current
policy has drifted away from, weighted by how likely they were when collected
(broadening search / self-imitation).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

logger = logging.getLogger(__name__)

EXP_CLAMP = 50.0


@dataclass(frozen=True)
class DfsConfig:
    eta: float = 0.5
    nu: float = 2.0
    gamma: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


@dataclass(frozen=True)
class BfsConfig:
    eta: float = 0.5
    nu: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.nu <= 0:
            raise ValueError("nu must be positive")

    @property
    def q(self) -> float:
        return 1.0 + self.nu


def dfs_bonus(cfg: DfsConfig, sigma_next: float, sigma_curr: float) -> float:
    """``|gamma * sigma_next - eta * sigma_curr| ** nu``."""
    if sigma_next < 0 or sigma_curr < 0:
        raise ValueError("dispersions must be non-negative")
    return abs(cfg.gamma * sigma_next - cfg.eta * sigma_curr) ** cfg.nu


def clamped_exp(z: float) -> tuple[float, bool]:
    """exp(z) with z clipped to +-50; also reports whether the clip fired."""
    if z > EXP_CLAMP or z < -EXP_CLAMP:
        logger.debug("exponent %.3g clamped", z)
        return math.exp(max(-EXP_CLAMP, min(EXP_CLAMP, z))), True
    return math.exp(z), False


def q_log(x: float, q: float) -> float:
    if x <= 0:
        raise ValueError("q_log needs x > 0")
    if q == 1.0:
        return math.log(x)
    return (x ** (1.0 - q) - 1.0) / (1.0 - q)


def rho(log_pi: float, log_b: float, q: float) -> float:
    """Likelihood-ratio weight ``exp((1 - q) * (log_pi - log_b))``."""
    return clamped_exp((1.0 - q) * (log_pi - log_b))[0]


def bfs_exponent(cfg: BfsConfig, log_pi: float, log_b: float) -> float:
    return -cfg.nu * (log_pi - cfg.eta * log_b)


def bfs_bonus(cfg: BfsConfig, log_pi: float, log_b: float) -> float:
    """``exp(-nu * (log_pi - eta * log_b))``; ``log_b`` is the stored behaviour log-likelihood."""
    return clamped_exp(bfs_exponent(cfg, log_pi, log_b))[0]
