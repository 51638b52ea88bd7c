"""Gain scheduling between the depth and breadth bonuses.

The mixing weight ``zeta`` is the geometric mean of two stagnation metrics,
one on successive value dispersions and one on current vs behaviour action
densities. Their shape parameters are adapted by exponentiated gradient
descent so that ``zeta`` hovers around one half.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace

from .bonuses import EXP_CLAMP

logger = logging.getLogger(__name__)

ZETA_FLOOR = 1e-12


class BonusMode(str, enum.Enum):
    VANILLA = "vanilla"
    DFS = "dfs"
    BFS = "bfs"
    SCHEDULED = "scheduled"
    MEAN = "mean"
    SUM = "sum"

    @classmethod
    def parse(cls, name: "str | BonusMode") -> "BonusMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown bonus mode {name!r}; choose from {[m.value for m in cls]}") from None


@dataclass(frozen=True)
class SchedulerState:
    kappa_d: float = 1.0
    kappa_b: float = 1.0
    lr: float = 3e-5
    last_zeta: float = 0.5
    skipped: int = 0

    def __post_init__(self):
        if self.kappa_d <= 0 or self.kappa_b <= 0:
            raise ValueError("kappas must be positive")
        if self.lr <= 0:
            raise ValueError("kappa learning rate must be positive")


def _ratio_pow(x: float, y: float, kappa: float) -> float:
    """``(|x - y| / (x + y)) ** kappa``, i.e. ``1 - m**kappa``."""
    return (abs(x - y) / (x + y)) ** kappa


def metric(x: float, y: float, kappa: float) -> float:
    """Stagnation metric in [0, 1]: 1 when x == y, 0 when one side is zero."""
    if x == y:
        return 1.0
    u = _ratio_pow(x, y, kappa)
    return (1.0 - u) ** (1.0 / kappa)


def metric_grad(x: float, y: float, kappa: float) -> float:
    """Derivative of :func:`metric` with respect to ``kappa``.

    Uses ``-(m/k) * (ln m + (1 - m**k) / (k m**k) * ln(1 - m**k))`` with
    ``1 - m**k`` computed directly from x, y so that nearly stagnant inputs
    keep full precision.
    """
    if x == y:
        return 0.0
    u = _ratio_pow(x, y, kappa)
    if u <= 0.0 or u >= 1.0:
        # m is locally constant (1 or 0)
        return 0.0
    log_m = math.log1p(-u) / kappa
    m = math.exp(log_m)
    return -(m / kappa) * (log_m + u / (kappa * (1.0 - u)) * math.log(u))


def densities(log_pi: float, log_b: float) -> tuple[float, float]:
    c = lambda z: math.exp(max(-EXP_CLAMP, min(EXP_CLAMP, z)))
    return c(log_pi), c(log_b)


def zeta_parts(
    state: SchedulerState, sigma_next: float, sigma_curr: float, pi_density: float, b_density: float
) -> tuple[float, float, float]:
    m_d = metric(sigma_next, sigma_curr, state.kappa_d)
    m_b = metric(pi_density, b_density, state.kappa_b)
    return math.sqrt(m_d * m_b), m_d, m_b


def zeta(state: SchedulerState, sigma_next: float, sigma_curr: float, pi_density: float, b_density: float) -> float:
    return zeta_parts(state, sigma_next, sigma_curr, pi_density, b_density)[0]


def exponentiated_step(kappa: float, grad: float, lr: float) -> float:
    return kappa * math.exp(-lr * grad)


def _sign(v: float) -> float:
    return (v > 0) - (v < 0)


def update_kappas(
    state: SchedulerState, sigma_next: float, sigma_curr: float, pi_density: float, b_density: float
) -> SchedulerState:
    """One exponentiated-gradient step on ``|zeta - 1/2|`` for both kappas."""
    z, m_d, m_b = zeta_parts(state, sigma_next, sigma_curr, pi_density, b_density)
    if z < ZETA_FLOOR:
        return replace(state, last_zeta=z)
    s = _sign(z - 0.5)
    g_d = s * (m_b / z) * metric_grad(sigma_next, sigma_curr, state.kappa_d)
    g_b = s * (m_d / z) * metric_grad(pi_density, b_density, state.kappa_b)
    kd = exponentiated_step(state.kappa_d, g_d, state.lr)
    kb = exponentiated_step(state.kappa_b, g_b, state.lr)
    if not (math.isfinite(kd) and math.isfinite(kb) and kd > 0 and kb > 0):
        logger.warning("kappa update skipped (non-finite step)")
        return replace(state, last_zeta=z, skipped=state.skipped + 1)
    return replace(state, kappa_d=kd, kappa_b=kb, last_zeta=z)


def mode_gain(mode: BonusMode, zeta_value: float, lam: float) -> tuple[float, float]:
    """The (zeta, lambda) actually used by a mode."""
    mode = BonusMode.parse(mode)
    if mode is BonusMode.VANILLA:
        return zeta_value, 0.0
    if mode is BonusMode.DFS:
        return 1.0, lam
    if mode is BonusMode.BFS:
        return 0.0, lam
    if mode is BonusMode.MEAN:
        return 0.5, lam
    if mode is BonusMode.SUM:
        return 0.5, 2.0 * lam
    return zeta_value, lam


def compose_reward(mode: BonusMode, r: float, r_d: float, r_b: float, zeta_value: float, lam: float) -> float:
    """``r + lambda * (zeta * r_d + (1 - zeta) * r_b)`` with per-mode overrides."""
    z, lam = mode_gain(mode, zeta_value, lam)
    return r + lam * (z * r_d + (1.0 - z) * r_b)
