"""Depth- and breadth-like exploration bonuses with adaptive gain scheduling."""

from .bonuses import BfsConfig, DfsConfig, bfs_bonus, dfs_bonus, q_log, rho
from .ensemble import EnsembleCritic, dispersion, median, read, td_errors, value_heads
from .scheduler import BonusMode, SchedulerState, compose_reward, metric, metric_grad, update_kappas, zeta

__version__ = "0.1.0"
