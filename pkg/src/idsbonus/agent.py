"""One-step advantage actor-critic with episodic uniform replay and reward bonuses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import scheduler as sched
from .approximator import MlpParams, OptimizerState, backward, forward, init_mlp, step_arrays
from .bonuses import EXP_CLAMP, BfsConfig, DfsConfig, bfs_bonus, bfs_exponent, dfs_bonus
from .ensemble import CriticOptimizer, EnsembleCritic, critic_update, dispersion, init_critic, td_errors, value_heads
from .envs import Env
from .scheduler import BonusMode, SchedulerState

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------- policy


@dataclass
class GaussianPolicy:
    net: MlpParams  # obs -> [mean, log_std]
    act_low: float
    act_high: float

    @property
    def act_dim(self) -> int:
        return self.net.out_width // 2


def init_policy(obs_dim: int, act_dim: int, low: float, high: float, rng, hidden=(64, 64)) -> GaussianPolicy:
    return GaussianPolicy(init_mlp((obs_dim, *hidden, 2 * act_dim), rng), low, high)


def policy_head(policy: GaussianPolicy, s) -> tuple[np.ndarray, np.ndarray]:
    out = forward(policy.net, s)
    d = policy.act_dim
    return out[..., :d], np.clip(out[..., d:], LOG_STD_MIN, LOG_STD_MAX)


def gaussian_log_density(a, mean, log_std) -> np.ndarray | float:
    z = (np.asarray(a) - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z**2 - log_std - 0.5 * LOG_2PI, axis=-1)


def log_prob(policy: GaussianPolicy, s, a_raw) -> np.ndarray | float:
    mean, log_std = policy_head(policy, s)
    out = gaussian_log_density(a_raw, mean, log_std)
    return float(out) if np.ndim(out) == 0 else out


def sample_action(
    policy: GaussianPolicy, s, rng: np.random.Generator | None, deterministic: bool = False
) -> tuple[np.ndarray, np.ndarray, float]:
    """Returns (clipped action, raw action, log-density of the raw action)."""
    mean, log_std = policy_head(policy, s)
    if deterministic:
        raw = mean.copy()
    else:
        raw = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return np.clip(raw, policy.act_low, policy.act_high), raw, float(gaussian_log_density(raw, mean, log_std))


def log_prob_grad(policy: GaussianPolicy, s, a_raw, weight) -> MlpParams:
    """Gradient of ``sum_i weight_i * log pi(a_i | s_i)`` w.r.t. the policy parameters."""
    s = np.atleast_2d(s)
    a_raw = np.atleast_2d(a_raw)
    w = np.asarray(weight, dtype=float).reshape(-1, 1)
    out = forward(policy.net, s)
    d = policy.act_dim
    mean, raw_ls = out[:, :d], out[:, d:]
    log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
    z = (a_raw - mean) * np.exp(-log_std)
    g_mean = z * np.exp(-log_std)
    g_ls = (z**2 - 1.0) * ((raw_ls >= LOG_STD_MIN) & (raw_ls <= LOG_STD_MAX))
    return backward(policy.net, s, np.concatenate([w * g_mean, w * g_ls], axis=1))


# ---------------------------------------------------------------- replay


class Transition(NamedTuple):
    s: np.ndarray
    a: np.ndarray  # pre-clip action
    s_next: np.ndarray
    r: float
    log_b: float
    done: bool


class ReplayBuffer:
    """Bounded FIFO of transitions stored in ring arrays."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros((capacity, act_dim))
        self.s_next = np.zeros((capacity, obs_dim))
        self.r = np.zeros(capacity)
        self.log_b = np.zeros(capacity)
        self.done = np.zeros(capacity)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition) -> None:
        if not (math.isfinite(tr.log_b) and math.isfinite(tr.r)):
            raise ValueError("transition reward and log_b must be finite")
        i = self.ptr
        self.s[i], self.a[i], self.s_next[i] = tr.s, tr.a, tr.s_next
        self.r[i], self.log_b[i], self.done[i] = tr.r, tr.log_b, float(tr.done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        start = self.ptr if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        return [self[i] for i in self._order()]

    def __getitem__(self, i) -> Transition:
        return Transition(self.s[i], self.a[i], self.s_next[i], float(self.r[i]), float(self.log_b[i]), bool(self.done[i]))

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=batch_size)


# ---------------------------------------------------------------- agent


@dataclass
class AgentConfig:
    mode: BonusMode = BonusMode.SCHEDULED
    hidden: tuple[int, ...] = (64, 64)
    n_heads: int = 10
    prior_scale: float = 1.0
    gamma: float = 0.99
    consensus: str = "median"
    bootstrap: str = "self"
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    kappa_lr: float | None = None  # defaults to 0.1 * actor_lr
    kappa_init: float = 1.0
    lam: float = 0.1
    eta_d: float = 0.5
    nu_d: float = 2.0
    eta_b: float = 0.5
    nu_b: float = 0.1
    buffer_capacity: int = 10_000
    batch_size: int = 64
    batches_per_episode: int = 16

    def __post_init__(self):
        self.mode = BonusMode.parse(self.mode)
        self.hidden = tuple(self.hidden)
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def dfs(self) -> DfsConfig:
        return DfsConfig(self.eta_d, self.nu_d, self.gamma)

    @property
    def bfs(self) -> BfsConfig:
        return BfsConfig(self.eta_b, self.nu_b)


@dataclass
class Agent:
    policy: GaussianPolicy
    critic: EnsembleCritic
    policy_opt: OptimizerState
    critic_opt: CriticOptimizer
    scheduler: SchedulerState
    buffer: ReplayBuffer
    config: AgentConfig


@dataclass
class EpisodeStats:
    episode_return: float = 0.0
    steps: int = 0
    zeta_mean: float = float("nan")
    rd_mean: float = float("nan")
    rb_mean: float = float("nan")
    kappa_d: float = 1.0
    kappa_b: float = 1.0
    actor_loss: float = float("nan")
    critic_loss: float = float("nan")
    skips: int = 0
    clamps: int = 0
    zetas: list[float] = field(default_factory=list, repr=False)


def make_agent(obs_dim: int, act_dim: int, low: float, high: float, config: AgentConfig, rng) -> Agent:
    policy = init_policy(obs_dim, act_dim, low, high, rng, config.hidden)
    critic = init_critic(
        obs_dim,
        rng,
        hidden=config.hidden,
        n_heads=config.n_heads,
        prior_scale=config.prior_scale,
        gamma=config.gamma,
        consensus=config.consensus,
        bootstrap=config.bootstrap,
    )
    kappa_lr = 0.1 * config.actor_lr if config.kappa_lr is None else config.kappa_lr
    return Agent(
        policy,
        critic,
        OptimizerState(lr=config.actor_lr),
        CriticOptimizer(OptimizerState(lr=config.critic_lr), OptimizerState(lr=config.critic_lr)),
        SchedulerState(config.kappa_init, config.kappa_init, kappa_lr),
        ReplayBuffer(config.buffer_capacity, obs_dim, act_dim),
        config,
    )


def rollout(agent: Agent, env: Env, rng: np.random.Generator, seed: int | None = None) -> EpisodeStats:
    """Run one stochastic episode and append its transitions to the buffer."""
    stats = EpisodeStats()
    s = env.reset(seed)
    done = False
    while not done:
        a, raw, log_b = sample_action(agent.policy, s, rng)
        s_next, r, done = env.step(a)
        agent.buffer.add(Transition(s, raw, s_next, r, log_b, done))
        stats.episode_return += r
        stats.steps += 1
        s = s_next
    return stats


class BatchResult(NamedTuple):
    actor_loss: float
    critic_loss: float
    skips: int
    clamps: int
    zetas: list
    r_d: list
    r_b: list


def composed_rewards(agent: Agent, idx: np.ndarray, heads_s, heads_n, log_pi) -> tuple[np.ndarray, BatchResult]:
    """Per-sample bonus-augmented rewards; advances the kappa scheduler in replay order."""
    cfg = agent.config
    buf = agent.buffer
    dfs, bfs = cfg.dfs, cfg.bfs
    sig_s = dispersion(heads_s, axis=-1)
    sig_n = dispersion(heads_n, axis=-1)
    rewards = np.empty(len(idx))
    zetas, rds, rbs = [], [], []
    clamps = 0
    state = agent.scheduler
    for j, i in enumerate(idx):
        sn, sc = float(sig_n[j]), float(sig_s[j])
        lp, lb = float(log_pi[j]), float(buf.log_b[i])
        if not (math.isfinite(sn) and math.isfinite(sc) and math.isfinite(lp)):
            rewards[j] = np.nan
            continue
        r_d = dfs_bonus(dfs, sn, sc)
        clamps += abs(bfs_exponent(bfs, lp, lb)) > EXP_CLAMP
        r_b = bfs_bonus(bfs, lp, lb)
        pi_d, b_d = sched.densities(lp, lb)
        if cfg.mode is BonusMode.SCHEDULED:
            state = sched.update_kappas(state, sn, sc, pi_d, b_d)
            z = state.last_zeta
        else:
            z = sched.zeta(state, sn, sc, pi_d, b_d)
        z_used, _ = sched.mode_gain(cfg.mode, z, cfg.lam)
        rewards[j] = sched.compose_reward(cfg.mode, float(buf.r[i]), r_d, r_b, z, cfg.lam)
        zetas.append(z_used)
        rds.append(r_d)
        rbs.append(r_b)
    agent.scheduler = state
    return rewards, BatchResult(np.nan, np.nan, 0, int(clamps), zetas, rds, rbs)


def replay_batch(agent: Agent, idx: np.ndarray, reward_override: np.ndarray | None = None) -> BatchResult:
    """One actor-critic update on the transitions at ``idx``.

    ``reward_override`` bypasses the bonus machinery and uses the given
    rewards verbatim (the scheduler is left untouched).
    """
    buf = agent.buffer
    s, a, s2 = buf.s[idx], buf.a[idx], buf.s_next[idx]
    done = buf.done[idx]
    n = len(idx)
    heads = value_heads(agent.critic, np.concatenate([s, s2]))
    heads_s, heads_n = heads[:n], heads[n:]
    mean, log_std = policy_head(agent.policy, s)
    log_pi = gaussian_log_density(a, mean, log_std)

    if reward_override is None:
        rewards, info = composed_rewards(agent, idx, heads_s, heads_n, log_pi)
    else:
        rewards = np.asarray(reward_override, dtype=float)
        info = BatchResult(np.nan, np.nan, 0, 0, [], [], [])

    td = td_errors(agent.critic, None, None, rewards, done, heads_s, heads_n)
    ok = np.isfinite(td.consensus) & np.all(np.isfinite(td.per_head), axis=1) & np.isfinite(log_pi)
    skips = int(n - ok.sum())
    if not ok.any():
        return info._replace(skips=skips)
    s_ok, a_ok, delta = s[ok], a[ok], td.consensus[ok]
    m = len(delta)

    agent.critic, agent.critic_opt, critic_loss, applied = critic_update(
        agent.critic, s_ok, td.per_head[ok], agent.critic_opt
    )
    skips += 0 if applied else m

    # ascent on mean(delta * log pi): descend on its negation
    grads = log_prob_grad(agent.policy, s_ok, a_ok, -delta / m)
    actor_loss = float(-np.mean(delta * log_pi[ok]))
    new, agent.policy_opt, applied = step_arrays(agent.policy.net.arrays(), grads.arrays(), agent.policy_opt)
    if applied:
        agent.policy = GaussianPolicy(agent.policy.net.with_arrays(new), agent.policy.act_low, agent.policy.act_high)
    else:
        skips += m
    return info._replace(actor_loss=actor_loss, critic_loss=critic_loss, skips=info.skips + skips)


def train_episode(agent: Agent, env: Env, rng: np.random.Generator, seed: int | None = None) -> EpisodeStats:
    """Roll out one episode, then replay ``batches_per_episode`` uniform minibatches."""
    stats = rollout(agent, env, rng, seed)
    cfg = agent.config
    a_losses, c_losses, rds, rbs = [], [], [], []
    if len(agent.buffer):
        for _ in range(cfg.batches_per_episode):
            idx = agent.buffer.sample_indices(cfg.batch_size, rng)
            res = replay_batch(agent, idx)
            stats.skips += res.skips
            stats.clamps += res.clamps
            stats.zetas.extend(res.zetas)
            rds.extend(res.r_d)
            rbs.extend(res.r_b)
            a_losses.append(res.actor_loss)
            c_losses.append(res.critic_loss)
    if rds:
        stats.rd_mean, stats.rb_mean = float(np.mean(rds)), float(np.mean(rbs))
    if stats.zetas:
        stats.zeta_mean = float(np.mean(stats.zetas))
    if np.isfinite(a_losses).any():
        stats.actor_loss = float(np.nanmean(a_losses))
        stats.critic_loss = float(np.nanmean(c_losses))
    stats.kappa_d, stats.kappa_b = agent.scheduler.kappa_d, agent.scheduler.kappa_b
    return stats


def evaluate(agent: Agent, env: Env, episodes: int, seed: int) -> list[float]:
    """Deterministic-policy returns over ``episodes`` resets seeded ``seed, seed+1, ...``."""
    returns = []
    for k in range(episodes):
        s = env.reset(seed + k)
        total, done = 0.0, False
        while not done:
            a, _, _ = sample_action(agent.policy, s, None, deterministic=True)
            s, r, done = env.step(a)
            total += r
        returns.append(total)
    return returns
