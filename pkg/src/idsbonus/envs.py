"""Small deterministic control tasks with dense and sparse rewards.

All environments are seeded through ``reset(seed)`` and own their generator.
``noise`` adds Gaussian corruption to every emitted observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    id: str
    obs_dim: int
    act_dim: int
    act_low: float
    act_high: float
    horizon: int
    reward_kind: str
    noise: float = 0.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not (np.isfinite(self.act_low) and np.isfinite(self.act_high)):
            raise ValueError("action bounds must be finite")
        if self.noise < 0:
            raise ValueError("noise scale must be non-negative")


class Env:
    spec: EnvSpec

    def __init__(self, noise: float = 0.0):
        self.noise = noise
        self.t = 0
        self.rng = np.random.default_rng(0)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        self._reset_state()
        return self._observe()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        a = np.clip(np.asarray(action, dtype=float).reshape(self.spec.act_dim), self.spec.act_low, self.spec.act_high)
        reward, terminal = self._advance(a)
        self.t += 1
        return self._observe(), float(reward), bool(terminal or self.t >= self.spec.horizon)

    def _observe(self) -> np.ndarray:
        obs = self._clean_obs()
        if self.noise > 0:
            obs = obs + self.rng.normal(0.0, self.noise, size=obs.shape)
        return obs

    def _reset_state(self) -> None:
        raise NotImplementedError

    def _advance(self, a: np.ndarray) -> tuple[float, bool]:
        raise NotImplementedError

    def _clean_obs(self) -> np.ndarray:
        raise NotImplementedError


class NoisyChain(Env):
    """1-D position on [0, 1]; reward 1 whenever the agent sits beyond 0.9."""

    def __init__(self, noise: float = 0.0, step_noise: float = 0.0, horizon: int = 100):
        super().__init__(noise)
        self.step_noise = step_noise
        self.spec = EnvSpec("chain", 1, 1, -1.0, 1.0, horizon, "sparse", noise)
        self.x = 0.0

    def _reset_state(self):
        self.x = 0.0

    def _advance(self, a):
        xi = self.rng.normal(0.0, self.step_noise) if self.step_noise > 0 else 0.0
        self.x = float(np.clip(self.x + 0.05 * a[0] + xi, 0.0, 1.0))
        return (1.0 if self.x > 0.9 else 0.0), False

    def _clean_obs(self):
        return np.array([self.x])


class SparsePointMass(Env):
    """Unit point mass in the plane pushed by a bounded force, goal disc near (0.8, 0.8)."""

    dt = 0.05
    goal = np.array([0.8, 0.8])
    goal_radius = 0.1
    damping = 0.1

    def __init__(self, noise: float = 0.0, horizon: int = 150):
        super().__init__(noise)
        self.spec = EnvSpec("pointmass", 4, 2, -1.0, 1.0, horizon, "sparse", noise)
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)

    def _reset_state(self):
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)

    def _advance(self, a):
        self.vel = self.vel + self.dt * (a - self.damping * self.vel)
        self.pos = np.clip(self.pos + self.dt * self.vel, -1.0, 1.0)
        # walls absorb momentum
        self.vel = np.where(np.abs(self.pos) >= 1.0, 0.0, self.vel)
        inside = np.linalg.norm(self.pos - self.goal) < self.goal_radius
        return (1.0 if inside else 0.0), False

    def _clean_obs(self):
        return np.concatenate([self.pos, self.vel])


class Pendulum(Env):
    """Torque-limited pendulum starting straight down (theta = pi)."""

    g = 10.0
    m = 1.0
    l = 1.0
    dt = 0.05
    max_speed = 8.0

    def __init__(self, noise: float = 0.0, sparse: bool = False, horizon: int = 200):
        super().__init__(noise)
        self.sparse = sparse
        kind = "sparse" if sparse else "dense"
        self.spec = EnvSpec(f"pendulum-{kind}", 3, 1, -2.0, 2.0, horizon, kind, noise)
        self.theta = np.pi
        self.theta_dot = 0.0

    def _reset_state(self):
        self.theta = np.pi
        self.theta_dot = 0.0

    def _advance(self, a):
        # theta measured from upright; gravity pushes away from 0
        acc = self.g / self.l * np.sin(self.theta) + a[0] / (self.m * self.l**2)
        self.theta_dot = float(np.clip(self.theta_dot + self.dt * acc, -self.max_speed, self.max_speed))
        self.theta = float(self.theta + self.dt * self.theta_dot)
        c = np.cos(self.theta)
        if self.sparse:
            return (1.0 if c > 0.95 else 0.0), False
        return float(c), False

    def energy(self) -> float:
        return 0.5 * self.m * self.l**2 * self.theta_dot**2 + self.m * self.g * self.l * np.cos(self.theta)

    def _clean_obs(self):
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])


ENV_IDS = ("chain", "pointmass", "pendulum-dense", "pendulum-sparse")


def make_env(env_id: str, noise: float = 0.0) -> Env:
    if env_id == "chain":
        return NoisyChain(noise)
    if env_id == "pointmass":
        return SparsePointMass(noise)
    if env_id == "pendulum-dense":
        return Pendulum(noise, sparse=False)
    if env_id == "pendulum-sparse":
        return Pendulum(noise, sparse=True)
    raise ValueError(f"unknown environment {env_id!r}; choose from {ENV_IDS}")
