"""Multi-seed experiment runner, CSV/JSON logging, summaries and plots.

Output layout for ``run``::

    <out>/<mode>/<seed>.csv        one row per training episode
    <out>/<mode>/<seed>.eval.csv   one row per deterministic evaluation episode
    <out>/<mode>/summary.json      derived from the CSVs above
    <out>/plots/returns.svg        median-across-seeds learning curves
    <out>/plots/zeta.svg           median-across-seeds zeta traces
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .agent import AgentConfig, make_agent, train_episode, evaluate
from .envs import ENV_IDS, make_env
from .scheduler import BonusMode
from .plots import line_chart

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "seed",
    "episode",
    "return",
    "zeta_mean",
    "rd_mean",
    "rb_mean",
    "kappa_d",
    "kappa_b",
    "actor_loss",
    "critic_loss",
    "skips",
)
EVAL_HEADER = ("seed", "run", "return")

DEFAULT_EPISODES = {"chain": 300, "pointmass": 300, "pendulum-dense": 200, "pendulum-sparse": 300}
ALL_MODES = tuple(m.value for m in BonusMode)


@dataclass
class RunConfig:
    env: str = "chain"
    modes: list[str] = field(default_factory=lambda: ["scheduled"])
    seeds: list[int] = field(default_factory=lambda: [0])
    episodes: int | None = None
    eval_episodes: int = 100
    noise: float = 1e-3
    out: str = "runs"
    workers: int = 1
    label: str | None = None
    agent: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.env not in ENV_IDS:
            raise ValueError(f"unknown environment {self.env!r}; choose from {ENV_IDS}")
        if isinstance(self.modes, str):
            self.modes = [self.modes]
        self.modes = [BonusMode.parse(m).value for m in self.modes]
        if not self.modes:
            raise ValueError("at least one mode is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.episodes is None:
            self.episodes = DEFAULT_EPISODES[self.env]
        if self.episodes < 1:
            raise ValueError("episodes must be at least 1")
        if self.eval_episodes < 0:
            raise ValueError("eval_episodes must be non-negative")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        known = {f.name for f in fields(AgentConfig)}
        unknown = set(self.agent) - known
        if unknown:
            raise ValueError(f"unknown agent settings: {sorted(unknown)}")
        AgentConfig(**self.agent)  # validate eagerly

    def agent_config(self, mode: str) -> AgentConfig:
        return AgentConfig(**{**self.agent, "mode": mode})

    @classmethod
    def from_json(cls, path: str | os.PathLike, **overrides) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


def run_seed(config: RunConfig, mode: str, seed: int) -> dict:
    """Train and evaluate one seed; writes its CSVs and returns a status record."""
    mode_dir = Path(config.out) / mode
    mode_dir.mkdir(parents=True, exist_ok=True)
    ss = np.random.SeedSequence(seed)
    agent_seq, env_seq, eval_seq = ss.spawn(3)
    rng = np.random.default_rng(agent_seq)
    env = make_env(config.env, config.noise)
    agent = make_agent(
        env.spec.obs_dim, env.spec.act_dim, env.spec.act_low, env.spec.act_high, config.agent_config(mode), rng
    )
    env_seed = int(env_seq.generate_state(1)[0])
    eval_seed = int(eval_seq.generate_state(1)[0])
    status, message = "ok", ""
    rows = []
    evals: list[float] = []
    try:
        for ep in range(config.episodes):
            st = train_episode(agent, env, rng, seed=env_seed if ep == 0 else None)
            rows.append(
                (seed, ep, st.episode_return, st.zeta_mean, st.rd_mean, st.rb_mean, st.kappa_d, st.kappa_b,
                 st.actor_loss, st.critic_loss, st.skips)
            )
        evals = evaluate(agent, make_env(config.env, config.noise), config.eval_episodes, eval_seed % 2**31)
    except (ArithmeticError, ValueError) as exc:
        status, message = "failed", f"{type(exc).__name__}: {exc}"
        logger.error("seed %s (%s) failed: %s", seed, mode, message)

    with open(mode_dir / f"{seed}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows([[_cell(v) for v in row] for row in rows])
    if status == "ok":
        with open(mode_dir / f"{seed}.eval.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EVAL_HEADER)
            w.writerows([[str(seed), str(k), _cell(r)] for k, r in enumerate(evals)])
    return {"seed": seed, "status": status, "message": message}


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(s: str) -> float:
    return float(s) if s != "" else float("nan")


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def summarize_mode_dir(mode_dir: Path, meta: dict, statuses: dict[int, dict]) -> dict:
    """Build the per-mode summary purely from the CSV files in ``mode_dir``."""
    seeds = []
    pooled: list[float] = []
    for seed in sorted(statuses):
        st = statuses[seed]
        train = _read_csv(mode_dir / f"{seed}.csv")
        returns = [_num(r["return"]) for r in train]
        rec = {"seed": seed, "status": st["status"], "episodes": len(train)}
        if st["message"]:
            rec["message"] = st["message"]
        eval_path = mode_dir / f"{seed}.eval.csv"
        if st["status"] == "ok" and eval_path.exists():
            ev = [_num(r["return"]) for r in _read_csv(eval_path)]
            pooled.extend(ev)
            rec["eval_mean"], rec["eval_sd"] = _mean_sd(ev)
        tail = returns[-max(1, len(returns) // 10):] if returns else []
        rec["final_train_return"] = float(np.mean(tail)) if tail else None
        seeds.append(rec)
    mean, sd = _mean_sd(pooled)
    return {
        **meta,
        "eval_mean": mean,
        "eval_sd": sd,
        "n_eval": len(pooled),
        "n_failed": sum(s["status"] != "ok" for s in seeds),
        "seeds": seeds,
    }


def _median_curves(mode_dir: Path, seeds: Iterable[int], column: str) -> list[float]:
    curves = []
    for seed in seeds:
        path = mode_dir / f"{seed}.csv"
        if path.exists():
            curves.append([_num(r[column]) for r in _read_csv(path)])
    if not curves:
        return []
    n = max(len(c) for c in curves)
    out = []
    for i in range(n):
        vals = [c[i] for c in curves if i < len(c) and math.isfinite(c[i])]
        out.append(float(np.median(vals)) if vals else float("nan"))
    return out


def write_plots(out: Path, modes: Iterable[str], seeds: list[int], env: str) -> list[Path]:
    plot_dir = out / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for column, name, ylabel in (("return", "returns", "task return"), ("zeta_mean", "zeta", "zeta")):
        series = {m: _median_curves(out / m, seeds, column) for m in modes}
        path = plot_dir / f"{name}.svg"
        path.write_text(line_chart(series, f"{env}: median {ylabel} across {len(seeds)} seeds", ylabel=ylabel))
        written.append(path)
    return written


def _label(config: RunConfig, mode: str) -> str:
    if config.label is None:
        return mode
    return config.label if len(config.modes) == 1 else f"{config.label}-{mode}"


def _run_job(args):
    config, mode, seed = args
    return mode, run_seed(config, mode, seed)


def run(config: RunConfig) -> dict:
    """Execute every (mode, seed) pair; returns per-mode summaries."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(config, m, s) for m in config.modes for s in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    summaries = {}
    for mode in config.modes:
        statuses = {r["seed"]: r for m, r in results if m == mode}
        meta = {
            "env": config.env,
            "mode": mode,
            "label": _label(config, mode),
            "episodes": config.episodes,
            "eval_episodes": config.eval_episodes,
            "noise": config.noise,
            "agent": {k: (v.value if isinstance(v, BonusMode) else v) for k, v in asdict(config.agent_config(mode)).items()},
        }
        summary = summarize_mode_dir(out / mode, meta, statuses)
        (out / mode / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        summaries[mode] = summary
    write_plots(out, config.modes, config.seeds, config.env)
    return summaries


# ---------------------------------------------------------------- comparison


def rank_conditions(entries: list[dict]) -> list[dict]:
    """Rank by mean (higher first), ties broken by lower SD; absent entries get no rank."""
    present = [e for e in entries if e.get("eval_mean") is not None]
    present.sort(key=lambda e: (-e["eval_mean"], e["eval_sd"] if e["eval_sd"] is not None else math.inf))
    ranked = []
    for i, e in enumerate(present):
        ranked.append({**e, "rank": i + 1})
    ranked.extend({**e, "rank": None} for e in entries if e.get("eval_mean") is None)
    return ranked


def summarize(run_dirs: Iterable[str | os.PathLike], expected: Iterable[str] = ()) -> dict:
    """Collect every ``summary.json`` below ``run_dirs`` into a per-environment ranking."""
    by_env: dict[str, dict[str, dict]] = {}
    for d in run_dirs:
        for path in sorted(Path(d).rglob("summary.json")):
            s = json.loads(path.read_text())
            if "env" not in s or "eval_mean" not in s:
                continue
            by_env.setdefault(s["env"], {})[s.get("label", s["mode"])] = {
                "condition": s.get("label", s["mode"]),
                "eval_mean": s["eval_mean"],
                "eval_sd": s["eval_sd"],
                "path": str(path.parent),
            }
    table = {}
    for env, conds in sorted(by_env.items()):
        for name in expected:
            conds.setdefault(name, {"condition": name, "eval_mean": None, "eval_sd": None, "absent": True})
        table[env] = rank_conditions(list(conds.values()))
    return table


def format_table(table: dict) -> str:
    lines = []
    for env, rows in table.items():
        lines.append(f"{env}")
        for r in rows:
            if r["eval_mean"] is None:
                lines.append(f"  {r['condition']:<24} absent")
            else:
                lines.append(f"  {r['condition']:<24} {r['eval_mean']:10.3f} (+-{r['eval_sd']:.3f})  rank {r['rank']}")
    return "\n".join(lines) + "\n"


def consensus_study(
    env: str = "pendulum-dense",
    seeds: list[int] | None = None,
    episodes: int | None = None,
    eval_episodes: int = 100,
    noise: float = 1e-3,
    out: str = "runs/consensus",
    workers: int = 1,
    agent: dict | None = None,
) -> dict:
    """Median vs mean consensus for a bonus-free ensemble critic (K=10, beta=1)."""
    seeds = list(range(8)) if seeds is None else seeds
    base = {"n_heads": 10, "prior_scale": 1.0, **(agent or {})}
    results = {}
    for consensus in ("median", "mean"):
        cfg = RunConfig(
            env=env,
            modes=["vanilla"],
            seeds=seeds,
            episodes=episodes,
            eval_episodes=eval_episodes,
            noise=noise,
            out=str(Path(out) / consensus),
            workers=workers,
            label=f"{consensus}-consensus",
            agent={**base, "consensus": consensus},
        )
        results[consensus] = run(cfg)["vanilla"]
    report = {
        "env": env,
        "seeds": seeds,
        "median": {"eval_mean": results["median"]["eval_mean"], "eval_sd": results["median"]["eval_sd"]},
        "mean": {"eval_mean": results["mean"]["eval_mean"], "eval_sd": results["mean"]["eval_sd"]},
    }
    m, a = report["median"]["eval_mean"], report["mean"]["eval_mean"]
    report["median_at_least_mean"] = None if m is None or a is None else bool(m >= a)
    Path(out).mkdir(parents=True, exist_ok=True)
    (Path(out) / "consensus_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (Path(out) / "consensus_report.txt").write_text(format_table(summarize([out])))
    return report
