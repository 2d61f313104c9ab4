"""Experiment orchestration: training runs, jitter sweeps and method comparisons.

Every run directory gets a ``manifest.json`` holding the resolved configuration
and seed; feeding that manifest back as the config reproduces the metrics files
byte for byte.  Metrics are JSON lines, tables are CSV.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .agents import ALGORITHMS, Agent, train
from .baselines import SearchGrid, guided_search, random_policy
from .channel import realize_slot
from .config import ConfigError, LoadedConfig
from .env import FeasibilityReport, UavRisEnv, feasibility_probe
from .neural import save_checkpoint

log = logging.getLogger(__name__)

BASELINES = ("guided", "random")
# held-out evaluation episodes use seeds far away from the training ones
EVAL_SEED_BASE = 1_000_000


def manifest_dict(loaded: LoadedConfig, **extra) -> dict:
    return {
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "system": loaded.system.to_dict(),
        "hyper": loaded.hyper.to_dict(),
        "experiment": asdict(loaded.experiment),
        **extra,
    }


def write_manifest(out: Path, loaded: LoadedConfig, **extra) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest_dict(loaded, **extra), indent=2, sort_keys=True) + "\n")
    return path


def with_sigma(loaded: LoadedConfig, sigma_j: float) -> LoadedConfig:
    return LoadedConfig(loaded.system.replace(sigma_j=sigma_j), loaded.hyper,
                        loaded.experiment, loaded.source)


def moving_average(values, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` entries (shorter at the start)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def eval_seeds(n: int) -> list[int]:
    return [EVAL_SEED_BASE + i for i in range(n)]


def _run_parallel(fn, tasks: list[tuple], jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*tasks)))


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    algorithm: str
    seed: int
    sigma_j: float
    cum_rewards: list[float]
    agent: Agent | None = None


def run_training(loaded: LoadedConfig, algorithm: str, episodes: int, seed: int,
                 out: Path | None = None) -> TrainResult:
    """Train one agent; with ``out`` set, write manifest, metrics and checkpoint."""
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if episodes < 0:
        raise ConfigError("episodes must be >= 0")
    env = UavRisEnv(loaded.system)
    if out is None:
        log_ = train(env, algorithm, loaded.hyper, episodes, seed)
    else:
        out = Path(out)
        write_manifest(out, loaded, algorithm=algorithm, seed=seed, episodes=episodes)
        with open(out / "train_metrics.jsonl", "w") as fh:
            def emit(rec: dict) -> None:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

            log_ = train(env, algorithm, loaded.hyper, episodes, seed, on_episode=emit)
        save_checkpoint(out / "checkpoint.npz", log_.agent.networks(),
                        {"algorithm": algorithm, "seed": seed, "episodes": episodes,
                         "state_scale": env.state_scale.tolist()})
    log.info("%s seed %d sigma_j %g: %d episodes", algorithm, seed, loaded.system.sigma_j,
             episodes)
    return TrainResult(algorithm, seed, loaded.system.sigma_j,
                       [e["cum_reward"] for e in log_.episodes], log_.agent)


# ---------------------------------------------------------------------------
# held-out evaluation

def evaluate_agent(agent: Agent, loaded: LoadedConfig, seeds: list[int]) -> np.ndarray:
    """Greedy per-step rewards, shape ``(len(seeds), T)``."""
    env = UavRisEnv(loaded.system)
    out = np.zeros((len(seeds), loaded.system.T))
    for i, s in enumerate(seeds):
        state = env.reset(seed=s) / env.state_scale
        for t in range(loaded.system.T):
            res = env.step(agent.act(state, False, None))
            out[i, t] = res.reward
            state = res.next_state / env.state_scale
    return out


def evaluate_baseline(method: str, loaded: LoadedConfig, seeds: list[int]) -> np.ndarray:
    """Per-step rewards of a search/random baseline on the same held-out slots.

    The channel stream of an environment does not depend on the actions, so
    drawing ``T`` slots from ``default_rng(seed)`` replays exactly the slots the
    agents saw.
    """
    cfg, exp = loaded.system, loaded.experiment
    grid = SearchGrid(exp.search_tau_levels, exp.search_power_levels, exp.search_phase_levels)
    out = np.zeros((len(seeds), cfg.T))
    for i, s in enumerate(seeds):
        slot_rng = np.random.default_rng(s)
        act_rng = np.random.default_rng([s, 1])
        for t in range(cfg.T):
            real = realize_slot(cfg, slot_rng)
            if method == "guided":
                out[i, t] = guided_search(real, grid, cfg)[1]
            elif method == "random":
                out[i, t] = random_policy(real, cfg, act_rng)[1]
            else:
                raise ConfigError(f"unknown baseline {method!r}; choose from {BASELINES}")
    return out


def _train_and_evaluate(loaded: LoadedConfig, algorithm: str, episodes: int, seed: int,
                        out: Path, seeds: list[int]) -> tuple[TrainResult, np.ndarray]:
    res = run_training(loaded, algorithm, episodes, seed, out)
    traces = evaluate_agent(res.agent, loaded, seeds)
    res.agent = None  # keep results picklable and light
    return res, traces


@dataclass
class CompareResult:
    eval_seeds: list[int]
    # method -> per-training-seed mean (agents) or per-episode means (baselines)
    per_seed: dict[str, np.ndarray] = field(default_factory=dict)
    # method -> (episodes, T) per-step rewards, agents averaged over training seeds
    traces: dict[str, np.ndarray] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    # algorithm -> seed -> training cumulative reward per episode
    curves: dict[str, dict[int, list[float]]] = field(default_factory=dict)

    def summary(self) -> list[dict]:
        rows = []
        for method, traces in self.traces.items():
            vals = self.per_seed[method]
            rows.append({"method": method, "mean_eh_eff": float(traces.mean()),
                         "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                         "seeds": len(vals)})
        return rows


def compare(loaded: LoadedConfig, algos: list[str], baselines: list[str], sigma_j: float,
            seeds: list[int], episodes: int, out: Path | None = None,
            n_eval: int | None = None, jobs: int = 1) -> CompareResult:
    """Train each algorithm per seed, then score everyone on shared held-out slots."""
    for a in algos:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
    for b in baselines:
        if b not in BASELINES:
            raise ConfigError(f"unknown baseline {b!r}; choose from {BASELINES}")
    loaded = with_sigma(loaded, sigma_j)
    ev = eval_seeds(n_eval if n_eval is not None else loaded.experiment.eval_seeds)
    result = CompareResult(ev, seeds=list(seeds))
    if out is not None:
        out = Path(out)
        write_manifest(out, loaded, command="compare", algos=algos, baselines=baselines,
                       seeds=list(seeds), episodes=episodes, eval_seeds=ev)
    tasks = [(loaded, a, episodes, s, None if out is None else out / a / f"seed_{s}", ev)
             for a in algos for s in seeds]
    done = _run_parallel(_train_and_evaluate, tasks, jobs)
    for res, _ in done:
        result.curves.setdefault(res.algorithm, {})[res.seed] = res.cum_rewards
    for a in algos:
        runs = [tr for (res, tr) in done if res.algorithm == a]
        result.per_seed[a] = np.array([tr.mean() for tr in runs])
        result.traces[a] = np.mean(runs, axis=0)
    for b in baselines:
        tr = evaluate_baseline(b, loaded, ev)
        result.per_seed[b] = tr.mean(axis=1)
        result.traces[b] = tr
    if out is not None:
        _write_compare_outputs(out, result)
    return result


def _write_compare_outputs(out: Path, result: CompareResult) -> None:
    with open(out / "eval_steps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "slot", "step", "eh_efficiency"])
        for method, traces in result.traces.items():
            for i, slot in enumerate(result.eval_seeds):
                for t, v in enumerate(traces[i]):
                    w.writerow([method, slot, t, repr(float(v))])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["method", "mean_eh_eff", "std", "seeds"])
        w.writeheader()
        w.writerows(result.summary())
    with open(out / "per_seed.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seed", "mean_eh_eff"])
        for method, vals in result.per_seed.items():
            labels = result.seeds if method in ALGORITHMS else result.eval_seeds
            for s, v in zip(labels, vals):
                w.writerow([method, s, repr(float(v))])


# ---------------------------------------------------------------------------
# jitter sweep

@dataclass
class SweepResult:
    window: int
    # sigma_j -> seed -> per-episode cumulative rewards
    curves: dict[float, dict[int, list[float]]] = field(default_factory=dict)

    def smoothed(self, sigma_j: float) -> np.ndarray:
        """Seed-averaged smoothed curve for one jitter level."""
        runs = self.curves[sigma_j]
        return np.mean([moving_average(c, self.window) for c in runs.values()], axis=0)


def _sweep_task(loaded: LoadedConfig, algorithm: str, episodes: int, seed: int,
                out: Path | None) -> TrainResult:
    res = run_training(loaded, algorithm, episodes, seed, out)
    res.agent = None
    return res


def sweep_jitter(loaded: LoadedConfig, algorithm: str, sigmas: list[float], seeds: list[int],
                 episodes: int, out: Path | None = None, jobs: int = 1) -> SweepResult:
    window = loaded.experiment.smoothing_window
    if out is not None:
        out = Path(out)
        write_manifest(out, loaded, command="sweep-jitter", algorithm=algorithm,
                       sigmas=list(sigmas), seeds=list(seeds), episodes=episodes)
    tasks = [(with_sigma(loaded, s), algorithm, episodes, seed,
              None if out is None else out / f"sigma_{s:g}" / f"seed_{seed}")
             for s in sigmas for seed in seeds]
    result = SweepResult(window)
    for res in _run_parallel(_sweep_task, tasks, jobs):
        result.curves.setdefault(res.sigma_j, {})[res.seed] = res.cum_rewards
    if out is not None:
        _write_curves(out / "reward_curves.csv", result, sigmas)
        for s in sigmas:
            _write_curves(out / f"sigma_{s:g}" / "reward_curves.csv", result, [s])
    return result


def _write_curves(path: Path, result: SweepResult, sigmas) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# smoothed = trailing moving average, window = {result.window}\n")
        w = csv.writer(fh)
        w.writerow(["sigma_j", "seed", "episode", "cum_reward", "smoothed"])
        for s in sigmas:
            for seed, curve in result.curves[s].items():
                for ep, (c, m) in enumerate(zip(curve, moving_average(curve, result.window))):
                    w.writerow([f"{s:g}", seed, ep, repr(float(c)), repr(float(m))])


def probe(loaded: LoadedConfig, trials: int, seed: int = 0) -> FeasibilityReport:
    return feasibility_probe(loaded.system, trials, np.random.default_rng(seed),
                             loaded.experiment.search_phase_levels)
