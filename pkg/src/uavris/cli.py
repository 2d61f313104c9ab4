"""Command line entry point: ``uavris train | sweep-jitter | compare | probe``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import logging
import sys
from functools import wraps
from pathlib import Path

import click

from . import harness
from .agents import ALGORITHMS
from .config import ConfigError, LoadedConfig, load_config

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _guarded(fn):
    """Map library exceptions onto the documented exit codes."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 3
            logging.getLogger(__name__).debug("run failed", exc_info=True)
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of numbers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _episodes(loaded: LoadedConfig, episodes: int | None) -> int:
    return loaded.experiment.episodes if episodes is None else episodes


config_arg = click.argument("config", type=click.Path(dir_okay=False, path_type=Path))
out_opt = click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True,
                       help="Output directory (created if missing).")
episodes_opt = click.option("--episodes", type=int, default=None,
                            help="Training episodes (default: from config, else 300).")
jobs_opt = click.option("--jobs", type=int, default=1, show_default=True,
                        help="Independent sub-runs to execute in parallel processes.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """UAV-mounted RIS energy-harvesting experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("train")
@config_arg
@click.option("--algo", type=click.Choice(ALGORITHMS), default="ssd3", show_default=True)
@episodes_opt
@click.option("--seed", type=int, default=0, show_default=True)
@out_opt
@_guarded
def train_cmd(config, algo, episodes, seed, out):
    """Train one agent and write manifest, metrics and checkpoint."""
    loaded = load_config(config)
    res = harness.run_training(loaded, algo, _episodes(loaded, episodes), seed, out)
    if res.cum_rewards:
        click.echo(f"{algo}: {len(res.cum_rewards)} episodes, "
                   f"last cumulative reward {res.cum_rewards[-1]:.4f}")
    else:
        click.echo(f"{algo}: 0 episodes")
    click.echo(f"wrote {out}")


@main.command("sweep-jitter")
@config_arg
@click.option("--algo", type=click.Choice(ALGORITHMS), default="ssd3", show_default=True)
@click.option("--sigmas", default="0,0.1,0.2", show_default=True, help="Jitter std list (rad).")
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@episodes_opt
@out_opt
@jobs_opt
@_guarded
def sweep_cmd(config, algo, sigmas, seeds, episodes, out, jobs):
    """Train across jitter levels and seeds; write reward curves."""
    loaded = load_config(config)
    res = harness.sweep_jitter(loaded, algo, _float_list(sigmas), _int_list(seeds),
                               _episodes(loaded, episodes), out, jobs)
    tail = max(1, len(next(iter(next(iter(res.curves.values())).values()), [])) // 10)
    for s in res.curves:
        curve = res.smoothed(s)
        final = float(curve[-tail:].mean()) if len(curve) else float("nan")
        click.echo(f"sigma_j={s:g}  final smoothed cumulative reward {final:.4f}")
    click.echo(f"wrote {out}")


@main.command("compare")
@config_arg
@click.option("--algos", default=",".join(ALGORITHMS[::-1]), show_default=True)
@click.option("--baselines", default="guided,random", show_default=True)
@click.option("--sigma", type=float, default=0.1, show_default=True)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@episodes_opt
@click.option("--eval-episodes", type=int, default=None,
              help="Held-out evaluation episodes (default: from config, else 5).")
@out_opt
@jobs_opt
@_guarded
def compare_cmd(config, algos, baselines, sigma, seeds, episodes, eval_episodes, out, jobs):
    """Train agents, then score agents and baselines on shared held-out slots."""
    loaded = load_config(config)
    res = harness.compare(loaded, _name_list(algos), _name_list(baselines), sigma,
                          _int_list(seeds), _episodes(loaded, episodes), out,
                          eval_episodes, jobs)
    click.echo(f"{'method':<8} {'mean_eh_eff':>12} {'std':>10} {'seeds':>6}")
    for row in res.summary():
        click.echo(f"{row['method']:<8} {row['mean_eh_eff']:>12.4f} {row['std']:>10.4f} "
                   f"{row['seeds']:>6d}")
    click.echo(f"wrote {out}")


@main.command("probe")
@config_arg
@click.option("--trials", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_guarded
def probe_cmd(config, trials, seed):
    """Echo the resolved configuration and estimate QoS feasibility."""
    loaded = load_config(config)
    cfg = loaded.system
    for key, value in cfg.to_dict().items():
        click.echo(f"{key} = {value}")
    # short parameter names alongside the field names above
    click.echo(f"N = {cfg.N}")
    click.echo(f"M = {cfg.M}")
    click.echo(f"c = {cfg.c_nl:g}")
    click.echo(f"d = {cfg.d_nl:g}")
    click.echo(f"beta0_linear = {cfg.beta0:g}")
    click.echo(f"state_dim = {cfg.state_dim}")
    click.echo(f"action_dim = {cfg.action_dim}")
    report = harness.probe(loaded, trials, seed)
    click.echo(f"qos_feasible_fraction = {report.fraction:.3f} ({report.feasible}/{report.trials})")


if __name__ == "__main__":
    main()
