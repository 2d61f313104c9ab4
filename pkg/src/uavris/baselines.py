"""Non-learning reference policies for a single slot.

``brute_force_oracle`` enumerates a full Cartesian grid and is only usable on
tiny instances.  ``guided_search`` is the scalable reference used against the
learned agents: it fixes phases by coordinate ascent on the weakest user's SNR,
grid-searches powers, and takes the largest time-switching level that keeps every
user above the rate floor (efficiency never decreases in tau, rates always do).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .config import SystemConfig
from .env import Action, eh_params, evaluate_action, make_action
from .signal_model import cascaded_channels, harvested_power_nl, project_total_power

MAX_ORACLE_POINTS = 10**7
MAX_POWER_COMBOS = 2 * 10**6
MAX_PHASE_SWEEPS = 10


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SearchGrid:
    tau_levels: int = 21
    power_levels: int = 6
    phase_levels: int = 16

    def __post_init__(self):
        if min(self.tau_levels, self.power_levels, self.phase_levels) < 1:
            raise ValueError("grid level counts must be >= 1")

    def taus(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.tau_levels)

    def powers(self, cfg: SystemConfig) -> np.ndarray:
        return np.linspace(0.0, cfg.P_U_max, self.power_levels)

    def phases(self) -> np.ndarray:
        return np.arange(self.phase_levels) * (2 * np.pi / self.phase_levels)


def _unit_mrt(cascade: np.ndarray) -> np.ndarray:
    """Unit maximum-ratio directions for cascade rows ``(..., K, M)``."""
    directions = cascade.conj()
    norms = np.linalg.norm(directions, axis=-1, keepdims=True)
    zero = norms == 0
    directions = directions / np.where(zero, 1.0, norms)
    if zero.any():
        e1 = np.zeros(directions.shape[-1])
        e1[0] = 1.0
        directions = np.where(zero, e1, directions)
    return directions


def _slot_tables(real: ChannelRealization, phases) -> tuple[np.ndarray, np.ndarray]:
    """Per-user RF gain ``||G w_k||^2`` and cross gains ``A[k, u] = |h_k w_u|^2``."""
    cascade = cascaded_channels(real, phases)
    W = _unit_mrt(cascade)
    rf_gain = np.sum(np.abs(real.G @ W.T) ** 2, axis=0)
    cross = np.abs(cascade @ W.T) ** 2
    return rf_gain, cross


def _min_log_snr(cross: np.ndarray, combos: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    own = combos * np.diag(cross)
    if cfg.interference_cancellation:
        snr = own / cfg.noise_power
    else:
        off = cross - np.diag(np.diag(cross))
        snr = own / (combos @ off.T + cfg.noise_power)
    return np.log2(1.0 + snr).min(axis=1)


def _efficiency(taus: np.ndarray, eps_r: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    safe = np.where(eps_r > 0, eps_r, 1.0)
    eff = harvested_power_nl(taus * safe, eh_params(cfg)) / safe
    return np.where(eps_r > 0, eff, 0.0)


def grid_rewards(real: ChannelRealization, phases, combos: np.ndarray, taus: np.ndarray,
                 cfg: SystemConfig) -> np.ndarray:
    """QoS-gated efficiency for every (power combo, tau) pair, shape ``(P, T)``."""
    rf_gain, cross = _slot_tables(real, phases)
    eps_r = combos @ rf_gain
    lmin = _min_log_snr(cross, combos, cfg)
    ok = (1.0 - taus)[None, :] * cfg.bandwidth * lmin[:, None] >= cfg.R_min
    eff = _efficiency(taus[None, :], eps_r[:, None], cfg)
    return np.where(ok, eff, 0.0)


def power_combos(levels: np.ndarray, K: int, p_bs_max: float) -> np.ndarray:
    """All per-user level tuples (first user slowest), projected onto the power budget."""
    combos = np.array(list(itertools.product(levels, repeat=K)), dtype=float).reshape(-1, K)
    totals = combos.sum(axis=1)
    scale = np.where(totals > p_bs_max, p_bs_max / np.where(totals > 0, totals, 1.0), 1.0)
    return combos * scale[:, None]


def min_snr(real: ChannelRealization, phases, powers, cfg: SystemConfig) -> float:
    _, cross = _slot_tables(real, phases)
    return float(2.0 ** _min_log_snr(cross, np.asarray(powers)[None, :], cfg)[0] - 1.0)


def phase_coordinate_ascent(real: ChannelRealization, powers, cfg: SystemConfig,
                            levels: int = 16) -> np.ndarray:
    """Per-element ascent of the minimum user SNR over quantised phase levels.

    A move is accepted only if it strictly improves the objective, so the sweep
    loop terminates; at most ``MAX_PHASE_SWEEPS`` sweeps are made.
    """
    grid = np.arange(levels) * (2 * np.pi / levels)
    powers = np.asarray(powers, dtype=float)
    phases = np.zeros(real.G.shape[0])
    best = _objective(real, phases[None, :], powers, cfg)[0]
    for _ in range(MAX_PHASE_SWEEPS):
        improved = False
        for n in range(len(phases)):
            cand = np.repeat(phases[None, :], levels, axis=0)
            cand[:, n] = grid
            scores = _objective(real, cand, powers, cfg)
            j = int(np.argmax(scores))
            if scores[j] > best:
                best = scores[j]
                phases = cand[j]
                improved = True
        if not improved:
            break
    return phases


def _objective(real: ChannelRealization, phase_rows: np.ndarray, powers: np.ndarray,
               cfg: SystemConfig) -> np.ndarray:
    """Minimum user SNR for each row of candidate phases."""
    theta = np.exp(1j * phase_rows)                       # (L, N)
    cascade = np.einsum("kn,ln,nm->lkm", real.g_users.conj(), theta, real.G)
    W = _unit_mrt(cascade)
    cross = np.abs(np.einsum("lkm,lum->lku", cascade, W)) ** 2
    own = powers * np.einsum("lkk->lk", cross)
    if cfg.interference_cancellation:
        snr = own / cfg.noise_power
    else:
        K = cross.shape[1]
        off = cross * (1.0 - np.eye(K))
        snr = own / (np.einsum("lku,u->lk", off, powers) + cfg.noise_power)
    return snr.min(axis=1)


def brute_force_oracle(real: ChannelRealization, grid: SearchGrid,
                       cfg: SystemConfig) -> tuple[Action, float]:
    """Exact maximiser of the one-slot reward over the whole grid.

    Enumeration order is phases (outer), then power combos, then tau; the first
    maximum in that order wins.
    """
    N, K = real.G.shape[0], real.g_users.shape[0]
    count = grid.phase_levels**N * grid.power_levels**K * grid.tau_levels
    if count > MAX_ORACLE_POINTS:
        raise GridTooLarge(f"grid has {count} points, limit is {MAX_ORACLE_POINTS}")
    taus = grid.taus()
    combos = power_combos(grid.powers(cfg), K, cfg.P_BS_max)
    best_val, best = -np.inf, None
    for phase_tuple in itertools.product(grid.phases(), repeat=N):
        phases = np.array(phase_tuple)
        rewards = grid_rewards(real, phases, combos, taus, cfg)
        flat = int(np.argmax(rewards))
        if rewards.flat[flat] > best_val:
            best_val = float(rewards.flat[flat])
            p_idx, t_idx = divmod(flat, len(taus))
            best = (taus[t_idx], combos[p_idx], phases)
    tau, powers, phases = best
    return Action(float(tau), powers.copy(), phases), best_val


def _power_search(real, phases, grid: SearchGrid, cfg: SystemConfig):
    """Best (reward, combo, tau) with tau the largest rate-feasible grid level."""
    taus = grid.taus()
    levels = grid.powers(cfg)
    K = real.g_users.shape[0]
    if grid.power_levels**K <= MAX_POWER_COMBOS:
        return _score_combos(real, phases, power_combos(levels, K, cfg.P_BS_max), taus, cfg)
    # too many combos: per-user coordinate search from full power
    current = project_total_power(np.full(K, cfg.P_U_max), cfg.P_BS_max)
    best = _score_combos(real, phases, current[None, :], taus, cfg)
    for _ in range(5):
        changed = False
        for k in range(K):
            cands = np.repeat(current[None, :], len(levels), axis=0)
            cands[:, k] = levels
            cands = np.array([project_total_power(c, cfg.P_BS_max) for c in cands])
            res = _score_combos(real, phases, cands, taus, cfg)
            if res[0] > best[0]:
                best, current, changed = res, res[1], True
        if not changed:
            break
    return best


def _score_combos(real, phases, combos, taus, cfg):
    rf_gain, cross = _slot_tables(real, phases)
    eps_r = combos @ rf_gain
    lmin = _min_log_snr(cross, combos, cfg)
    ok = (1.0 - taus)[None, :] * cfg.bandwidth * lmin[:, None] >= cfg.R_min
    feasible = ok.any(axis=1)
    # rates fall with tau, so the feasible set is a prefix; take its last level
    last = len(taus) - 1 - np.argmax(ok[:, ::-1], axis=1)
    tau_sel = taus[last]
    eff = _efficiency(tau_sel, eps_r, cfg)
    rewards = np.where(feasible, eff, -np.inf)
    j = int(np.argmax(rewards))
    return float(rewards[j]), combos[j].copy(), float(tau_sel[j])


def guided_search(real: ChannelRealization, grid: SearchGrid,
                  cfg: SystemConfig) -> tuple[Action, float]:
    full = project_total_power(np.full(real.g_users.shape[0], cfg.P_U_max), cfg.P_BS_max)
    phases = phase_coordinate_ascent(real, full, cfg, grid.phase_levels)
    reward, powers, tau = _power_search(real, phases, grid, cfg)
    if not np.isfinite(reward):
        # nothing meets the rate floor: most rate-friendly action, zero reward
        action = Action(0.0, full, phases)
        return action, evaluate_action(real, action, cfg).reward
    return Action(tau, powers, phases), reward


def random_policy(real: ChannelRealization, cfg: SystemConfig,
                  rng: np.random.Generator) -> tuple[Action, float]:
    action = make_action(cfg, rng.uniform(0.0, 1.0), rng.uniform(0.0, cfg.P_U_max, cfg.K),
                         rng.uniform(0.0, 2 * np.pi, cfg.N))
    return action, evaluate_action(real, action, cfg).reward
