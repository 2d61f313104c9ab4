"""Slot-by-slot decision process over a UAV-mounted RIS deployment.

Positions stay fixed for the lifetime of an environment; jitter and small-scale
fading are redrawn every slot.  The reward of a slot is its EH efficiency when
every user meets the rate floor, and zero otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, realize_slot, ris_array
from .config import SystemConfig
from .geometry import ris_element_positions
from .signal_model import (
    EHParams,
    all_user_snrs,
    eh_efficiency,
    mrt_precoder,
    project_total_power,
    received_rf_power,
    user_rate,
)

log = logging.getLogger(__name__)


class EpisodeFinished(RuntimeError):
    """``step`` was called on a terminated episode."""


@dataclass(frozen=True)
class Action:
    tau: float
    powers: np.ndarray
    phases: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.tau], self.powers, self.phases])


@dataclass(frozen=True)
class SlotOutcome:
    reward: float
    eh_efficiency: float
    rates: np.ndarray
    qos: bool
    eps_r: float
    p_rf: float


@dataclass
class StepResult:
    reward: float
    next_state: np.ndarray
    done: bool
    info: dict = field(default_factory=dict)


def eh_params(cfg: SystemConfig) -> EHParams:
    return EHParams(cfg.P_sat, cfg.c_nl, cfg.d_nl)


def make_action(cfg: SystemConfig, tau, powers, phases) -> Action:
    """Clip to the box bounds and apply the total-power projection."""
    tau = float(np.clip(tau, 0.0, 1.0))
    powers = np.clip(np.asarray(powers, dtype=float), 0.0, cfg.P_U_max)
    powers = project_total_power(powers, cfg.P_BS_max)
    phases = np.clip(np.asarray(phases, dtype=float), 0.0, 2 * np.pi)
    return Action(tau, powers, phases)


def scale_action(raw, cfg: SystemConfig) -> Action:
    """Map a normalised action in [-1, 1]^(1+K+N) onto physical bounds."""
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    if raw.shape != (cfg.action_dim,):
        raise ValueError(f"raw action must have shape ({cfg.action_dim},), got {raw.shape}")
    u = (raw + 1.0) / 2.0
    K = cfg.K
    return make_action(cfg, u[0], u[1:1 + K] * cfg.P_U_max, (raw[1 + K:] + 1.0) * np.pi)


def unscale_action(action: Action, cfg: SystemConfig) -> np.ndarray:
    """Inverse of :func:`scale_action` (up to the power projection)."""
    p_max = cfg.P_U_max if cfg.P_U_max > 0 else 1.0
    return np.concatenate([
        [2.0 * action.tau - 1.0],
        2.0 * action.powers / p_max - 1.0,
        action.phases / np.pi - 1.0,
    ])


def evaluate_action(real: ChannelRealization, action: Action, cfg: SystemConfig) -> SlotOutcome:
    prec = mrt_precoder(real, action.phases, action.powers)
    eps_r = received_rf_power(real, prec)
    eff = eh_efficiency(action.tau, eps_r, eh_params(cfg))
    snrs = all_user_snrs(real, action.phases, prec, cfg.noise_power,
                         interference=not cfg.interference_cancellation)
    rates = user_rate(action.tau, cfg.bandwidth, snrs)
    qos = bool(np.all(rates >= cfg.R_min))
    reward = eff if qos else 0.0
    return SlotOutcome(reward, eff, rates, qos, eps_r, action.tau * eps_r)


def state_scale(cfg: SystemConfig) -> np.ndarray:
    """Fixed per-feature divisors that bring every state block to order one.

    Channel blocks are divided by their path-loss amplitude, coordinates by the
    deployment extent and the previous action by its upper bounds.
    """
    N, M, K = cfg.N, cfg.M, cfg.K
    d_g = np.linalg.norm(cfg.q_ris - cfg.q_bs)
    amp_g = np.sqrt(cfg.beta0 / d_g**2)
    d_h = np.linalg.norm(cfg.q_users - cfg.q_ris, axis=1)
    amp_h = np.sqrt(cfg.beta0 / np.maximum(d_h, 1e-9) ** cfg.ris_user_pl_exponent)
    extent = max(cfg.area, cfg.H_RIS, cfg.H_BS)
    return np.concatenate([
        np.full(2 * N * M, amp_g),
        np.tile(np.repeat(amp_h, N), 2),
        np.full(3 * N + 3 * K, extent),
        [1.0], np.full(K, cfg.P_U_max if cfg.P_U_max > 0 else 1.0), np.full(N, 2 * np.pi),
    ])


def encode_state(cfg: SystemConfig, real: ChannelRealization, element_pos: np.ndarray,
                 prev_action: np.ndarray) -> np.ndarray:
    return np.concatenate([
        real.G.real.ravel(), real.G.imag.ravel(),
        real.g_users.real.ravel(), real.g_users.imag.ravel(),
        element_pos.ravel(), cfg.q_users.ravel(), prev_action,
    ])


class UavRisEnv:
    """Episodic environment of ``cfg.T`` slots.

    The channel stream depends only on the seed, never on the actions taken, so
    different policies run from the same seed see identical realizations.
    """

    def __init__(self, cfg: SystemConfig, seed: int | None = None):
        self.cfg = cfg
        self.element_pos = ris_element_positions(cfg.q_ris, ris_array(cfg))
        self.state_dim = cfg.state_dim
        self.action_dim = cfg.action_dim
        self.state_scale = state_scale(cfg)
        self._rng = np.random.default_rng(seed)
        self.realization: ChannelRealization | None = None
        self.t = 0
        self.done = True

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.realization = realize_slot(self.cfg, self._rng)
        self.t = 0
        self.done = False
        return encode_state(self.cfg, self.realization, self.element_pos,
                            np.zeros(self.action_dim))

    def step(self, action: Action | np.ndarray) -> StepResult:
        if self.done:
            raise EpisodeFinished("episode is over; call reset()")
        if not isinstance(action, Action):
            action = scale_action(action, self.cfg)
        out = evaluate_action(self.realization, action, self.cfg)
        info = {
            "rates": out.rates,
            "eh_efficiency": out.eh_efficiency,
            "qos": out.qos,
            "eps_r": out.eps_r,
            "p_rf": out.p_rf,
            "action": action,
        }
        self.t += 1
        self.done = self.t >= self.cfg.T
        self.realization = realize_slot(self.cfg, self._rng)
        state = encode_state(self.cfg, self.realization, self.element_pos, action.to_vector())
        return StepResult(out.reward, state, self.done, info)


@dataclass(frozen=True)
class FeasibilityReport:
    trials: int
    feasible: int

    @property
    def fraction(self) -> float:
        return self.feasible / self.trials


def feasibility_probe(cfg: SystemConfig, trials: int, rng: np.random.Generator,
                      phase_levels: int = 16) -> FeasibilityReport:
    """Fraction of random slots where every user can reach the rate floor.

    Uses tau = 0, full per-user power and coordinate-ascent phases, which is the
    most rate-friendly configuration the action space offers.
    """
    from .baselines import phase_coordinate_ascent

    if trials < 1:
        raise ValueError("trials must be >= 1")
    powers = project_total_power(np.full(cfg.K, cfg.P_U_max), cfg.P_BS_max)
    hits = 0
    for _ in range(trials):
        real = realize_slot(cfg, rng)
        phases = phase_coordinate_ascent(real, powers, cfg, phase_levels)
        out = evaluate_action(real, Action(0.0, powers, phases), cfg)
        hits += out.qos
    report = FeasibilityReport(trials, hits)
    if report.fraction < 0.5:
        log.warning("QoS feasible in only %.1f%% of probed slots; training will see "
                    "mostly zero reward", 100 * report.fraction)
    return report
