"""Link budget of one slot: precoding, RF power at the RIS, harvesting, SNR, rate.

Data symbols are unit-variance and independent, so every power below is the
analytic expectation over symbols; no symbols are ever sampled.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .channel import ChannelRealization


class EHParams(NamedTuple):
    P_sat: float
    c_nl: float
    d_nl: float


class Precoder(NamedTuple):
    V: np.ndarray         # (K, M) complex, row k is V_k
    powers: np.ndarray    # (K,)
    fallback: np.ndarray  # (K,) bool, True where the cascade was zero


def wrap_phases(phases) -> np.ndarray:
    return np.mod(np.asarray(phases, dtype=float), 2 * np.pi)


def project_total_power(powers, p_bs_max: float) -> np.ndarray:
    """Scale powers uniformly down so that their sum does not exceed ``p_bs_max``."""
    powers = np.asarray(powers, dtype=float)
    total = powers.sum()
    if total > p_bs_max:
        return powers * (p_bs_max / total)
    return powers


def cascaded_channels(real: ChannelRealization, phases) -> np.ndarray:
    """``(K, M)`` rows ``g_H,k^H Theta G``."""
    theta = np.exp(1j * np.asarray(phases, dtype=float))
    return (real.g_users.conj() * theta) @ real.G


def mrt_precoder(real: ChannelRealization, phases, powers) -> Precoder:
    powers = np.asarray(powers, dtype=float)
    if np.any(powers < 0):
        raise ValueError("powers must be non-negative")
    cascade = cascaded_channels(real, phases)
    directions = cascade.conj()
    norms = np.linalg.norm(directions, axis=1)
    fallback = norms == 0
    safe = np.where(fallback, 1.0, norms)
    directions = directions / safe[:, None]
    directions[fallback] = 0.0
    directions[fallback, 0] = 1.0
    V = np.sqrt(powers)[:, None] * directions
    return Precoder(V, powers, fallback)


def received_rf_power(real: ChannelRealization, prec: Precoder) -> float:
    """Total incident RF power summed over RIS elements, ``sum_k ||G V_k||^2``."""
    return float(np.sum(np.abs(real.G @ prec.V.T) ** 2))


def received_rf_power_elementwise(real: ChannelRealization, prec: Precoder) -> float:
    total = 0.0
    for g_row in real.G:
        for v in prec.V:
            total += abs(np.dot(g_row, v)) ** 2
    return total


def rf_input_power(tau: float, eps_r: float) -> float:
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return tau * eps_r


def harvested_power_nl(p_rf, eh: EHParams):
    """Normalised logistic harvester: 0 at zero input, saturating at ``P_sat``."""
    p_rf = np.asarray(p_rf, dtype=float)
    offset = expit(-eh.c_nl * eh.d_nl)  # Delta
    omega = expit(eh.c_nl * (p_rf - eh.d_nl))
    out = eh.P_sat * (omega - offset) / expit(eh.c_nl * eh.d_nl)
    return out if out.ndim else float(out)


def eh_efficiency(tau: float, eps_r: float, eh: EHParams) -> float:
    if eps_r <= 0:
        return 0.0
    return harvested_power_nl(rf_input_power(tau, eps_r), eh) / eps_r


def user_snr(real: ChannelRealization, phases, prec: Precoder, k: int,
             noise: float, interference: bool = True) -> float:
    gains = np.abs(cascaded_channels(real, phases)[k] @ prec.V.T) ** 2
    if not interference:
        return float(gains[k] / noise)
    others = np.delete(gains, k).sum()
    return float(gains[k] / (others + noise))


def all_user_snrs(real: ChannelRealization, phases, prec: Precoder,
                  noise: float, interference: bool = True) -> np.ndarray:
    gains = np.abs(cascaded_channels(real, phases) @ prec.V.T) ** 2  # [k, u]
    own = np.diag(gains).copy()
    if not interference:
        return own / noise
    np.fill_diagonal(gains, 0.0)
    return own / (gains.sum(axis=1) + noise)


def user_rate(tau: float, bandwidth: float, gamma_k):
    return (1.0 - tau) * bandwidth * np.log2(1.0 + np.asarray(gamma_k, dtype=float))
