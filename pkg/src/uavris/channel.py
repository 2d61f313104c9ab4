"""BS-to-RIS (air-to-ground) and RIS-to-user (Rician) channel synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .geometry import (
    E_Z,
    JitterAngles,
    PlanarArray,
    bs_steering,
    recompute_angles,
    ris_steering,
    rotate,
    rotation_from_jitter,
    sample_jitter,
)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray            # (N, M) complex
    g_users: np.ndarray      # (K, N) complex, row k is g_H,k
    jitter: JitterAngles
    p_los: float


def bs_array(cfg: SystemConfig) -> PlanarArray:
    lam = cfg.wavelength
    return PlanarArray(cfg.M_y, cfg.M_z, cfg.spacing_bs * lam, cfg.spacing_bs * lam)


def ris_array(cfg: SystemConfig) -> PlanarArray:
    lam = cfg.wavelength
    return PlanarArray(cfg.N_x, cfg.N_y, cfg.spacing_ris * lam, cfg.spacing_ris * lam)


def los_probability(elevation_deg: float, a: float, b: float) -> float:
    """Logistic air-to-ground LoS probability; the elevation is in degrees."""
    return 1.0 / (1.0 + a * np.exp(-b * (elevation_deg - a)))


def bs_elevation_deg(cfg: SystemConfig) -> float:
    d_g = np.linalg.norm(cfg.q_ris - cfg.q_bs)
    return float(180.0 / np.pi * np.arcsin((cfg.H_RIS - cfg.H_BS) / d_g))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def bs_ris_channel(cfg: SystemConfig, jitter: JitterAngles,
                   rng: np.random.Generator) -> tuple[np.ndarray, float]:
    link = cfg.q_ris - cfg.q_bs
    d_g = float(np.linalg.norm(link))
    if d_g == 0:
        raise GeometryError("BS and RIS positions coincide")
    beta_g = cfg.beta0 / d_g**2
    p_los = float(los_probability(bs_elevation_deg(cfg), cfg.a, cfg.b))

    lam = cfg.wavelength
    # the BS is static; only the arrival side sees the UAV rotation
    departure = recompute_angles(link, E_Z)
    arrival = recompute_angles(rotate(rotation_from_jitter(jitter), link), E_Z)
    a_t = bs_steering(bs_array(cfg), departure, lam)
    a_r = ris_steering(ris_array(cfg), arrival, lam)
    h_los = np.exp(-2j * np.pi * d_g / lam) * np.outer(a_r, a_t.conj())
    h_nlos = complex_gaussian(rng, (cfg.N, cfg.M))
    G = np.sqrt(beta_g) * (np.sqrt(p_los) * h_los + np.sqrt(1.0 - p_los) * h_nlos)
    return G, p_los


def _rician_weights(k_factor: float) -> tuple[float, float]:
    if np.isinf(k_factor):
        return 1.0, 0.0
    return np.sqrt(k_factor / (1.0 + k_factor)), np.sqrt(1.0 / (1.0 + k_factor))


def ris_user_channel(cfg: SystemConfig, k: int, jitter: JitterAngles,
                     rng: np.random.Generator) -> np.ndarray:
    """Channel from the RIS to user ``k`` (0-based)."""
    if not 0 <= k < cfg.K:
        raise IndexError(f"user index {k} outside [0, {cfg.K})")
    link = cfg.q_users[k] - cfg.q_ris
    d_h = float(np.linalg.norm(link))
    if d_h == 0:
        raise GeometryError(f"user {k} coincides with the RIS")
    beta_h = cfg.beta0 / d_h**cfg.ris_user_pl_exponent
    lam = cfg.wavelength
    departure = recompute_angles(rotate(rotation_from_jitter(jitter), link), -E_Z)
    h_los = np.exp(-2j * np.pi * d_h / lam) * ris_steering(ris_array(cfg), departure, lam)
    w_los, w_nlos = _rician_weights(cfg.K_H)
    h_nlos = complex_gaussian(rng, cfg.N)
    return np.sqrt(beta_h) * (w_los * h_los + w_nlos * h_nlos)


def realize_slot(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """One time slot: a single jitter draw shared by every link, fresh fading."""
    jitter = sample_jitter(cfg.sigma_j, rng)
    G, p_los = bs_ris_channel(cfg, jitter, rng)
    g_users = np.stack([ris_user_channel(cfg, k, jitter, rng) for k in range(cfg.K)])
    return ChannelRealization(G, g_users, jitter, p_los)
