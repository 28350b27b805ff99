"""Deterministic link physics: harvesting, transmit powers, SINRs and slot capacity.

Every function accepts scalars or numpy arrays and broadcasts.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


class Mode(enum.Enum):
    WPR = "WPR"
    ABR = "ABR"
    IDLE = "Idle"


@dataclass(frozen=True)
class SlotOutcome:
    harvested_energy: float
    mode: Mode
    sinr_relay: float
    sinr_dest_wpr: float
    snr_dest_abr: float
    success: bool
    capacity: float


# ---------------------------------------------------------------- auxiliary scalars

def kappa(v, cfg: SystemConfig):
    """d_SR^mu v / P_S (1/W)."""
    return cfg.d_sr ** cfg.pathloss_active * np.asarray(v, dtype=float) / cfg.source_power


def ell(v, p, cfg: SystemConfig):
    """d_RD^mu v (1-omega) / (2p) (1/W); equals d_RD^mu v / P_R^W for P_R^W = 2p/(1-omega)."""
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return cfg.d_rd ** cfg.pathloss_active * v * (1.0 - cfg.harvest_fraction) / (2.0 * p)


def delta(q, cfg: SystemConfig):
    """P[backscatter SNR > tau_A | Q_R = q]."""
    q = np.asarray(q, dtype=float)
    c = (cfg.d_rd ** cfg.pathloss_active * cfg.noise_ambient * cfg.tau_a
         / (cfg.reflection_fraction * cfg.backscatter_efficiency))
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(q > 0, np.exp(-c / np.where(q > 0, q, 1.0)), 0.0)


# ---------------------------------------------------------------- powers

def received_ambient_power(points, fading, cfg: SystemConfig):
    """Q_R = P~_T sum_k h_k |x_k|^-mu~ for a pattern of complex (or (n,2)) positions."""
    pts = np.asarray(points)
    if pts.size == 0:
        return 0.0
    if not np.iscomplexobj(pts):
        pts = pts[..., 0] + 1j * pts[..., 1]
    h = np.asarray(fading, dtype=float)
    if h.shape != pts.shape:
        raise ValueError("one fading gain per emitter required")
    if np.any(h < 0):
        raise ValueError("fading gains must be nonnegative")
    r = np.abs(pts)
    if np.any(r == 0):
        raise ValueError("emitter at the relay position")
    return float(cfg.emitter_power * np.sum(h * r ** (-cfg.pathloss_ambient)))


def harvest(q, cfg: SystemConfig):
    """E_R = omega T beta Q_R (uncapped)."""
    return cfg.harvest_fraction * cfg.slot_duration * cfg.conversion_efficiency * np.asarray(q, dtype=float)


def wpr_transmit_power(q, cfg: SystemConfig):
    """Active relay power: zero below the circuit threshold, linear, then capped by the capacitor."""
    q = np.asarray(q, dtype=float)
    w, b = cfg.harvest_fraction, cfg.conversion_efficiency
    usable = np.clip(w * b * q - cfg.rho_w, 0.0, cfg.rho_c)
    return 2.0 * usable / (1.0 - w)


def abr_transmit_power(q, cfg: SystemConfig):
    return cfg.reflection_fraction * cfg.backscatter_efficiency * np.asarray(q, dtype=float)


# ---------------------------------------------------------------- SINR / capacity

def sinr_values(h_sr, h_rd, h_rd_bs, interference_r, interference_d, q, cfg: SystemConfig):
    """(nu_R, nu_D^W, nu_D^A) given fading draws and aggregate interference at R and D.

    ``interference_r``/``interference_d`` are the sums P_T sum_j g_j |x_j - rx|^-mu.
    """
    mu = cfg.pathloss_active
    nu_r = cfg.source_power * np.asarray(h_sr) * cfg.d_sr ** -mu / (np.asarray(interference_r) + cfg.noise_active)
    p_w = wpr_transmit_power(q, cfg)
    nu_dw = p_w * np.asarray(h_rd) * cfg.d_rd ** -mu / (np.asarray(interference_d) + cfg.noise_active)
    nu_da = abr_transmit_power(q, cfg) * np.asarray(h_rd_bs) * cfg.d_rd ** -mu / cfg.noise_ambient
    return nu_r, nu_dw, nu_da


def interference(points, gains, rx: complex, cfg: SystemConfig):
    """Aggregate interference P_T sum_j g_j |x_j - rx|^-mu at receiver position ``rx``."""
    pts = np.asarray(points)
    if pts.size == 0:
        return 0.0
    d = np.abs(pts - rx)
    return float(cfg.interferer_power * np.sum(np.asarray(gains) * d ** (-cfg.pathloss_active)))


def end_to_end_capacity(nu_r, nu_dw, mode: Mode, cfg: SystemConfig, abr_success: bool = True):
    """Per-slot throughput (bit/s) including the (1-omega)/2 hop-time factor."""
    pre = (1.0 - cfg.harvest_fraction) / 2.0
    if mode is Mode.WPR:
        nu = np.minimum(nu_r, nu_dw)
        return np.where(nu >= cfg.tau_w, pre * cfg.bandwidth * np.log2(1.0 + nu), 0.0)
    if mode is Mode.ABR:
        return pre * cfg.backscatter_capacity if abr_success else 0.0
    return 0.0
