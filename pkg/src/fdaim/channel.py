"""Rayleigh MIMO channel and per-offset branch output synthesis.

The receiver bank produces one N_R x K matrix per frequency offset (a
"branch"); the N active antennas each light up the branch of their realigned
offset.  The composite chip matrix is the superposition seen before offset
separation and is what the exhaustive ML detector operates on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, SystemConfig
from .mapping import TxMessage
from .spreading import CodePool

NOISE_SPLITS = ("branch_n0_over_m", "branch_n0")


@dataclass(frozen=True)
class ChannelState:
    """N_R x (N_T*M) coefficients; column (m-1)N_T + n serves offset m,
    antenna n.  Steering phases are folded in at sampling time when
    phase_mode is explicit, so downstream code never sees them."""

    h: np.ndarray
    phase_mode: str

    def link(self, offset: int, antenna: int, n_t: int) -> np.ndarray:
        """Coefficient column for 1-based (offset, antenna)."""
        return self.h[:, (offset - 1) * n_t + (antenna - 1)]


def steering_phases(config: SystemConfig) -> np.ndarray:
    """Unit-modulus factors e^{-j2pi (f0+df_m) tau_{n,nr}} per (row, column)."""
    n_t, m_off, n_r = config.n_t, config.m_offsets, config.n_r
    ant = np.arange(1, n_t + 1)
    rx = np.arange(1, n_r + 1)
    # tau[(n, nr)] = (R + n d sin(theta) + nr d sin(theta)) / c
    dsin = config.d_spacing * math.sin(config.theta_rad)
    tau = (config.range_m + ant[None, :] * dsin + rx[:, None] * dsin) / SPEED_OF_LIGHT
    phases = np.empty((n_r, n_t * m_off), dtype=complex)
    for m in range(1, m_off + 1):
        f = config.f0 + config.offset_hz(m)
        phases[:, (m - 1) * n_t:m * n_t] = np.exp(-2j * math.pi * f * tau)
    return phases


def sample_channel(config: SystemConfig, rng: np.random.Generator) -> ChannelState:
    """I.I.D. CN(0, sigma2) coefficients, one column per (offset, antenna)."""
    shape = (config.n_r, config.n_t * config.m_offsets)
    scale = math.sqrt(config.sigma2 / 2.0)
    h = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if config.phase_mode == "explicit":
        h = h * steering_phases(config)
    return ChannelState(h=h, phase_mode=config.phase_mode)


@dataclass(frozen=True)
class BranchOutputs:
    branches: np.ndarray            # (M, N_R, K) complex
    noise_var_per_branch: float     # per complex entry


@dataclass(frozen=True)
class CompositeOutput:
    y: np.ndarray                   # (N_R, K) complex
    noise_var: float                # per complex entry


def _slot_signal(g: np.ndarray, x: complex, c_i: np.ndarray, c_q: np.ndarray,
                 amp: float, rail_coupling: str) -> np.ndarray:
    """Noise-free N_R x K contribution of one active antenna."""
    if rail_coupling == "separated":
        return amp * (np.outer(g.real, x.real * c_i)
                      + 1j * np.outer(g.imag, x.imag * c_q))
    return amp * np.outer(g, x.real * c_i + 1j * x.imag * c_q)


def branch_signals(msg: TxMessage, chan: ChannelState, pools: tuple[CodePool, CodePool],
                   config: SystemConfig) -> np.ndarray:
    """Noise-free (M, N_R, K) branch stack for a message."""
    pool_i, pool_q = pools
    amp = math.sqrt(config.ps_power / config.n_active)
    out = np.zeros((config.m_offsets, config.n_r, config.k_chips), dtype=complex)
    seen = set()
    for slot in range(config.n_active):
        a = msg.antenna_set[slot]
        u_bar = msg.realigned_offsets[slot]
        assert u_bar not in seen, "offset collision across active antennas"
        seen.add(u_bar)
        g = chan.link(u_bar, a, config.n_t)
        c_i = pool_i.col((a - 1) * config.l_codes + msg.code_idx_i[slot])
        c_q = pool_q.col((a - 1) * config.l_codes + msg.code_idx_q[slot])
        out[u_bar - 1] = _slot_signal(g, msg.qam_symbols[slot], c_i, c_q,
                                      amp, config.rail_coupling)
    return out


def _branch_noise_var(config: SystemConfig, n0: float, noise_split: str) -> float:
    if noise_split not in NOISE_SPLITS:
        raise ValueError(f"unknown noise_split {noise_split!r}")
    return n0 / config.m_offsets if noise_split == "branch_n0_over_m" else n0


def _draw_noise(shape, var: float, rng: np.random.Generator) -> np.ndarray:
    if var == 0.0:
        return np.zeros(shape, dtype=complex)
    s = math.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synth_branch_outputs(msg: TxMessage, chan: ChannelState,
                         pools: tuple[CodePool, CodePool], config: SystemConfig,
                         snr_db: float, rng: np.random.Generator,
                         noise_split: str = "branch_n0_over_m") -> BranchOutputs:
    n0 = config.noise_power(snr_db)
    var = _branch_noise_var(config, n0, noise_split)
    sig = branch_signals(msg, chan, pools, config)
    noise = _draw_noise(sig.shape, var, rng)
    return BranchOutputs(branches=sig + noise, noise_var_per_branch=var)


def synth_composite(msg: TxMessage, chan: ChannelState,
                    pools: tuple[CodePool, CodePool], config: SystemConfig,
                    snr_db: float, rng: np.random.Generator,
                    noise_split: str = "branch_n0_over_m") -> CompositeOutput:
    n0 = config.noise_power(snr_db)
    var = _branch_noise_var(config, n0, noise_split) * config.m_offsets
    sig = branch_signals(msg, chan, pools, config).sum(axis=0)
    noise = _draw_noise(sig.shape, var, rng)
    return CompositeOutput(y=sig + noise, noise_var=var)


def synth_paired(msg: TxMessage, chan: ChannelState,
                 pools: tuple[CodePool, CodePool], config: SystemConfig,
                 snr_db: float, rng: np.random.Generator,
                 noise_split: str = "branch_n0_over_m"
                 ) -> tuple[BranchOutputs, CompositeOutput]:
    """Branch and composite views of the same noise realization: the composite
    noise is the sum of the per-branch noises, so detector comparisons pair."""
    n0 = config.noise_power(snr_db)
    var = _branch_noise_var(config, n0, noise_split)
    sig = branch_signals(msg, chan, pools, config)
    noise = _draw_noise(sig.shape, var, rng)
    branches = BranchOutputs(branches=sig + noise, noise_var_per_branch=var)
    composite = CompositeOutput(y=(sig + noise).sum(axis=0),
                                noise_var=var * config.m_offsets)
    return branches, composite
