"""Wideband spectrum sample generation.

Occupancy is a set of fixed-width user blocks with guard subcarriers;
each occupied subcarrier carries a QPSK symbol through its own channel
realization with matched combining, so the clean spectrum is built
bin-by-bin (each link is narrowband, which makes the direct construction
identical to forming the time signal and transforming it). Noise is
added in the frequency domain; by unitarity of the DFT this matches
time-domain AWGN of the same variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig, sample_channel
from .exceptions import ConfigurationError


@dataclass
class OccupancyMask:
    bits: np.ndarray                       # (n_s,) bool
    user_blocks: list[tuple[int, int]]     # (start, width) per user


@dataclass
class WidebandSample:
    clean_spectrum: np.ndarray             # (n_s,) complex, zero off support
    noisy_spectrum: np.ndarray             # clean + frequency-domain noise
    occupancy: OccupancyMask
    snr_db: float
    user_distances_m: np.ndarray           # (n_users,)


@dataclass
class GenConfig:
    f_a_hz: float = 0.1e12
    f_b_hz: float = 0.64e12
    n_s: int = 256
    n_users: int = 8
    block_size: int = 5
    guard: int = 1
    d_min_m: float = 1.0
    d_max_m: float = 10.0
    snr_db: float = 30.0                   # math.inf disables noise
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        if not self.f_a_hz < self.f_b_hz:
            raise ConfigurationError(f"need f_a < f_b, got {self.f_a_hz} >= {self.f_b_hz}")
        if self.n_s < 2:
            raise ConfigurationError(f"n_s must be >= 2, got {self.n_s}")
        if self.n_users < 1 or self.block_size < 1 or self.guard < 0:
            raise ConfigurationError(
                f"invalid occupancy recipe (users={self.n_users}, "
                f"block={self.block_size}, guard={self.guard})"
            )
        if not 0 < self.d_min_m <= self.d_max_m:
            raise ConfigurationError(f"need 0 < d_min <= d_max, got [{self.d_min_m}, {self.d_max_m}]")
        if self.n_users * (self.block_size + 2 * self.guard) > self.n_s:
            raise ConfigurationError(
                f"occupancy infeasible: {self.n_users} users x "
                f"(block {self.block_size} + 2*guard {self.guard}) exceeds n_s={self.n_s}"
            )


def sample_occupancy(cfg: GenConfig, rng: np.random.Generator) -> OccupancyMask:
    """Place the user blocks uniformly at random among all feasible layouts.

    Feasible means: every block keeps >= guard idle subcarriers on each
    side (band edges included; the idle gap between two adjacent blocks is
    shared). Sampling maps a uniform k-combination through the standard
    gap transform, so it is exact rather than rejection-based.
    """
    k, w, g = cfg.n_users, cfg.block_size, cfg.guard
    slack = cfg.n_s - k * w - (k + 1) * g
    if slack < 0:
        raise ConfigurationError(
            f"occupancy infeasible: {k} blocks of {w} with guard {g} need "
            f"{k * w + (k + 1) * g} subcarriers, have {cfg.n_s}"
        )
    picks = np.sort(rng.choice(slack + k, size=k, replace=False))
    offsets = picks - np.arange(k)       # nondecreasing slack allocation
    starts = g + offsets + np.arange(k) * (w + g)

    bits = np.zeros(cfg.n_s, dtype=bool)
    blocks = []
    for s in starts:
        bits[s:s + w] = True
        blocks.append((int(s), w))
    return OccupancyMask(bits=bits, user_blocks=blocks)


def subcarrier_frequency(cfg: GenConfig, i: int) -> float:
    """Frequency of subcarrier i on the equally spaced grid over [f_a, f_b]."""
    if not 0 <= i < cfg.n_s:
        raise IndexError(f"subcarrier index {i} out of range [0, {cfg.n_s})")
    return cfg.f_a_hz + i * (cfg.f_b_hz - cfg.f_a_hz) / (cfg.n_s - 1)


_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2.0)


def generate_sample(cfg: GenConfig, rng: np.random.Generator) -> WidebandSample:
    """Draw one (noisy spectrum, clean spectrum) pair.

    Per occupied subcarrier: a channel realization at the owning user's
    distance, a unit-modulus QPSK symbol, and matched unit-norm combining,
    so the clean bin is ||effective channel|| * symbol. Noise is circular
    complex Gaussian on every bin with variance fixed by the ratio of the
    mean occupied-bin power to 10^(snr_db/10); snr_db = inf disables it.
    """
    occupancy = sample_occupancy(cfg, rng)
    distances = rng.uniform(cfg.d_min_m, cfg.d_max_m, cfg.n_users)
    clean = np.zeros(cfg.n_s, dtype=complex)

    for user, (start, width) in enumerate(occupancy.user_blocks):
        d = distances[user]
        for i in range(start, start + width):
            realization = sample_channel(subcarrier_frequency(cfg, i), d, cfg.channel, rng)
            symbol = rng.choice(_QPSK)
            # transmit the symbol uniformly over the array, combine matched
            effective = realization.h.sum(axis=1) / math.sqrt(cfg.channel.n_t)
            clean[i] = np.linalg.norm(effective) * symbol

    occupied = occupancy.bits
    if not occupied.any():
        raise ConfigurationError("all-idle occupancy: SNR is undefined")
    if math.isinf(cfg.snr_db):
        noisy = clean.copy()
    else:
        mean_power = float(np.mean(np.abs(clean[occupied]) ** 2))
        noise_var = mean_power / 10.0 ** (cfg.snr_db / 10.0)
        sigma = math.sqrt(noise_var / 2.0)
        noise = rng.normal(0.0, sigma, cfg.n_s) + 1j * rng.normal(0.0, sigma, cfg.n_s)
        noisy = clean + noise
    return WidebandSample(clean_spectrum=clean, noisy_spectrum=noisy,
                          occupancy=occupancy, snr_db=cfg.snr_db,
                          user_distances_m=distances)


def dft(x: np.ndarray) -> np.ndarray:
    """Unitary DFT (1/sqrt(N) both directions, so Parseval holds with constant 1)."""
    x = np.asarray(x)
    if x.shape[-1] < 1:
        raise ValueError("dft needs length >= 1")
    return np.fft.fft(x, norm="ortho")


def idft(x: np.ndarray) -> np.ndarray:
    """Inverse of `dft`."""
    x = np.asarray(x)
    if x.shape[-1] < 1:
        raise ValueError("idft needs length >= 1")
    return np.fft.ifft(x, norm="ortho")
