"""Conversions between complex spectra and the two-channel real layout."""
from __future__ import annotations

import numpy as np


def to_channels(spectra: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Pack complex (..., L) into real (..., 2, L): channel 0 real, channel 1 imag."""
    spectra = np.asarray(spectra)
    return np.stack([spectra.real, spectra.imag], axis=-2).astype(dtype)


def to_complex(channels: np.ndarray) -> np.ndarray:
    """Inverse of `to_channels`."""
    channels = np.asarray(channels)
    return channels[..., 0, :] + 1j * channels[..., 1, :]


def normalize(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affine map sending [lo, hi] to [0, 1]. Values outside pass through unclipped."""
    return (values - lo) / (hi - lo)


def denormalize(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Inverse affine map of `normalize`."""
    return values * (hi - lo) + lo
