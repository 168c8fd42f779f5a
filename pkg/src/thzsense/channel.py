"""Per-subcarrier THz channel realizations.

Each narrowband link at frequency f and distance d is a sum of one
line-of-sight ray and a configurable number of first/second-order
reflected rays. Ray power follows the free-space spreading law times a
molecular-absorption attenuation; reflected rays lose a further fixed
10 dB (first order) or 20 dB (second order). Phases and angles are drawn
i.i.d. uniform, so a realization is reproducible from (f, d, config, rng).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

SPEED_OF_LIGHT = 299792458.0  # m/s


@dataclass
class ChannelConfig:
    n_t: int = 1
    n_r: int = 1
    g_t_dbi: float = 30.0
    g_r_dbi: float = 30.0
    l1: int = 3                       # first-order reflected paths
    l2: int = 2                       # second-order reflected paths
    first_order_loss_db: float = 10.0
    second_order_loss_db: float = 20.0
    # (frequency_hz, absorption_coefficient_per_m) breakpoints, frequency-sorted;
    # empty disables molecular absorption
    absorption_table: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ConfigurationError(f"antenna counts must be >= 1 (n_t={self.n_t}, n_r={self.n_r})")
        if self.l1 < 0 or self.l2 < 0:
            raise ConfigurationError(f"reflected-path counts must be >= 0 (l1={self.l1}, l2={self.l2})")
        freqs = [f for f, _ in self.absorption_table]
        if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
            raise ConfigurationError("absorption_table frequencies must be strictly increasing")
        if any(k < 0 for _, k in self.absorption_table):
            raise ConfigurationError("absorption coefficients must be >= 0")


@dataclass
class Ray:
    complex_gain: complex
    aod: tuple[float, float]   # (azimuth, elevation) at the transmitter
    aoa: tuple[float, float]   # (azimuth, elevation) at the receiver
    order: int                 # 0 = LOS, 1/2 = reflection order


@dataclass
class ChannelRealization:
    frequency_hz: float
    distance_m: float
    rays: list[Ray]
    h: np.ndarray              # (n_r, n_t) complex


def spreading_loss(f_hz: float, d_m: float) -> float:
    """Free-space power gain (c / (4 pi f d))^2."""
    if f_hz <= 0 or d_m <= 0:
        raise ValueError(f"frequency and distance must be positive (f={f_hz}, d={d_m})")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * f_hz * d_m)) ** 2


def absorption_loss(f_hz: float, d_m: float,
                    table: list[tuple[float, float]]) -> float:
    """Molecular absorption power gain exp(-K(f) * d).

    K(f) is linearly interpolated between the table breakpoints. An empty
    table disables absorption (gain 1). Queries outside a non-empty
    table's range are rejected rather than extrapolated.
    """
    if f_hz <= 0 or d_m <= 0:
        raise ValueError(f"frequency and distance must be positive (f={f_hz}, d={d_m})")
    if not table:
        return 1.0
    freqs = [f for f, _ in table]
    if not freqs[0] <= f_hz <= freqs[-1]:
        raise ValueError(
            f"frequency {f_hz:g} Hz outside absorption table range "
            f"[{freqs[0]:g}, {freqs[-1]:g}]"
        )
    coeffs = [k for _, k in table]
    k = float(np.interp(f_hz, freqs, coeffs))
    return math.exp(-k * d_m)


def steering_vector(n_elements: int, theta: float, phi: float) -> np.ndarray:
    """Uniform linear array response, half-wavelength spacing, unit norm.

    Element k is exp(j * pi * k * sin(theta)) / sqrt(n); the elevation
    angle phi is accepted for interface symmetry but does not enter the
    linear-array response.
    """
    if n_elements < 1:
        raise ValueError(f"n_elements must be >= 1, got {n_elements}")
    k = np.arange(n_elements)
    return np.exp(1j * math.pi * k * math.sin(theta)) / math.sqrt(n_elements)


def load_absorption_csv(path) -> list[tuple[float, float]]:
    """Read (frequency_hz, k_per_m) breakpoints from a two-column CSV with header."""
    table = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected a header row with two columns")
        for row in reader:
            if not row:
                continue
            table.append((float(row[0]), float(row[1])))
    return table


def illustrative_absorption_table() -> list[tuple[float, float]]:
    """A rough, synthetic absorption profile over 0.05-1.0 THz.

    Illustrative only: a gentle rise with frequency plus a few bumps at
    known water-vapor line neighbourhoods. Real studies should supply a
    table computed from spectroscopic data for their atmosphere.
    """
    return [
        (0.05e12, 2e-4),
        (0.19e12, 8e-4),
        (0.32e12, 2e-3),
        (0.38e12, 6e-3),
        (0.45e12, 3e-3),
        (0.55e12, 8e-3),
        (0.75e12, 1.5e-2),
        (1.00e12, 3e-2),
    ]


def sample_channel(f_hz: float, d_m: float, config: ChannelConfig,
                   rng: np.random.Generator) -> ChannelRealization:
    """Draw one multipath realization at (f, d).

    The LOS ray's squared magnitude is exactly spreading * absorption;
    every reflected ray additionally carries its order's fixed dB loss.
    All rays get independent uniform phases, azimuths in [-pi, pi) and
    elevations in [-pi/2, pi/2]. Antenna gains enter as amplitude factors
    sqrt(10^(dBi/10)) per side.
    """
    base_gain = spreading_loss(f_hz, d_m) * absorption_loss(f_hz, d_m, config.absorption_table)
    amp_t = math.sqrt(10.0 ** (config.g_t_dbi / 10.0))
    amp_r = math.sqrt(10.0 ** (config.g_r_dbi / 10.0))
    scale = math.sqrt(config.n_t * config.n_r) * amp_t * amp_r

    orders = [0] + [1] * config.l1 + [2] * config.l2
    n_rays = len(orders)
    phases = rng.uniform(0.0, 2.0 * math.pi, n_rays)
    aod_az = rng.uniform(-math.pi, math.pi, n_rays)
    aod_el = rng.uniform(-math.pi / 2, math.pi / 2, n_rays)
    aoa_az = rng.uniform(-math.pi, math.pi, n_rays)
    aoa_el = rng.uniform(-math.pi / 2, math.pi / 2, n_rays)
    extra_db = {0: 0.0, 1: config.first_order_loss_db, 2: config.second_order_loss_db}

    rays = []
    h = np.zeros((config.n_r, config.n_t), dtype=complex)
    for i, order in enumerate(orders):
        magnitude = math.sqrt(base_gain * 10.0 ** (-extra_db[order] / 10.0))
        gain = magnitude * complex(math.cos(phases[i]), math.sin(phases[i]))
        ray = Ray(complex_gain=gain,
                  aod=(aod_az[i], aod_el[i]),
                  aoa=(aoa_az[i], aoa_el[i]),
                  order=order)
        rays.append(ray)
        a_t = steering_vector(config.n_t, ray.aod[0], ray.aod[1])
        a_r = steering_vector(config.n_r, ray.aoa[0], ray.aoa[1])
        h += scale * gain * np.outer(a_r, a_t.conj())
    return ChannelRealization(frequency_hz=f_hz, distance_m=d_m, rays=rays, h=h)
