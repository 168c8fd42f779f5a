"""Reconstruction-quality metrics and occupancy detection.

MSE and SSIM are computed on the stored normalized representation (SSIM
requires a [0, 1] dynamic range); cosine similarity and energy detection
run on the denormalized physical spectra, where idle bins sit at zero and
shape similarity is informative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SSIM_C1 = 0.01 ** 2   # (0.01 * dynamic range)^2 with range 1
SSIM_C2 = 0.03 ** 2


@dataclass
class MetricsReport:
    mse: float
    cosine: float
    ssim: float
    detection: tuple[float, float]   # (probability_detect, probability_false_alarm)
    n_samples: int

    CSV_HEADER = "snr_db,compression_rate,method,mse,cosine,ssim,pd,pfa,n_samples"

    def csv_row(self, snr_db: float, compression_rate: float, method: str) -> str:
        return (f"{snr_db:g},{compression_rate:g},{method},"
                f"{self.mse:.6e},{self.cosine:.6f},{self.ssim:.6f},"
                f"{self.detection[0]:.6f},{self.detection[1]:.6f},{self.n_samples}")


def _check_same_length(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over complex entries: ||a - b||^2 / N."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_same_length(a, b)
    diff = a - b
    return float(np.mean(diff.real ** 2 + diff.imag ** 2))


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the two spectra flattened into real 2N-vectors.

    Equals Re<a, b> / (||a|| ||b||) with the Hermitian inner product.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_same_length(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(np.real(np.vdot(a, b)) / (na * nb))


def _ssim_channel(x: np.ndarray, y: np.ndarray) -> float:
    mu_x = x.mean()
    mu_y = y.mean()
    var_x = x.var()
    var_y = y.var()
    cov = ((x - mu_x) * (y - mu_y)).mean()
    return float(
        (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
        / ((mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2))
    )


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Global-statistics structural similarity on [0, 1]-scale spectra.

    Computed on the real channel and the imaginary channel separately,
    then averaged. Population statistics (divide by N) throughout.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_same_length(a, b)
    return 0.5 * (_ssim_channel(a.real, b.real) + _ssim_channel(a.imag, b.imag))


def energy_detect(spectrum: np.ndarray, threshold_fraction: float) -> np.ndarray:
    """Occupancy mask: bin power >= threshold_fraction * peak power.

    An all-zero spectrum yields an all-idle mask. The mask is invariant to
    nonzero rescaling of the spectrum.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError(f"threshold_fraction must be in (0, 1), got {threshold_fraction}")
    power = np.abs(np.asarray(spectrum)) ** 2
    peak = power.max()
    if peak == 0:
        return np.zeros(power.shape, dtype=bool)
    return power >= threshold_fraction * peak


def detection_rates(mask: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """(P_detect over occupied bins, P_false_alarm over idle bins)."""
    truth = np.asarray(truth, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    occupied = truth.sum()
    idle = truth.size - occupied
    pd = float((mask & truth).sum() / occupied) if occupied else 1.0
    pfa = float((mask & ~truth).sum() / idle) if idle else 0.0
    return pd, pfa


def evaluate(reconstruct_fn, inputs: np.ndarray, labels: np.ndarray,
             occupancy: np.ndarray, norm: tuple[float, float], *,
             threshold_fraction: float = 0.05, batch_size: int = 256) -> MetricsReport:
    """Average per-sample metrics of a reconstructor over a test set.

    reconstruct_fn maps a normalized (n, 2, n_s) input batch to a
    normalized (n, 2, n_s) output batch. inputs/labels are the stored
    normalized arrays, occupancy the (n, n_s) boolean ground truth, and
    norm the dataset's (lo, hi) constants used to recover physical spectra
    for cosine similarity and detection.
    """
    from .representation import denormalize, to_complex

    n = inputs.shape[0]
    if n == 0:
        raise ValueError("empty test set")
    lo, hi = norm
    mses = []
    cosines = []
    ssims = []
    pds = []
    pfas = []
    for start in range(0, n, batch_size):
        xb = inputs[start:start + batch_size]
        yb = labels[start:start + batch_size]
        out = np.asarray(reconstruct_fn(xb))
        for j in range(xb.shape[0]):
            idx = start + j
            try:
                pred_n = to_complex(out[j].astype(np.float64))
                truth_n = to_complex(yb[j].astype(np.float64))
                mses.append(mse(pred_n, truth_n))
                ssims.append(ssim(pred_n, truth_n))
                pred = denormalize(pred_n, lo, hi)
                truth = denormalize(truth_n, lo, hi)
                cosines.append(cosine_similarity(pred, truth))
                mask = energy_detect(pred, threshold_fraction)
                pd, pfa = detection_rates(mask, occupancy[idx])
                pds.append(pd)
                pfas.append(pfa)
            except ValueError as exc:
                raise ValueError(f"sample {idx}: {exc}") from exc
    return MetricsReport(
        mse=float(np.mean(mses)),
        cosine=float(np.mean(cosines)),
        ssim=float(np.mean(ssims)),
        detection=(float(np.mean(pds)), float(np.mean(pfas))),
        n_samples=n,
    )
