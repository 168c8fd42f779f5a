"""Sensing matrices and the sub-Nyquist measurement operator.

Two kinds are supported: the unstructured baseline built from randomly
selected rows of the unitary inverse-DFT matrix, and the structured
matrix exported from a trained compression layer (real-valued, applied
to the real and imaginary channels independently, which equals the
complex matrix-vector product because the matrix is real).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Conv1d
from .exceptions import ConfigurationError

UNSTRUCTURED = "unstructured"
LEARNED = "learned-structured"


@dataclass
class SensingMatrix:
    kind: str                              # UNSTRUCTURED or LEARNED
    n_m: int
    n_s: int
    rows: np.ndarray                       # (n_m, n_s); complex if unstructured, real if learned
    selected_row_indices: np.ndarray | None = None   # IDFT row choices (unstructured only)

    def __post_init__(self):
        if self.kind not in (UNSTRUCTURED, LEARNED):
            raise ConfigurationError(f"unknown sensing-matrix kind {self.kind!r}")
        if not 1 <= self.n_m <= self.n_s:
            raise ConfigurationError(f"need 1 <= n_m <= n_s, got n_m={self.n_m}, n_s={self.n_s}")
        if self.rows.shape != (self.n_m, self.n_s):
            raise ConfigurationError(
                f"rows shape {self.rows.shape} != (n_m, n_s) = ({self.n_m}, {self.n_s})"
            )

    @property
    def compression_rate(self) -> float:
        return self.n_m / self.n_s


def idft_matrix(n: int) -> np.ndarray:
    """Unitary inverse-DFT matrix: entry (r, c) = exp(+2j pi r c / n) / sqrt(n)."""
    r = np.arange(n)
    return np.exp(2j * np.pi * np.outer(r, r) / n) / np.sqrt(n)


def random_partial_idft(n_s: int, n_m: int, rng: np.random.Generator) -> SensingMatrix:
    """Sensing matrix from n_m distinct unitary-IDFT rows, drawn without replacement."""
    if not 1 <= n_m <= n_s:
        raise ConfigurationError(f"need 1 <= n_m <= n_s, got n_m={n_m}, n_s={n_s}")
    indices = rng.choice(n_s, size=n_m, replace=False)
    rows = idft_matrix(n_s)[indices]
    return SensingMatrix(kind=UNSTRUCTURED, n_m=n_m, n_s=n_s, rows=rows,
                         selected_row_indices=indices)


def compress(matrix: SensingMatrix, spectrum: np.ndarray) -> np.ndarray:
    """Apply the measurement operator to a length-n_s spectrum.

    For the learned kind the rows are real, so the product applies them to
    the real and imaginary parts independently.
    """
    spectrum = np.asarray(spectrum)
    if spectrum.shape[-1] != matrix.n_s:
        raise ConfigurationError(
            f"spectrum length {spectrum.shape[-1]} != n_s {matrix.n_s}"
        )
    return spectrum @ matrix.rows.T


def export_learned_matrix(model) -> SensingMatrix:
    """Copy a model's compression-layer weights into a structured SensingMatrix.

    The model's first layer must be the full-width bias-free convolution
    whose filters are the matrix rows; `compress` on the export then
    matches the layer's forward pass elementwise.
    """
    layer = getattr(model, "compression", None)
    if (not isinstance(layer, Conv1d) or layer.bias is not None
            or layer.in_channels != 1 or layer.kernel_size != model.cfg.n_s
            or layer.stride != 1 or layer.padding != 0):
        raise ConfigurationError(
            "model's first layer is not a full-width bias-free conv; cannot export"
        )
    rows = np.array(layer.weight.data[:, 0, :], dtype=np.float64)
    return SensingMatrix(kind=LEARNED, n_m=rows.shape[0], n_s=rows.shape[1], rows=rows)
