"""Classical sparse-recovery baseline: orthogonal matching pursuit.

Reconstructs a spectrum from unstructured partial-IDFT measurements at
the same interface as the learned network, serving as the deterministic
comparison method and sanity floor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .sensing import UNSTRUCTURED, SensingMatrix


@dataclass
class OmpConfig:
    max_sparsity: int = 40
    residual_tol: float = 1e-6
    max_iters: int | None = None    # defaults to max_sparsity

    def __post_init__(self):
        if self.max_sparsity < 1:
            raise ConfigurationError(f"max_sparsity must be >= 1, got {self.max_sparsity}")
        if self.residual_tol < 0:
            raise ConfigurationError(f"residual_tol must be >= 0, got {self.residual_tol}")


@dataclass
class OmpResult:
    estimate: np.ndarray            # (n_s,) complex, zero off the selected support
    support: list[int]
    residual_norms: list[float]     # norm before each iteration plus after the last
    iterations: int
    rank_deficient: bool = False


def omp_reconstruct(matrix: SensingMatrix, z: np.ndarray, cfg: OmpConfig) -> OmpResult:
    """Greedy sparse recovery of a length-n_s spectrum from measurements z.

    Each iteration selects the atom with the largest |Phi^H residual|
    correlation, refits by least squares on the grown support (normal
    equations with a tiny ridge), and stops at residual_tol, max_sparsity,
    or max_iters. A rank-deficient support matrix stops early with the
    current estimate flagged.
    """
    if matrix.kind != UNSTRUCTURED:
        raise ConfigurationError(f"omp_reconstruct needs an {UNSTRUCTURED} matrix, got {matrix.kind}")
    z = np.asarray(z, dtype=complex)
    if z.shape != (matrix.n_m,):
        raise ConfigurationError(f"measurement length {z.shape} != (n_m,) = ({matrix.n_m},)")
    if cfg.max_sparsity > matrix.n_m:
        raise ConfigurationError(
            f"max_sparsity {cfg.max_sparsity} exceeds measurement count {matrix.n_m}"
        )

    phi = matrix.rows
    max_iters = cfg.max_iters if cfg.max_iters is not None else cfg.max_sparsity
    support: list[int] = []
    coeffs = np.zeros(0, dtype=complex)
    residual = z.copy()
    norms = [float(np.linalg.norm(residual))]
    rank_deficient = False

    iterations = 0
    while (norms[-1] > cfg.residual_tol and len(support) < cfg.max_sparsity
           and iterations < max_iters):
        correlation = np.abs(phi.conj().T @ residual)
        correlation[support] = -1.0
        atom = int(np.argmax(correlation))
        trial = support + [atom]
        sub = phi[:, trial]
        gram = sub.conj().T @ sub
        gram[np.diag_indices_from(gram)] += 1e-10
        try:
            solved = np.linalg.solve(gram, sub.conj().T @ z)
        except np.linalg.LinAlgError:
            rank_deficient = True
            break
        if not np.all(np.isfinite(solved)):
            rank_deficient = True
            break
        support = trial
        coeffs = solved
        residual = z - sub @ coeffs
        norms.append(float(np.linalg.norm(residual)))
        iterations += 1

    estimate = np.zeros(matrix.n_s, dtype=complex)
    if support:
        estimate[support] = coeffs
    return OmpResult(estimate=estimate, support=support, residual_norms=norms,
                     iterations=iterations, rank_deficient=rank_deficient)
