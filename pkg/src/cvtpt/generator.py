"""Normalization chain from a kernel matrix to a discrete generator.

The chain is: row sums p of K, right normalization K D^-alpha with
D = diag(p), left (Markov) normalization P = D_alpha^-1 (K D^-alpha),
then L = (P - I) / eps. Off-diagonals of L are nonnegative and every row
sums to zero, so L generates a continuous-time Markov jump process on the
cloud. With alpha = 1/2 and data sampled from the Gibbs density, L
approximates beta/2 times the generator of the underlying diffusion; beta
is carried as metadata so downstream consumers can undo that factor once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DataError, NumericalError
from .kernels import KernelMatrix


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse discrete generator with its construction metadata.

    sym_weights holds the stationary weights of the underlying Markov
    matrix (the chain is reversible because the kernel is symmetric);
    conjugating L by diag(sqrt(sym_weights)) yields a symmetric matrix,
    which the committor solver exploits for large dense-degree systems.
    """

    matrix: sp.csr_matrix
    epsilon: float
    alpha: float
    kind: str
    beta: float
    sym_weights: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def row_sums(kernel: KernelMatrix) -> np.ndarray:
    """Vector of kernel row sums; every entry is >= 1 (unit diagonal)."""
    return np.asarray(kernel.matrix.sum(axis=1)).ravel()


def build_generator(kernel: KernelMatrix, alpha: float, beta: float) -> GeneratorMatrix:
    """Normalize a kernel into the discrete generator L = (P - I) / eps.

    alpha = 1/2 targets the backward Kolmogorov operator; beta > 0 is the
    inverse temperature of the sampled data, stored for TPT post-processing.
    """
    if beta <= 0:
        raise DataError(f"beta must be positive, got {beta}")
    K = kernel.matrix
    p = row_sums(kernel)
    if np.any(p <= 0):
        raise NumericalError("kernel has a nonpositive row sum")

    # right normalization: scale column j by p_j^-alpha
    L = sp.csr_matrix(K, copy=True)
    colscale = p ** (-alpha)
    L.data *= colscale[L.indices]

    # left (Markov) normalization: scale row i to unit sum
    d = np.asarray(L.sum(axis=1)).ravel()
    if np.any(d <= 0):
        raise NumericalError("right-normalized kernel has a nonpositive row sum")
    row_of = np.repeat(np.arange(L.shape[0]), np.diff(L.indptr))
    L.data /= d[row_of]

    # L = (P - I)/eps, with the diagonal replaced by minus the off-diagonal
    # row sum so that L @ ones vanishes to round-off; the diagonal entry is
    # always stored because K has a unit diagonal
    eps = kernel.epsilon
    L.data /= eps
    diag_mask = L.indices == row_of
    L.data[diag_mask] = 0.0
    offdiag = np.asarray(L.sum(axis=1)).ravel()
    L.data[diag_mask] = -offdiag  # one diagonal slot per row, in row order
    # stationary weights of P: pi_i = d_i * p_i^-alpha up to normalization
    # (detailed balance holds because K is symmetric)
    pi = d * colscale
    pi /= pi.sum()
    return GeneratorMatrix(
        matrix=L,
        epsilon=eps,
        alpha=float(alpha),
        kind=kernel.kind,
        beta=float(beta),
        sym_weights=pi,
    )


def apply(gen: GeneratorMatrix, f: np.ndarray) -> np.ndarray:
    """Matrix-vector product L f."""
    f = np.asarray(f, dtype=float)
    if f.shape != (gen.n,):
        raise DataError(f"vector has shape {f.shape}, expected ({gen.n},)")
    return gen.matrix @ f
