"""Density estimate, reactive current and reaction rate from a committor.

All three rest on the discrete quadratic-form operator
``G(f, g)_i = beta^-1 sum_j L_ij (f_i - f_j)(g_i - g_j)``: applied to the
committor with coordinate functions it yields the reactive current, and
applied to the committor with itself, averaged outside A and B over
points sampled from the invariant density, it yields the reaction rate.
The density weights come from isotropic-kernel row sums normalized to
total one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .committor import CommittorSolution
from .errors import DataError
from .geometry import PointCloud, displacement
from .generator import GeneratorMatrix
from .kernels import isotropic_kernel


@dataclass(frozen=True)
class TptResult:
    density: np.ndarray
    current: np.ndarray
    rate: float
    epsilon_tilde: float


def gamma(gen: GeneratorMatrix, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Quadratic form beta^-1 sum_j L_ij (f_i - f_j)(g_i - g_j) per point.

    Nonnegative for f = g because every off-diagonal L_ij is >= 0 and the
    diagonal term vanishes.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    n = gen.n
    if f.shape != (n,) or g.shape != (n,):
        raise DataError(f"vectors must have shape ({n},), got {f.shape} and {g.shape}")
    L = gen.matrix.tocoo()
    terms = L.data * (f[L.row] - f[L.col]) * (g[L.row] - g[L.col])
    out = np.bincount(L.row, weights=terms, minlength=n)
    return out / gen.beta


def density_estimate(
    cloud: PointCloud, epsilon_tilde: float
) -> np.ndarray:
    """Isotropic-kernel row sums at bandwidth epsilon_tilde, normalized to 1."""
    if epsilon_tilde <= 0:
        raise DataError(f"epsilon_tilde must be positive, got {epsilon_tilde}")
    k = isotropic_kernel(cloud, epsilon_tilde)
    p = np.asarray(k.matrix.sum(axis=1)).ravel()
    return p / p.sum()


def reactive_current(
    gen: GeneratorMatrix,
    sol: CommittorSolution,
    density: np.ndarray,
    cloud: PointCloud,
) -> np.ndarray:
    """Per-point current J_i,v = beta^-1 p_i sum_j L_ij (q_i - q_j) z_ij,v.

    z is the minimum-image displacement x_i - x_j, so periodic dimensions
    contribute wrapped coordinate differences.
    """
    q = sol.q
    n, d = cloud.points.shape
    if gen.n != n or density.shape != (n,) or q.shape != (n,):
        raise DataError("generator, committor, density and cloud must be aligned")
    L = gen.matrix.tocoo()
    dq = q[L.row] - q[L.col]
    z = displacement(cloud.points[L.row], cloud.points[L.col], cloud.topology)
    out = np.empty((n, d))
    for nu in range(d):
        out[:, nu] = np.bincount(L.row, weights=L.data * dq * z[:, nu], minlength=n)
    return out * (density / gen.beta)[:, None]


def reaction_rate(
    gen: GeneratorMatrix,
    sol: CommittorSolution,
    a_idx: np.ndarray,
    b_idx: np.ndarray,
) -> float:
    """Plain average of gamma(q, q) over points outside A and B.

    This is a Monte Carlo estimate of the rate integral and therefore
    assumes the cloud was sampled from the invariant density.
    """
    n = gen.n
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(a_idx, dtype=np.int64)] = False
    mask[np.asarray(b_idx, dtype=np.int64)] = False
    if not mask.any():
        raise DataError("no points outside A and B; rate average is undefined")
    g = gamma(gen, sol.q, sol.q)
    return float(np.mean(g[mask]))


def compute_tpt(
    gen: GeneratorMatrix,
    sol: CommittorSolution,
    cloud: PointCloud,
    epsilon_tilde: float,
) -> TptResult:
    """Density, current and rate in one pass."""
    p = density_estimate(cloud, epsilon_tilde)
    current = reactive_current(gen, sol, p, cloud)
    rate = reaction_rate(gen, sol, sol.a_idx, sol.b_idx)
    return TptResult(density=p, current=current, rate=rate, epsilon_tilde=float(epsilon_tilde))
