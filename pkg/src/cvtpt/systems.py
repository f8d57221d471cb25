"""Built-in synthetic collective-variable systems.

Each system bundles vectorized callables for the free energy F, its
gradient, the diffusion tensor M, the tensor divergence (column vector of
row-wise derivative sums) and the tensor square root, together with the
topology and inverse temperature. Gradients and divergences are analytic;
tests cross-check them against finite differences.

Systems double as the source of exact Gibbs samples for validation:
the quadratic system samples its Gaussian directly, the others sample by
inversion or cell-weighted jittering on a fine grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError
from .geometry import Topology, spd_check


def batched_spd_sqrt(mats: np.ndarray) -> np.ndarray:
    """Symmetric square roots of a stack of SPD matrices.

    Closed forms for d = 1 and d = 2, batched eigendecomposition above.
    """
    d = mats.shape[-1]
    if d == 1:
        return np.sqrt(mats)
    if d == 2:
        m11, m12, m22 = mats[..., 0, 0], mats[..., 0, 1], mats[..., 1, 1]
        s = np.sqrt(m11 * m22 - m12 * m12)
        t = np.sqrt(m11 + m22 + 2.0 * s)
        out = mats.copy()
        out[..., 0, 0] += s
        out[..., 1, 1] += s
        return out / t[..., None, None]
    w, v = np.linalg.eigh(mats)
    return np.einsum("...ik,...k,...jk->...ij", v, np.sqrt(w), v)


@dataclass(frozen=True)
class CvSystem:
    """Dynamics in collective variables: dx = (-M grad F + beta^-1 div M) dt
    + sqrt(2 beta^-1) M^{1/2} dW, with everything position dependent."""

    name: str
    topology: Topology
    beta: float
    free_energy: Callable[[np.ndarray], np.ndarray]
    grad_free_energy: Callable[[np.ndarray], np.ndarray]
    tensor: Callable[[np.ndarray], np.ndarray]
    div_tensor: Callable[[np.ndarray], np.ndarray]
    sqrt_tensor: Callable[[np.ndarray], np.ndarray] = None  # type: ignore[assignment]
    # numba fast-path id + parameter vector; None means generic stepping only
    stepper_kind: str | None = None
    stepper_params: tuple = ()
    # hint for grid-based Gibbs sampling on unbounded dimensions
    sample_box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.sqrt_tensor is None:
            object.__setattr__(
                self, "sqrt_tensor", lambda x: batched_spd_sqrt(self.tensor(x))
            )

    @property
    def dim(self) -> int:
        return self.topology.dim

    def drift(self, x: np.ndarray) -> np.ndarray:
        """-M grad F + beta^-1 div M, vectorized over rows of x."""
        m = self.tensor(x)
        g = self.grad_free_energy(x)
        return -np.einsum("...ij,...j->...i", m, g) + self.div_tensor(x) / self.beta


def quadratic_2d(
    hess: np.ndarray | None = None,
    tensor: np.ndarray | None = None,
    beta: float = 1.0,
) -> CvSystem:
    """2D Ornstein-Uhlenbeck system: F(x) = x^T H x / 2 with constant M.

    Default H = I and M with eigenvalues (1, 4) rotated by 30 degrees, an
    anisotropic tensor that is deliberately not axis aligned.
    """
    H = np.eye(2) if hess is None else spd_check(hess, "quadratic hessian")
    if tensor is None:
        c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
        R = np.array([[c, -s], [s, c]])
        M = R @ np.diag([1.0, 4.0]) @ R.T
    else:
        M = spd_check(tensor, "quadratic tensor")
    M = 0.5 * (M + M.T)
    topo = Topology((None, None))

    def F(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, H, x)

    def gradF(x):
        return np.asarray(x, dtype=float) @ H.T

    def tens(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(M, x.shape[:-1] + (2, 2)).copy()

    def divM(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    return CvSystem(
        name="quadratic2d",
        topology=topo,
        beta=float(beta),
        free_energy=F,
        grad_free_energy=gradF,
        tensor=tens,
        div_tensor=divM,
        stepper_kind="quadratic2d",
        stepper_params=tuple(H.ravel()) + tuple(M.ravel()),
        sample_box=((-4.0, 4.0), (-4.0, 4.0)),
    )


def double_well_1d(beta: float = 3.0) -> CvSystem:
    """1D double well F(x) = (x^2 - 1)^2 with M(x) = 1 + 0.9 sin(3x)."""
    topo = Topology((None,))

    def F(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return (x * x - 1.0) ** 2

    def gradF(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return (4.0 * x * (x * x - 1.0))[..., None]

    def tens(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return (1.0 + 0.9 * np.sin(3.0 * x))[..., None, None]

    def divM(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return (2.7 * np.cos(3.0 * x))[..., None]

    return CvSystem(
        name="double_well_1d",
        topology=topo,
        beta=float(beta),
        free_energy=F,
        grad_free_energy=gradF,
        tensor=tens,
        div_tensor=divM,
        stepper_kind="double_well_1d",
        stepper_params=(),
        sample_box=((-2.2, 2.2),),
    )


def torus_2d(beta: float = 1.0) -> CvSystem:
    """Periodic 2D system on [-pi, pi)^2.

    F = cos(phi) + cos(phi - psi); M has equal diagonal entries
    1.5 + 0.5 sin(phi) and off-diagonal 0.3 cos(psi), SPD everywhere
    (diagonal >= 1.0, |off-diagonal| <= 0.3).
    """
    topo = Topology((2.0 * np.pi, 2.0 * np.pi))

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.cos(x[..., 0]) + np.cos(x[..., 0] - x[..., 1])

    def gradF(x):
        x = np.asarray(x, dtype=float)
        phi, psi = x[..., 0], x[..., 1]
        out = np.empty(x.shape)
        out[..., 0] = -np.sin(phi) - np.sin(phi - psi)
        out[..., 1] = np.sin(phi - psi)
        return out

    def tens(x):
        x = np.asarray(x, dtype=float)
        phi, psi = x[..., 0], x[..., 1]
        out = np.empty(x.shape[:-1] + (2, 2))
        diag = 1.5 + 0.5 * np.sin(phi)
        off = 0.3 * np.cos(psi)
        out[..., 0, 0] = diag
        out[..., 1, 1] = diag
        out[..., 0, 1] = off
        out[..., 1, 0] = off
        return out

    def divM(x):
        # row-wise: [d(M11)/dphi + d(M12)/dpsi, d(M21)/dphi + d(M22)/dpsi]
        x = np.asarray(x, dtype=float)
        phi, psi = x[..., 0], x[..., 1]
        out = np.empty(x.shape)
        out[..., 0] = 0.5 * np.cos(phi) - 0.3 * np.sin(psi)
        out[..., 1] = 0.0
        return out

    return CvSystem(
        name="torus2d",
        topology=topo,
        beta=float(beta),
        free_energy=F,
        grad_free_energy=gradF,
        tensor=tens,
        div_tensor=divM,
        stepper_kind="torus2d",
        stepper_params=(),
    )


_BUILTINS = {
    "quadratic2d": quadratic_2d,
    "double_well_1d": double_well_1d,
    "torus2d": torus_2d,
}


def make_system(name: str, **kwargs) -> CvSystem:
    """Instantiate a built-in system by name (CLI entry point)."""
    if name not in _BUILTINS:
        raise ConfigError(f"unknown system '{name}'; built-ins: {sorted(_BUILTINS)}")
    return _BUILTINS[name](**kwargs)


def sample_gibbs_quadratic(system: CvSystem, n: int, seed: int) -> np.ndarray:
    """Exact Gaussian samples from exp(-beta x^T H x / 2)."""
    H = np.array(system.stepper_params[:4]).reshape(2, 2)
    cov = np.linalg.inv(system.beta * H)
    rng = np.random.default_rng(seed)
    return rng.multivariate_normal(np.zeros(2), cov, size=n)


def sample_gibbs_1d(
    system: CvSystem, n: int, seed: int, grid_size: int = 20_001
) -> np.ndarray:
    """Inverse-CDF samples from exp(-beta F) for a 1D system.

    The density is tabulated on sample_box (or the period) with a grid
    fine enough that interpolation error is negligible against the
    statistical noise of any downstream estimate.
    """
    if system.dim != 1:
        raise DataError("sample_gibbs_1d requires a 1D system")
    if system.topology.periods[0] is not None:
        p = system.topology.periods[0]
        lo, hi = -p / 2, p / 2
    elif system.sample_box is not None:
        lo, hi = system.sample_box[0]
    else:
        raise DataError("1D system needs a sample_box or a period")
    xs = np.linspace(lo, hi, grid_size)
    w = np.exp(-system.beta * (system.free_energy(xs[:, None]) - np.min(system.free_energy(xs[:, None]))))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(xs))])
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    return np.interp(u, cdf, xs)[:, None]
