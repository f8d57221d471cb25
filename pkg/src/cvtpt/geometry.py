"""Point clouds on flat periodic products, minimum-image displacements,
and SPD-matrix utilities.

A topology assigns each coordinate either a period (angles live on a
circle of that circumference) or ``None`` for an unbounded coordinate.
Periodic coordinates are wrapped into the canonical range
``[-period/2, period/2)`` once, at ingestion, so that displacement is
branch-free afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

# Reject SPD matrices whose smallest eigenvalue is below this fraction of
# the largest: kernel exponents divide by eigenvalues and blow up otherwise.
SPD_EIG_RTOL = 1e-10
SPD_SYM_RTOL = 1e-12


@dataclass(frozen=True)
class Topology:
    """Per-dimension extents: a positive period or None (unbounded)."""

    periods: tuple[float | None, ...]

    def __post_init__(self):
        for k, p in enumerate(self.periods):
            if p is not None and not (np.isfinite(p) and p > 0):
                raise DataError(f"period for dimension {k} must be positive, got {p}")

    @property
    def dim(self) -> int:
        return len(self.periods)

    @property
    def period_array(self) -> np.ndarray:
        """Periods as floats with np.inf marking unbounded dimensions."""
        return np.array([np.inf if p is None else p for p in self.periods])

    def is_periodic(self) -> np.ndarray:
        return np.array([p is not None for p in self.periods])


def wrap(points: np.ndarray, topology: Topology) -> np.ndarray:
    """Map coordinates of periodic dimensions into [-period/2, period/2)."""
    pts = np.array(points, dtype=float, copy=True)
    per = topology.period_array
    mask = np.isfinite(per)
    if pts.ndim == 1:
        pts[mask] = np.mod(pts[mask] + per[mask] / 2, per[mask]) - per[mask] / 2
    else:
        pts[..., mask] = np.mod(pts[..., mask] + per[mask] / 2, per[mask]) - per[mask] / 2
    return pts


def displacement(x: np.ndarray, y: np.ndarray, topology: Topology) -> np.ndarray:
    """Minimum-image difference x - y, wrapped per dimension.

    Component k is ``x_k - y_k`` wrapped into ``[-period_k/2, period_k/2)``
    for periodic dimensions and the plain difference otherwise. Broadcasts
    over leading axes.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != topology.dim or y.shape[-1] != topology.dim:
        raise DataError(
            f"dimension mismatch: points have {x.shape[-1]}/{y.shape[-1]} "
            f"components, topology has {topology.dim}"
        )
    return wrap(x - y, topology)


@dataclass(frozen=True)
class PointCloud:
    """n sample points in d collective-variable dimensions."""

    points: np.ndarray
    topology: Topology

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise DataError(f"points must be an (n, d) array, got shape {pts.shape}")
        n, d = pts.shape
        if n < 2:
            raise DataError(f"need at least 2 points, got {n}")
        if d != self.topology.dim:
            raise DataError(f"points have d={d} but topology has d={self.topology.dim}")
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.all(np.isfinite(pts), axis=1))[0, 0])
            raise DataError(f"non-finite coordinates at point index {bad}")
        object.__setattr__(self, "points", wrap(pts, self.topology))
        self.points.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def spd_check(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate symmetry and positive definiteness; return the symmetrized array.

    Symmetry to SPD_SYM_RTOL relative; smallest eigenvalue must exceed
    SPD_EIG_RTOL times the largest.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"{name} must be square, got shape {m.shape}")
    scale = np.max(np.abs(m))
    if not np.isfinite(scale):
        raise DataError(f"{name} has non-finite entries")
    if scale == 0.0:
        raise DataError(f"{name} is zero")
    if np.max(np.abs(m - m.T)) > SPD_SYM_RTOL * scale:
        raise DataError(f"{name} is not symmetric to {SPD_SYM_RTOL:g} relative")
    m = 0.5 * (m + m.T)
    w = np.linalg.eigvalsh(m)
    if w[0] <= SPD_EIG_RTOL * w[-1]:
        raise DataError(
            f"{name} is not positive definite to tolerance: "
            f"eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}]"
        )
    return m


def spd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root S of an SPD matrix, S @ S = mat."""
    m = spd_check(mat, "spd_sqrt input")
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(w)) @ v.T


def spd_inverse(mat: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via symmetric eigendecomposition."""
    m = spd_check(mat, "spd_inverse input")
    w, v = np.linalg.eigh(m)
    return (v / w) @ v.T


class TensorField:
    """One SPD matrix per cloud point, with cached inverses and roots.

    Eigendecompositions are done once, in a batch, because the inverses are
    reused across the whole kernel matrix.
    """

    def __init__(self, matrices: np.ndarray):
        mats = np.asarray(matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DataError(f"tensor field must be (n, d, d), got shape {mats.shape}")
        if not np.all(np.isfinite(mats)):
            bad = int(np.argwhere(~np.all(np.isfinite(mats), axis=(1, 2)))[0, 0])
            raise DataError(f"non-finite tensor at index {bad}")
        scale = np.max(np.abs(mats), axis=(1, 2))
        asym = np.max(np.abs(mats - np.transpose(mats, (0, 2, 1))), axis=(1, 2))
        bad = np.nonzero((scale == 0) | (asym > SPD_SYM_RTOL * np.maximum(scale, 1e-300)))[0]
        if bad.size:
            raise DataError(f"tensor at index {int(bad[0])} is not symmetric")
        mats = 0.5 * (mats + np.transpose(mats, (0, 2, 1)))
        w, v = np.linalg.eigh(mats)
        bad = np.nonzero(w[:, 0] <= SPD_EIG_RTOL * w[:, -1])[0]
        if bad.size:
            i = int(bad[0])
            raise DataError(
                f"tensor at index {i} is singular to tolerance: "
                f"eigenvalues [{w[i, 0]:.3e}, {w[i, -1]:.3e}]"
            )
        self.values = mats
        self.values.setflags(write=False)
        self._eigvals = w
        self._eigvecs = v
        self._inverses: np.ndarray | None = None
        self._sqrts: np.ndarray | None = None

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigvals

    @property
    def inverses(self) -> np.ndarray:
        if self._inverses is None:
            v, w = self._eigvecs, self._eigvals
            inv = np.einsum("nik,nk,njk->nij", v, 1.0 / w, v)
            inv = 0.5 * (inv + np.transpose(inv, (0, 2, 1)))
            inv.setflags(write=False)
            self._inverses = inv
        return self._inverses

    @property
    def sqrts(self) -> np.ndarray:
        if self._sqrts is None:
            v, w = self._eigvecs, self._eigvals
            s = np.einsum("nik,nk,njk->nij", v, np.sqrt(w), v)
            s.setflags(write=False)
            self._sqrts = s
        return self._sqrts

    @classmethod
    def constant(cls, mat: np.ndarray, n: int) -> "TensorField":
        m = spd_check(mat, "constant tensor")
        return cls(np.repeat(m[None, :, :], n, axis=0))


def check_alignment(cloud: PointCloud, field: TensorField) -> None:
    if len(field) != cloud.n:
        raise DataError(
            f"tensor field has {len(field)} entries but cloud has {cloud.n} points"
        )
    if field.dim != cloud.dim:
        raise DataError(f"tensor dimension {field.dim} != cloud dimension {cloud.dim}")


def mahalanobis_quadratic(
    x: np.ndarray,
    y: np.ndarray,
    m_x: np.ndarray,
    m_y: np.ndarray,
    topology: Topology,
) -> float:
    """Half-sum quadratic form (1/2) z^T (Mx^-1 + My^-1) z, z = displacement(x, y).

    Zero iff z = 0. Raises DataError if either matrix is singular to
    tolerance. Bulk callers should use TensorField.inverses instead of
    inverting per pair.
    """
    try:
        m_inv_x = spd_inverse(m_x)
    except DataError as e:
        raise DataError(f"tensor at first argument: {e}") from e
    try:
        m_inv_y = spd_inverse(m_y)
    except DataError as e:
        raise DataError(f"tensor at second argument: {e}") from e
    z = displacement(x, y, topology)
    return 0.5 * float(z @ (m_inv_x + m_inv_y) @ z)
