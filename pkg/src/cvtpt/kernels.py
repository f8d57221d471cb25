"""Sparse symmetric kernel matrices over a point cloud.

Two kernels are provided: the isotropic Gaussian
``exp(-||z||^2 / (2 eps))`` and the anisotropic half-sum form
``exp(-(1/(4 eps)) z^T (M_i^-1 + M_j^-1) z)`` with z the minimum-image
displacement. Pairs whose exponent argument exceeds the cutoff (default
36, kernel value below ~2e-16) are dropped from the sparse structure.

Each unordered pair is evaluated once and mirrored, so K is exactly
symmetric. Candidate pairs come from a periodic KD-tree range query when
the reach is small relative to the cloud extent; otherwise a blocked
all-pairs scan is cheaper and bounds memory by processing row blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import DataError
from .geometry import PointCloud, TensorField, check_alignment, displacement

DEFAULT_CUTOFF = 36.0
_DENSE_FRACTION = 0.05  # switch to blocked scan above this candidate density
_BLOCK_ROWS = 256

ISOTROPIC = "isotropic"
MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True)
class KernelMatrix:
    """Sparse symmetric kernel with unit diagonal."""

    matrix: sp.csr_matrix
    epsilon: float
    kind: str
    cutoff: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _extents(cloud: PointCloud) -> np.ndarray:
    per = cloud.topology.period_array
    spans = cloud.points.max(axis=0) - cloud.points.min(axis=0)
    return np.where(np.isfinite(per), per, np.maximum(spans, 1e-300))


def _use_tree(cloud: PointCloud, r_cut: float) -> bool:
    ext = _extents(cloud)
    frac = np.prod(np.minimum(1.0, 2.0 * r_cut / ext))
    per = cloud.topology.period_array
    finite = np.isfinite(per)
    if np.any(finite) and r_cut >= 0.5 * np.min(per[finite]):
        return False  # scipy's periodic tree cannot search that far
    return frac < _DENSE_FRACTION


def _tree_pairs(cloud: PointCloud, r_cut: float) -> tuple[np.ndarray, np.ndarray]:
    pts = cloud.points
    per = cloud.topology.period_array
    finite = np.isfinite(per)
    if np.any(finite):
        boxsize = np.where(finite, per, 0.0)
        shifted = pts.copy()
        shifted[:, finite] = np.mod(shifted[:, finite] + per[finite] / 2.0, per[finite])
        tree = cKDTree(shifted, boxsize=boxsize)
    else:
        tree = cKDTree(pts)
    pairs = tree.query_pairs(r_cut, output_type="ndarray")
    if pairs.size == 0:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int32)
    return pairs[:, 0].astype(np.int32), pairs[:, 1].astype(np.int32)


def _pair_exponents_iso(cloud: PointCloud, i, j, epsilon: float) -> np.ndarray:
    z = displacement(cloud.points[i], cloud.points[j], cloud.topology)
    return np.einsum("kd,kd->k", z, z) / (2.0 * epsilon)


def _pair_exponents_mahal(
    cloud: PointCloud, inv: np.ndarray, i, j, epsilon: float
) -> np.ndarray:
    z = displacement(cloud.points[i], cloud.points[j], cloud.topology)
    d = cloud.dim
    q = np.zeros(z.shape[0])
    for a in range(d):
        coef = inv[i, a, a] + inv[j, a, a]
        q += coef * z[:, a] * z[:, a]
        for b in range(a + 1, d):
            coef = inv[i, a, b] + inv[j, a, b]
            q += 2.0 * coef * z[:, a] * z[:, b]
    return q / (4.0 * epsilon)


def _blocked_upper_pairs(cloud: PointCloud, exponent_row_block, cutoff: float):
    """Scan i < j in row blocks; exponent_row_block(rows, all_pts) -> (B, n)."""
    n = cloud.n
    keep_i: list[np.ndarray] = []
    keep_j: list[np.ndarray] = []
    keep_e: list[np.ndarray] = []
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        expo = exponent_row_block(np.arange(start, stop), cloud.points)
        # restrict to the strict upper triangle
        cols = np.arange(n)[None, :]
        rows = np.arange(start, stop)[:, None]
        mask = (expo <= cutoff) & (cols > rows)
        bi, bj = np.nonzero(mask)
        keep_i.append((bi + start).astype(np.int32))
        keep_j.append(bj.astype(np.int32))
        keep_e.append(expo[mask])
    return (
        np.concatenate(keep_i),
        np.concatenate(keep_j),
        np.concatenate(keep_e),
    )


def _assemble(n: int, rows, cols, exponents, cutoff: float) -> sp.csr_matrix:
    """Symmetric CSR from upper-triangle exponents plus the unit diagonal."""
    keep = exponents <= cutoff
    rows, cols = rows[keep], cols[keep]
    vals = np.exp(-exponents[keep])
    diag = np.arange(n, dtype=np.int32)
    data = np.concatenate([vals, vals, np.ones(n)])
    i = np.concatenate([rows, cols, diag])
    j = np.concatenate([cols, rows, diag])
    mat = sp.coo_matrix((data, (i, j)), shape=(n, n)).tocsr()
    mat.sort_indices()
    return mat


def isotropic_kernel(
    cloud: PointCloud, epsilon: float, cutoff: float = DEFAULT_CUTOFF
) -> KernelMatrix:
    """Gaussian kernel K_ij = exp(-||z_ij||^2 / (2 eps))."""
    if epsilon <= 0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    r_cut = float(np.sqrt(2.0 * cutoff * epsilon))
    if _use_tree(cloud, r_cut):
        rows, cols = _tree_pairs(cloud, r_cut)
        expo = _pair_exponents_iso(cloud, rows, cols, epsilon)
    else:
        def block(rows_idx, pts):
            z = displacement(pts[rows_idx][:, None, :], pts[None, :, :], cloud.topology)
            return np.einsum("bnd,bnd->bn", z, z) / (2.0 * epsilon)

        rows, cols, expo = _blocked_upper_pairs(cloud, block, cutoff)
    mat = _assemble(cloud.n, rows, cols, expo, cutoff)
    return KernelMatrix(matrix=mat, epsilon=float(epsilon), kind=ISOTROPIC, cutoff=cutoff)


def mahalanobis_kernel(
    cloud: PointCloud,
    field: TensorField,
    epsilon: float,
    cutoff: float = DEFAULT_CUTOFF,
) -> KernelMatrix:
    """Anisotropic kernel K_ij = exp(-(1/(4 eps)) z^T (M_i^-1 + M_j^-1) z).

    Assembled from the symmetric quadratic form once per pair, so the
    matrix is exactly symmetric.
    """
    if epsilon <= 0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    check_alignment(cloud, field)
    # z^T (Mi^-1 + Mj^-1) z >= 2 ||z||^2 / lambda_max, so the exponent
    # exceeds the cutoff whenever ||z||^2 > 2 * cutoff * eps * lambda_max.
    lam_max = float(np.max(field.eigenvalues))
    r_cut = float(np.sqrt(2.0 * cutoff * epsilon * lam_max))
    inv = field.inverses
    d = cloud.dim
    if _use_tree(cloud, r_cut):
        rows, cols = _tree_pairs(cloud, r_cut)
        expo = np.empty(rows.shape[0])
        block_len = 2_000_000
        for s in range(0, rows.shape[0], block_len):
            sl = slice(s, min(s + block_len, rows.shape[0]))
            expo[sl] = _pair_exponents_mahal(cloud, inv, rows[sl], cols[sl], epsilon)
    else:
        comp = {
            (a, b): np.ascontiguousarray(inv[:, a, b])
            for a in range(d)
            for b in range(a, d)
        }

        def block(rows_idx, pts):
            z = displacement(pts[rows_idx][:, None, :], pts[None, :, :], cloud.topology)
            q = np.zeros((rows_idx.size, pts.shape[0]))
            for a in range(d):
                coef = comp[(a, a)][rows_idx][:, None] + comp[(a, a)][None, :]
                q += coef * z[..., a] * z[..., a]
                for b in range(a + 1, d):
                    coef = comp[(a, b)][rows_idx][:, None] + comp[(a, b)][None, :]
                    q += 2.0 * coef * z[..., a] * z[..., b]
            return q / (4.0 * epsilon)

        rows, cols, expo = _blocked_upper_pairs(cloud, block, cutoff)
    mat = _assemble(cloud.n, rows, cols, expo, cutoff)
    return KernelMatrix(matrix=mat, epsilon=float(epsilon), kind=MAHALANOBIS, cutoff=cutoff)


def save_triplets(kernel: KernelMatrix, path) -> None:
    """Debugging dump: one `row col value` line per stored entry."""
    coo = kernel.matrix.tocoo()
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
