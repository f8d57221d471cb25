"""Reactant/product region specs and the discrete committor solve.

The committor q satisfies (L q)_i = 0 at interior points with q = 0 on
the reactant set A and q = 1 on the product set B. Dirichlet data is
imposed by row replacement: boundary rows become identity rows with a
matching right-hand side, which keeps a single sparse solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .errors import DataError, NumericalError
from .geometry import PointCloud, displacement, spd_check
from .generator import GeneratorMatrix

DIRECT_SOLVE_MAX_N = 20_000
# direct factorization fill-in explodes when rows are dense; switch to the
# iterative path above this average stored degree even for small n
DIRECT_SOLVE_MAX_DEGREE = 220
CLAMP_TOL = 1e-8


@dataclass(frozen=True)
class EllipseRegion:
    """Membership: z^T shape z <= level, z = displacement(x, center)."""

    center: np.ndarray
    shape: np.ndarray
    level: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "shape", spd_check(self.shape, "ellipse shape"))
        if not self.level > 0:
            raise DataError(f"ellipse level must be positive, got {self.level}")

    def contains(self, points: np.ndarray, topology) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        z = displacement(pts, self.center[None, :], topology)
        val = np.einsum("nd,de,ne->n", z, self.shape, z)
        return val <= self.level

    def members(self, cloud: PointCloud) -> np.ndarray:
        return np.nonzero(self.contains(cloud.points, cloud.topology))[0]


@dataclass(frozen=True)
class IndexRegion:
    """Explicit index list."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "indices", idx)

    def contains(self, points: np.ndarray, topology) -> np.ndarray:
        raise DataError("an index-list region has no pointwise membership test")

    def members(self, cloud: PointCloud) -> np.ndarray:
        if self.indices.size and (self.indices[0] < 0 or self.indices[-1] >= cloud.n):
            raise DataError(
                f"region index out of range [0, {cloud.n}): "
                f"{self.indices[self.indices >= cloud.n][:3]}"
            )
        return self.indices


RegionSpec = EllipseRegion | IndexRegion


def ball(center, radius: float) -> EllipseRegion:
    """Euclidean ball as an ellipse region."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return EllipseRegion(center=center, shape=np.eye(center.size), level=radius**2)


def classify(cloud: PointCloud, a_spec: RegionSpec, b_spec: RegionSpec):
    """Index sets of A and B members; overlap or emptiness is an error."""
    a_idx = np.asarray(a_spec.members(cloud), dtype=np.int64)
    b_idx = np.asarray(b_spec.members(cloud), dtype=np.int64)
    if a_idx.size == 0:
        raise DataError("reactant set A matches no points")
    if b_idx.size == 0:
        raise DataError("product set B matches no points")
    common = np.intersect1d(a_idx, b_idx)
    if common.size:
        raise DataError(f"A and B overlap at indices {common[:10].tolist()}")
    return a_idx, b_idx


@dataclass(frozen=True)
class CommittorSolution:
    q: np.ndarray
    a_idx: np.ndarray
    b_idx: np.ndarray
    residual: float


def _check_connectivity(L: sp.csr_matrix, a_idx, b_idx) -> None:
    """Every kernel-graph component must touch A or B, else the interior
    block is singular; report a representative stranded point."""
    n = L.shape[0]
    ncomp, labels = csgraph.connected_components(L, directed=False)
    if ncomp == 1:
        return
    touched = np.zeros(ncomp, dtype=bool)
    touched[labels[a_idx]] = True
    touched[labels[b_idx]] = True
    if not touched.all():
        comp = int(np.nonzero(~touched)[0][0])
        rep = int(np.nonzero(labels == comp)[0][0])
        raise DataError(
            f"kernel graph has a component (representative point {rep}) "
            "reaching neither A nor B; the committor system is singular"
        )


def _solve_interior_cg(gen, interior, b_idx, rhs, tol, max_iter) -> np.ndarray:
    """Iterative path for dense-degree or very large systems.

    The kernel chain is reversible, so conjugating the interior block of L
    with sqrt of the stationary weights gives a symmetric negative-definite
    system that plain conjugate gradients solves without breakdown.
    """
    L = gen.matrix
    n = L.shape[0]
    pi = gen.sym_weights
    if pi is None:
        raise NumericalError(
            "iterative committor solve needs the generator's stationary "
            "weights; rebuild the generator with build_generator"
        )
    idx_int = np.nonzero(interior)[0]
    n_int = idx_int.size
    new_index = np.full(n, -1, dtype=np.int64)
    new_index[idx_int] = np.arange(n_int)
    in_b = np.zeros(n, dtype=bool)
    in_b[b_idx] = True

    coo = L.tocoo()
    row_int = interior[coo.row]
    keep = row_int & interior[coo.col]
    A_ii = sp.coo_matrix(
        (coo.data[keep], (new_index[coo.row[keep]], new_index[coo.col[keep]])),
        shape=(n_int, n_int),
    ).tocsr()
    # right-hand side collects -L_ib * q_b = -L_ib over columns in B
    to_b = row_int & in_b[coo.col]
    rhs_int = -np.bincount(
        new_index[coo.row[to_b]], weights=coo.data[to_b], minlength=n_int
    )
    del coo, row_int, keep, to_b
    s = np.sqrt(pi[idx_int])
    S = sp.diags(s) @ A_ii @ sp.diags(1.0 / s)
    # S is similar to A_ii, hence negative definite; flip the sign for CG
    # and symmetrize the round-off away
    S = -0.5 * (S + S.T)
    b_sym = -(s * rhs_int)
    precond = sp.diags(1.0 / S.diagonal())
    y, info = spla.cg(S, b_sym, rtol=tol, atol=0.0, maxiter=max_iter, M=precond)
    if info != 0:
        raise NumericalError(f"CG did not converge within {max_iter} iterations")
    q = rhs.copy()
    q[idx_int] = y / s
    return q


def solve_committor(
    gen: GeneratorMatrix,
    a_idx: np.ndarray,
    b_idx: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> CommittorSolution:
    """Solve the boundary-value problem for the committor on the cloud.

    Sparse direct factorization up to DIRECT_SOLVE_MAX_N points, BiCGSTAB
    above. Values outside [0, 1] by more than CLAMP_TOL raise; smaller
    violations are clamped.
    """
    a_idx = np.asarray(a_idx, dtype=np.int64)
    b_idx = np.asarray(b_idx, dtype=np.int64)
    if a_idx.size == 0 or b_idx.size == 0:
        raise DataError("A and B must both be nonempty")
    if np.intersect1d(a_idx, b_idx).size:
        raise DataError("A and B must be disjoint")
    n = gen.n
    L = gen.matrix
    _check_connectivity(L, a_idx, b_idx)

    boundary = np.zeros(n, dtype=bool)
    boundary[a_idx] = True
    boundary[b_idx] = True
    interior = ~boundary

    rhs = np.zeros(n)
    rhs[b_idx] = 1.0
    if not interior.any():
        return CommittorSolution(q=rhs, a_idx=a_idx, b_idx=b_idx, residual=0.0)

    avg_degree = L.nnz / max(n, 1)
    if n <= DIRECT_SOLVE_MAX_N and avg_degree <= DIRECT_SOLVE_MAX_DEGREE:
        # row replacement: identity rows on A and B, one sparse solve
        scale = np.ones(n)
        scale[boundary] = 0.0
        A = sp.diags(scale) @ L + sp.diags((~interior).astype(float))
        q = spla.spsolve(A.tocsc(), rhs)
    else:
        q = _solve_interior_cg(gen, interior, b_idx, rhs, tol, max_iter)

    q[a_idx] = 0.0
    q[b_idx] = 1.0
    low, high = q.min(), q.max()
    if low < -CLAMP_TOL or high > 1.0 + CLAMP_TOL:
        raise NumericalError(
            f"committor out of range beyond tolerance: [{low:.3e}, {high:.3e}]"
        )
    q = np.clip(q, 0.0, 1.0)

    res_vec = L @ q
    residual = float(np.max(np.abs(res_vec[interior]))) if interior.any() else 0.0
    lscale = float(np.max(np.abs(L.data))) if L.nnz else 1.0
    if residual > 1e-6 * max(1.0, lscale):
        raise NumericalError(
            f"committor residual {residual:.3e} too large for |L| ~ {lscale:.3e}"
        )
    return CommittorSolution(q=q, a_idx=a_idx, b_idx=b_idx, residual=residual)
