"""Independent committor oracles on grids and intervals.

The 2D solver discretizes the divergence-form operator
``div(exp(-beta F) M grad q)`` on a uniform periodic grid with fluxes on
half-index faces and arithmetic-mean face coefficients; its null space
with Dirichlet data on A and B is the committor. The 1D oracle integrates
the closed form q(x) = int_a^x exp(beta F)/M ds / int_a^b exp(beta F)/M ds
by adaptive Simpson quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .committor import RegionSpec, classify
from .errors import DataError, NumericalError
from .geometry import PointCloud, Topology

SIMPSON_RTOL = 1e-10


@dataclass(frozen=True)
class Grid2D:
    """Uniform N1 x N2 grid on a 2D torus with nodal F and M fields.

    Nodes are at -period/2 + k*h in each dimension; arrays are indexed
    (i, j) with the second index fastest in flattened (row-major) order.
    """

    topology: Topology
    free_energy: np.ndarray  # (N1, N2)
    tensors: np.ndarray  # (N1, N2, 2, 2)

    def __post_init__(self):
        if self.topology.dim != 2 or not all(
            p is not None for p in self.topology.periods
        ):
            raise DataError("Grid2D requires a fully periodic 2D topology")
        F = np.asarray(self.free_energy, dtype=float)
        M = np.asarray(self.tensors, dtype=float)
        if F.ndim != 2 or F.shape[0] < 8 or F.shape[1] < 8:
            raise DataError(f"grid must be at least 8x8, got {F.shape}")
        if M.shape != F.shape + (2, 2):
            raise DataError(f"tensor grid shape {M.shape} does not match {F.shape}")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(M))):
            raise DataError("grid fields must be finite")
        asym = np.max(np.abs(M[..., 0, 1] - M[..., 1, 0]))
        if asym > 1e-12 * max(1.0, np.max(np.abs(M))):
            raise DataError("grid tensors must be symmetric")
        det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
        tr = M[..., 0, 0] + M[..., 1, 1]
        if np.any(det <= 0) or np.any(tr <= 0):
            bad = np.argwhere((det <= 0) | (tr <= 0))[0]
            raise DataError(f"grid tensor at node {tuple(bad)} is not SPD")
        object.__setattr__(self, "free_energy", F)
        object.__setattr__(self, "tensors", M)

    @property
    def shape(self) -> tuple[int, int]:
        return self.free_energy.shape

    @property
    def spacings(self) -> tuple[float, float]:
        p1, p2 = self.topology.periods
        return p1 / self.shape[0], p2 / self.shape[1]

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        p1, p2 = self.topology.periods
        n1, n2 = self.shape
        return (
            -p1 / 2 + np.arange(n1) * (p1 / n1),
            -p2 / 2 + np.arange(n2) * (p2 / n2),
        )

    def nodes(self) -> np.ndarray:
        x1, x2 = self.axes()
        g1, g2 = np.meshgrid(x1, x2, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])

    def node_cloud(self) -> PointCloud:
        return PointCloud(points=self.nodes(), topology=self.topology)

    @classmethod
    def from_system(cls, system, n1: int, n2: int) -> "Grid2D":
        """Tabulate a CvSystem's F and M on an n1 x n2 grid."""
        p1, p2 = system.topology.periods
        if p1 is None or p2 is None:
            raise DataError("from_system requires a periodic system")
        topo = Topology((p1, p2))
        x1 = -p1 / 2 + np.arange(n1) * (p1 / n1)
        x2 = -p2 / 2 + np.arange(n2) * (p2 / n2)
        g1, g2 = np.meshgrid(x1, x2, indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        F = system.free_energy(pts).reshape(n1, n2)
        M = system.tensor(pts).reshape(n1, n2, 2, 2)
        return cls(topology=topo, free_energy=F, tensors=M)


def divergence_form_operator(grid: Grid2D, beta: float) -> sp.csr_matrix:
    """Sparse discretization of div(exp(-beta F) M grad .) on the torus.

    Nine-point stencil: normal fluxes use two-point differences across each
    face, mixed fluxes use the four-point tangential average at the face.
    Every stencil row sums to zero by construction.
    """
    n1, n2 = grid.shape
    h1, h2 = grid.spacings
    w = np.exp(-beta * grid.free_energy)[..., None, None] * grid.tensors
    w11, w12, w22 = w[..., 0, 0], w[..., 0, 1], w[..., 1, 1]

    idx = np.arange(n1 * n2).reshape(n1, n2)
    ip1 = np.roll(idx, -1, axis=0)
    im1 = np.roll(idx, 1, axis=0)
    jp1 = np.roll(idx, -1, axis=1)
    jm1 = np.roll(idx, 1, axis=1)
    ip1jp1 = np.roll(ip1, -1, axis=1)
    ip1jm1 = np.roll(ip1, 1, axis=1)
    im1jp1 = np.roll(im1, -1, axis=1)
    im1jm1 = np.roll(im1, 1, axis=1)

    a_p = 0.5 * (w11 + np.roll(w11, -1, axis=0))
    a_m = 0.5 * (w11 + np.roll(w11, 1, axis=0))
    b_p = 0.5 * (w22 + np.roll(w22, -1, axis=1))
    b_m = 0.5 * (w22 + np.roll(w22, 1, axis=1))
    cx_p = 0.5 * (w12 + np.roll(w12, -1, axis=0))
    cx_m = 0.5 * (w12 + np.roll(w12, 1, axis=0))
    cy_p = 0.5 * (w12 + np.roll(w12, -1, axis=1))
    cy_m = 0.5 * (w12 + np.roll(w12, 1, axis=1))

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(coef: np.ndarray, col: np.ndarray) -> None:
        rows.append(idx.ravel())
        cols.append(col.ravel())
        vals.append(coef.ravel())

    inv_h1sq = 1.0 / (h1 * h1)
    inv_h2sq = 1.0 / (h2 * h2)
    inv_cross = 1.0 / (4.0 * h1 * h2)

    # x-direction normal fluxes
    add(a_p * inv_h1sq, ip1)
    add(-a_p * inv_h1sq, idx)
    add(a_m * inv_h1sq, im1)
    add(-a_m * inv_h1sq, idx)
    # x-face mixed fluxes
    add(cx_p * inv_cross, jp1)
    add(cx_p * inv_cross, ip1jp1)
    add(-cx_p * inv_cross, jm1)
    add(-cx_p * inv_cross, ip1jm1)
    add(-cx_m * inv_cross, im1jp1)
    add(-cx_m * inv_cross, jp1)
    add(cx_m * inv_cross, im1jm1)
    add(cx_m * inv_cross, jm1)
    # y-direction normal fluxes
    add(b_p * inv_h2sq, jp1)
    add(-b_p * inv_h2sq, idx)
    add(b_m * inv_h2sq, jm1)
    add(-b_m * inv_h2sq, idx)
    # y-face mixed fluxes
    add(cy_p * inv_cross, ip1)
    add(cy_p * inv_cross, ip1jp1)
    add(-cy_p * inv_cross, im1)
    add(-cy_p * inv_cross, im1jp1)
    add(-cy_m * inv_cross, ip1jm1)
    add(-cy_m * inv_cross, ip1)
    add(cy_m * inv_cross, im1jm1)
    add(cy_m * inv_cross, im1)

    n = n1 * n2
    op = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    op.sum_duplicates()
    return op


def fd_committor(
    grid: Grid2D,
    beta: float,
    a_spec: RegionSpec,
    b_spec: RegionSpec,
) -> np.ndarray:
    """Committor on the grid nodes, returned in (N1, N2) layout."""
    cloud = grid.node_cloud()
    try:
        a_idx, b_idx = classify(cloud, a_spec, b_spec)
    except DataError as e:
        raise DataError(
            f"{e} (a grid region smaller than one cell matches no node)"
        ) from e
    op = divergence_form_operator(grid, beta)
    n = op.shape[0]
    boundary = np.zeros(n, dtype=bool)
    boundary[a_idx] = True
    boundary[b_idx] = True
    keep = sp.diags((~boundary).astype(float))
    A = (keep @ op + sp.diags(boundary.astype(float))).tocsc()
    rhs = np.zeros(n)
    rhs[b_idx] = 1.0
    q = spla.spsolve(A, rhs)
    q[a_idx] = 0.0
    q[b_idx] = 1.0
    if q.min() < -1e-8 or q.max() > 1.0 + 1e-8:
        raise NumericalError(
            f"grid committor out of range: [{q.min():.3e}, {q.max():.3e}]"
        )
    return np.clip(q, 0.0, 1.0).reshape(grid.shape)


def _adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    rtol: float,
    max_depth: int = 50,
) -> float:
    """Classic recursive Simpson with Richardson acceptance test."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth >= max_depth:
            return left + right
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, xm, f0, fl, f1, left, tol / 2.0, depth + 1) + recurse(
            xm, x2, f1, fr, f2, right, tol / 2.0, depth + 1
        )

    if a == b:
        return 0.0
    f0, f2 = f(a), f(b)
    f1 = f(0.5 * (a + b))
    whole = simpson(a, b, f0, f1, f2)
    scale = max(abs(whole), 1e-300)
    return recurse(a, b, f0, f1, f2, whole, rtol * scale, 0)


def committor_1d(
    free_energy: Callable[[float], float],
    tensor: Callable[[float], float],
    beta: float,
    a: float,
    b: float,
    rtol: float = SIMPSON_RTOL,
):
    """1D committor between x = a (q = 0) and x = b (q = 1).

    Returns a callable accepting scalars or arrays; strictly increasing on
    [a, b], clipped to {0, 1} outside. Raises on a nonpositive tensor
    sample.
    """
    if not a < b:
        raise DataError(f"need a < b, got a={a}, b={b}")

    def integrand(s: float) -> float:
        m = tensor(s)
        if not m > 0:
            raise DataError(f"tensor must be positive on [a, b]; M({s}) = {m}")
        return float(np.exp(beta * free_energy(s)) / m)

    denom = _adaptive_simpson(integrand, a, b, rtol)

    def q_fn(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(xs.shape)
        order = np.argsort(xs)
        acc = 0.0
        prev = a
        for k in order:
            xv = xs[k]
            if xv <= a:
                out[k] = 0.0
                continue
            if xv >= b:
                out[k] = 1.0
                continue
            acc += _adaptive_simpson(integrand, prev, xv, rtol)
            prev = xv
            out[k] = acc / denom
        out = np.clip(out, 0.0, 1.0)
        return out if np.ndim(x) else float(out[0])

    return q_fn


def bilinear_interp(grid: Grid2D, values: np.ndarray, cloud: PointCloud) -> np.ndarray:
    """Periodic bilinear interpolation of nodal values onto cloud points."""
    if cloud.dim != 2:
        raise DataError("bilinear interpolation requires a 2D cloud")
    for p_grid, p_cloud in zip(grid.topology.periods, cloud.topology.periods):
        if p_cloud is None or abs(p_grid - p_cloud) > 1e-12 * p_grid:
            raise DataError("cloud topology does not match the grid periods")
    vals = np.asarray(values, dtype=float)
    if vals.shape != grid.shape:
        raise DataError(f"values shape {vals.shape} != grid shape {grid.shape}")
    n1, n2 = grid.shape
    h1, h2 = grid.spacings
    p1, p2 = grid.topology.periods
    u = np.mod((cloud.points[:, 0] + p1 / 2) / h1, n1)
    v = np.mod((cloud.points[:, 1] + p2 / 2) / h2, n2)
    i0 = np.floor(u).astype(np.int64) % n1
    j0 = np.floor(v).astype(np.int64) % n2
    fu = u - np.floor(u)
    fv = v - np.floor(v)
    i1 = (i0 + 1) % n1
    j1 = (j0 + 1) % n2
    return (
        vals[i0, j0] * (1 - fu) * (1 - fv)
        + vals[i1, j0] * fu * (1 - fv)
        + vals[i0, j1] * (1 - fu) * fv
        + vals[i1, j1] * fu * fv
    )


def rms_error(q_approx: np.ndarray, q_ref: np.ndarray, mask) -> float:
    """Root-mean-square difference over the masked indices."""
    qa = np.asarray(q_approx, dtype=float)
    qr = np.asarray(q_ref, dtype=float)
    if qa.shape != qr.shape:
        raise DataError(f"shape mismatch: {qa.shape} vs {qr.shape}")
    m = np.asarray(mask)
    if m.dtype == bool:
        m = np.nonzero(m)[0]
    if m.size == 0:
        raise DataError("mask is empty")
    diff = qa[m] - qr[m]
    return float(np.sqrt(np.mean(diff * diff)))
