"""Experiment harnesses: bandwidth heuristic and sweep, committor analysis.

The bandwidth heuristic is eps = max_i min_{j != i} s(i, j) with s the
half-sum Mahalanobis quadratic when a tensor field is given and the
squared minimum-image distance otherwise. The sweep reruns the whole
kernel -> generator -> committor pipeline per (eps, kernel) pair against
a fixed reference. Committor analysis launches trajectory ensembles from
a committor level set and histograms the fraction reaching B first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .committor import RegionSpec, classify, solve_committor
from .errors import DataError
from .fdref import rms_error
from .generator import build_generator
from .geometry import PointCloud, TensorField, check_alignment, displacement
from .kernels import ISOTROPIC, MAHALANOBIS, isotropic_kernel, mahalanobis_kernel

KERNEL_LABELS = {MAHALANOBIS: "mmap", ISOTROPIC: "dmap"}
N_HISTOGRAM_BINS = 20


def _build_tree(cloud: PointCloud) -> cKDTree:
    per = cloud.topology.period_array
    finite = np.isfinite(per)
    if np.any(finite):
        boxsize = np.where(finite, per, 0.0)
        pts = cloud.points.copy()
        pts[:, finite] = np.mod(pts[:, finite] + per[finite] / 2.0, per[finite])
        return cKDTree(pts, boxsize=boxsize)
    return cKDTree(cloud.points)


def _pair_quadratic(cloud: PointCloud, inv: np.ndarray | None, i, j) -> np.ndarray:
    z = displacement(cloud.points[i], cloud.points[j], cloud.topology)
    if inv is None:
        return np.einsum("kd,kd->k", z, z)
    return 0.5 * np.einsum("kd,kde,ke->k", z, inv[i] + inv[j], z)


def epsilon_heuristic(cloud: PointCloud, field: TensorField | None = None) -> float:
    """max over points of the nearest-neighbor similarity s(i, j).

    Euclidean k-nearest candidates are rescanned under s; a point's
    candidate set is grown whenever the eigenvalue bound
    s >= ||z||^2 / lambda_max cannot certify that the true minimum was
    among them. Duplicate points make the minimum zero and raise.
    """
    n = cloud.n
    if field is not None:
        check_alignment(cloud, field)
        lam_max = float(np.max(field.eigenvalues))
        inv = field.inverses
    else:
        lam_max = 1.0
        inv = None
    tree = _build_tree(cloud)
    # the tree lives on shifted coordinates for periodic dims; query with
    # the same shift
    per = cloud.topology.period_array
    finite = np.isfinite(per)
    qpts = cloud.points.copy()
    if np.any(finite):
        qpts[:, finite] = np.mod(qpts[:, finite] + per[finite] / 2.0, per[finite])
    k = min(n, 17)
    dist, idx = tree.query(qpts, k=k)
    # column 0 is the point itself at distance 0
    if np.any(dist[:, 1] == 0.0):
        i = int(np.nonzero(dist[:, 1] == 0.0)[0][0])
        raise DataError(f"duplicate points, e.g. indices {i} and {int(idx[i, 1])}")

    rows = np.repeat(np.arange(n), k - 1)
    cols = idx[:, 1:].ravel()
    s_all = _pair_quadratic(cloud, inv, rows, cols).reshape(n, k - 1)
    per_point = s_all.min(axis=1)
    # points whose certified reach exceeds the k-th Euclidean neighbor may
    # have a closer candidate under s; rescan them with a ball query
    reach = np.sqrt(per_point * lam_max) * (1.0 + 1e-12)
    suspect = np.nonzero((reach > dist[:, -1]) & (k < n))[0]
    for i in suspect:
        more = tree.query_ball_point(qpts[i], reach[i])
        more = np.array([m for m in more if m != i], dtype=np.int64)
        if more.size:
            s = _pair_quadratic(cloud, inv, np.full(more.shape, i), more)
            per_point[i] = min(per_point[i], float(np.min(s)))
    if np.any(per_point == 0.0):
        i = int(np.nonzero(per_point == 0.0)[0][0])
        raise DataError(f"duplicate points detected at index {i}")
    return float(np.max(per_point))


@dataclass(frozen=True)
class EpsSweepRow:
    epsilon: float
    kernel: str  # "mmap" or "dmap"
    rms: float | None
    error: str | None = None


def run_pipeline(
    cloud: PointCloud,
    field: TensorField | None,
    a_spec: RegionSpec,
    b_spec: RegionSpec,
    beta: float,
    epsilon: float,
    kernel_kind: str,
    alpha: float = 0.5,
):
    """Kernel -> generator -> committor in one call; returns (solution, gen)."""
    if kernel_kind == MAHALANOBIS:
        if field is None:
            raise DataError("the Mahalanobis kernel needs a tensor field")
        kern = mahalanobis_kernel(cloud, field, epsilon)
    elif kernel_kind == ISOTROPIC:
        kern = isotropic_kernel(cloud, epsilon)
    else:
        raise DataError(f"unknown kernel kind '{kernel_kind}'")
    gen = build_generator(kern, alpha=alpha, beta=beta)
    a_idx, b_idx = classify(cloud, a_spec, b_spec)
    sol = solve_committor(gen, a_idx, b_idx)
    return sol, gen


def epsilon_sweep(
    cloud: PointCloud,
    field: TensorField | None,
    a_spec: RegionSpec,
    b_spec: RegionSpec,
    beta: float,
    eps_list,
    reference_q: np.ndarray,
    mask,
    kernels: tuple[str, ...] = (MAHALANOBIS, ISOTROPIC),
    alpha: float = 0.5,
) -> list[EpsSweepRow]:
    """One row per (eps, kernel); solve failures are recorded per row."""
    reference_q = np.asarray(reference_q, dtype=float)
    if reference_q.shape != (cloud.n,):
        raise DataError("reference committor is not aligned with the cloud")
    rows: list[EpsSweepRow] = []
    for kind in kernels:
        for eps in eps_list:
            try:
                sol, _ = run_pipeline(
                    cloud, field, a_spec, b_spec, beta, float(eps), kind, alpha
                )
                rms = rms_error(sol.q, reference_q, mask)
                rows.append(EpsSweepRow(float(eps), KERNEL_LABELS[kind], rms))
            except Exception as e:  # recorded, not fatal: sweep must survive
                rows.append(
                    EpsSweepRow(float(eps), KERNEL_LABELS[kind], None, error=str(e))
                )
    return rows


def sample_level_set(
    cloud: PointCloud,
    q: np.ndarray,
    level: float,
    tol: float = 0.05,
    n_pt: int = 50,
    seed: int = 0,
) -> np.ndarray:
    """Up to n_pt indices drawn without replacement from |q - level| <= tol."""
    q = np.asarray(q, dtype=float)
    if q.shape != (cloud.n,):
        raise DataError("committor vector is not aligned with the cloud")
    cand = np.nonzero(np.abs(q - level) <= tol)[0]
    if cand.size == 0:
        raise DataError(
            f"no points with |q - {level}| <= {tol}; increase the tolerance"
        )
    if cand.size <= n_pt:
        return cand
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(cand, size=n_pt, replace=False))


@dataclass(frozen=True)
class PbHistogram:
    """Normalized histogram of per-start-point hit fractions p_B."""

    bin_edges: np.ndarray
    counts: np.ndarray
    n_pt: int
    n_e: int
    mode: float
    censored_fraction: float
    p_values: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def mode_bin(self) -> int:
        return int(np.argmax(self.counts))


def committor_analysis(
    start_points: np.ndarray,
    simulator,
    a_spec,
    b_spec,
    n_e: int,
    max_steps: int,
    seed: int = 0,
) -> PbHistogram:
    """Launch n_e trajectories per start point and histogram p_B = N_B/N_hit.

    Trajectories that reach neither set within max_steps are censored and
    excluded from the per-point ratio; a start point with every replica
    censored is dropped from the histogram (still counted in
    censored_fraction). All replicas censored overall is an error.
    """
    starts = np.asarray(start_points, dtype=float)
    n_pt = starts.shape[0]
    if n_pt == 0:
        raise DataError("no start points")
    if n_e < 1:
        raise DataError("n_e must be >= 1")
    tiled = np.repeat(starts, n_e, axis=0)
    labels = simulator.first_hit(tiled, a_spec, b_spec, max_steps, seed)
    labels = np.asarray(labels).reshape(n_pt, n_e)
    censored = labels == 0
    n_hit = (~censored).sum(axis=1)
    usable = n_hit > 0
    if not usable.any():
        raise DataError(f"all {n_pt * n_e} trajectories were censored")
    p_b = np.full(n_pt, np.nan)
    p_b[usable] = (labels == 2).sum(axis=1)[usable] / n_hit[usable]

    edges = np.linspace(0.0, 1.0, N_HISTOGRAM_BINS + 1)
    vals = p_b[usable]
    which = np.clip(np.digitize(vals, edges) - 1, 0, N_HISTOGRAM_BINS - 1)
    counts = np.bincount(which, minlength=N_HISTOGRAM_BINS).astype(float)
    counts /= counts.sum()
    mode = 0.5 * (edges[np.argmax(counts)] + edges[np.argmax(counts) + 1])
    return PbHistogram(
        bin_edges=edges,
        counts=counts,
        n_pt=n_pt,
        n_e=n_e,
        mode=float(mode),
        censored_fraction=float(censored.mean()),
        p_values=p_b,
    )


class CvSdeSimulator:
    """Adapter running CV-space SDE ensembles for committor analysis."""

    def __init__(self, system, dt: float, check_every: int = 8):
        self.system = system
        self.dt = float(dt)
        self.check_every = check_every

    def first_hit(self, starts, a_spec, b_spec, max_steps: int, seed: int):
        from .sampling import first_hit_ensemble

        return first_hit_ensemble(
            self.system,
            starts,
            a_spec,
            b_spec,
            self.dt,
            max_steps,
            seed,
            check_every=self.check_every,
        )
