"""Lennard-Jones cluster of 7 particles in 2D with coordination-number CVs.

The collective variables are the second and third central moments of the
per-particle coordination numbers c_i = sum_j 1/(1 + (r_ij/1.5 sigma)^8).
That rational form equals the textbook (1 - u^8)/(1 - u^16) switching
function everywhere it is defined and extends it with the correct limit
1/2 at u = 1, so no special-casing is needed near r = 1.5 sigma.

Atomic dynamics is overdamped Langevin with a harmonic restraint applied
to particles beyond 2 sigma from the cluster's center of mass. Heavy
loops (forces, first-hit ensembles) are numba-compiled; noise for single
trajectories is pre-drawn from one numpy Generator so results are pure
functions of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import DataError, NumericalError
from .geometry import SPD_EIG_RTOL

N_PARTICLES = 7


@dataclass(frozen=True)
class Lj7Params:
    a: float = 1.0
    sigma: float = 1.0
    beta: float = 5.0  # beta^-1 = 0.2 a
    restraint_radius_factor: float = 2.0
    restraint_spring_factor: float = 100.0  # spring constant = factor * a / sigma^2

    @property
    def restraint_radius(self) -> float:
        return self.restraint_radius_factor * self.sigma

    @property
    def restraint_spring(self) -> float:
        return self.restraint_spring_factor * self.a / self.sigma**2

    @property
    def r_star(self) -> float:
        """Pair-potential minimizer 2^(1/6) sigma."""
        return 2.0 ** (1.0 / 6.0) * self.sigma


@dataclass(frozen=True)
class Lj7Config:
    """Validated particle positions, shape (7, 2), units of sigma."""

    positions: np.ndarray
    params: Lj7Params = Lj7Params()

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (N_PARTICLES, 2):
            raise DataError(f"positions must be (7, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise DataError("positions must be finite")
        d = pos[:, None, :] - pos[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        np.fill_diagonal(r2, np.inf)
        if np.min(r2) < (1e-3 * self.params.sigma) ** 2:
            i, j = np.unravel_index(np.argmin(r2), r2.shape)
            raise DataError(f"particles {i} and {j} (nearly) coincide")
        com = pos.mean(axis=0)
        rho = np.linalg.norm(pos - com, axis=1)
        limit = self.params.restraint_radius + 1.0 * self.params.sigma
        if np.any(rho > limit):
            k = int(np.argmax(rho))
            raise DataError(
                f"particle {k} is {rho[k]:.3f} from the center of mass, "
                f"beyond the restraint radius plus margin ({limit:.3f})"
            )
        object.__setattr__(self, "positions", pos)
        self.positions.setflags(write=False)


# --- numba kernels ----------------------------------------------------------


@njit(cache=True)
def _forces_and_energy(pos, a, sigma, r_rest, k_rest, forces):
    """LJ pair forces plus restraint; returns potential energy.

    The restraint gradient accounts for the center of mass depending on
    all particles, so zero-noise dynamics is an exact gradient flow.
    """
    n = pos.shape[0]
    energy = 0.0
    for i in range(n):
        forces[i, 0] = 0.0
        forces[i, 1] = 0.0
    s2 = sigma * sigma
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            r2 = dx * dx + dy * dy
            inv2 = s2 / r2
            inv6 = inv2 * inv2 * inv2
            inv12 = inv6 * inv6
            energy += 4.0 * a * (inv12 - inv6)
            fmag = 24.0 * a * (2.0 * inv12 - inv6) / r2
            forces[i, 0] += fmag * dx
            forces[i, 1] += fmag * dy
            forces[j, 0] -= fmag * dx
            forces[j, 1] -= fmag * dy
    # restraint beyond r_rest from the center of mass
    cx = 0.0
    cy = 0.0
    for i in range(n):
        cx += pos[i, 0]
        cy += pos[i, 1]
    cx /= n
    cy /= n
    ux_sum = 0.0
    uy_sum = 0.0
    for i in range(n):
        dx = pos[i, 0] - cx
        dy = pos[i, 1] - cy
        rho = np.sqrt(dx * dx + dy * dy)
        if rho > r_rest:
            excess = rho - r_rest
            energy += 0.5 * k_rest * excess * excess
            ux = k_rest * excess * dx / rho
            uy = k_rest * excess * dy / rho
            forces[i, 0] -= ux
            forces[i, 1] -= uy
            ux_sum += ux
            uy_sum += uy
    for i in range(n):
        forces[i, 0] += ux_sum / n
        forces[i, 1] += uy_sum / n
    return energy


@njit(cache=True)
def _coordination(pos, sigma, c):
    n = pos.shape[0]
    for i in range(n):
        c[i] = 0.0
    denom = (1.5 * sigma) ** 2
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            t = (dx * dx + dy * dy) / denom
            w = t * t * t * t  # (r/1.5 sigma)^8
            g = 1.0 / (1.0 + w)
            c[i] += g
            c[j] += g


@njit(cache=True)
def _cv_moments(pos, sigma):
    c = np.empty(pos.shape[0])
    _coordination(pos, sigma, c)
    n = c.shape[0]
    cbar = 0.0
    for i in range(n):
        cbar += c[i]
    cbar /= n
    mu2 = 0.0
    mu3 = 0.0
    for i in range(n):
        d = c[i] - cbar
        mu2 += d * d
        mu3 += d * d * d
    return mu2 / n, mu3 / n


@njit(cache=True)
def _em_chunk_lj7(pos, noise, dt, beta, a, sigma, r_rest, k_rest, stride, out, out_off):
    """Advance noise.shape[0] overdamped steps; retain every stride-th frame.

    Returns the number of retained frames, or -(step + 1) if the cluster
    escaped the blow-up bound at that step.
    """
    forces = np.empty_like(pos)
    amp = np.sqrt(2.0 * dt / beta)
    bound = 50.0 * sigma
    k = 0
    for step in range(noise.shape[0]):
        _forces_and_energy(pos, a, sigma, r_rest, k_rest, forces)
        escaped = False
        for i in range(pos.shape[0]):
            pos[i, 0] += forces[i, 0] * dt + amp * noise[step, i, 0]
            pos[i, 1] += forces[i, 1] * dt + amp * noise[step, i, 1]
            if (
                not (abs(pos[i, 0]) <= bound and abs(pos[i, 1]) <= bound)
            ):  # catches NaN too
                escaped = True
        if escaped:
            return -(step + 1)
        if (step + 1) % stride == 0:
            for i in range(pos.shape[0]):
                out[out_off + k, i, 0] = pos[i, 0]
                out[out_off + k, i, 1] = pos[i, 1]
            k += 1
    return k


@njit(cache=True)
def _first_hit_lj7(
    starts,
    seeds,
    dt,
    beta,
    a,
    sigma,
    r_rest,
    k_rest,
    a_center,
    a_shape,
    a_level,
    b_center,
    b_shape,
    b_level,
    max_steps,
    labels,
    steps_taken,
):
    """One chain per start, stopping at first entry of (mu2, mu3) into A or B.

    Each chain reseeds numba's RNG with its own seed, so the result is
    independent of chain execution order.
    """
    n_chains = starts.shape[0]
    amp = np.sqrt(2.0 * dt / beta)
    for chain in range(n_chains):
        np.random.seed(seeds[chain])
        pos = starts[chain].copy()
        forces = np.empty_like(pos)
        labels[chain] = 0
        steps_taken[chain] = max_steps
        bound = 50.0 * sigma
        for step in range(max_steps):
            _forces_and_energy(pos, a, sigma, r_rest, k_rest, forces)
            escaped = False
            for i in range(pos.shape[0]):
                pos[i, 0] += forces[i, 0] * dt + amp * np.random.normal(0.0, 1.0)
                pos[i, 1] += forces[i, 1] * dt + amp * np.random.normal(0.0, 1.0)
                if not (abs(pos[i, 0]) <= bound and abs(pos[i, 1]) <= bound):
                    escaped = True
            if escaped:
                break  # blown-up chain stays censored
            mu2, mu3 = _cv_moments(pos, sigma)
            za1 = mu2 - a_center[0]
            za2 = mu3 - a_center[1]
            va = (
                a_shape[0, 0] * za1 * za1
                + 2.0 * a_shape[0, 1] * za1 * za2
                + a_shape[1, 1] * za2 * za2
            )
            if va <= a_level:
                labels[chain] = 1
                steps_taken[chain] = step + 1
                break
            zb1 = mu2 - b_center[0]
            zb2 = mu3 - b_center[1]
            vb = (
                b_shape[0, 0] * zb1 * zb1
                + 2.0 * b_shape[0, 1] * zb1 * zb2
                + b_shape[1, 1] * zb2 * zb2
            )
            if vb <= b_level:
                labels[chain] = 2
                steps_taken[chain] = step + 1
                break


# --- public operations ------------------------------------------------------


def potential_energy(config: Lj7Config) -> float:
    f = np.empty((N_PARTICLES, 2))
    p = config.params
    return float(
        _forces_and_energy(
            config.positions.copy(), p.a, p.sigma, p.restraint_radius,
            p.restraint_spring, f,
        )
    )


def forces(config: Lj7Config) -> np.ndarray:
    f = np.empty((N_PARTICLES, 2))
    p = config.params
    _forces_and_energy(
        config.positions.copy(), p.a, p.sigma, p.restraint_radius,
        p.restraint_spring, f,
    )
    return f


def coordination_numbers(config: Lj7Config) -> np.ndarray:
    """Smooth neighbor counts c_i; exactly 1/2 per pair at r = 1.5 sigma."""
    c = np.empty(N_PARTICLES)
    _coordination(config.positions.copy(), config.params.sigma, c)
    return c


def coordination_pair_value(r: float, sigma: float = 1.0) -> float:
    """Single-pair switching value 1/(1 + (r/1.5 sigma)^8)."""
    if r <= 0:
        raise DataError(f"pair distance must be positive, got {r}")
    return 1.0 / (1.0 + (r / (1.5 * sigma)) ** 8)


def central_moments(c: np.ndarray) -> tuple[float, float]:
    """Second and third central moments with divisor len(c)."""
    c = np.asarray(c, dtype=float)
    d = c - c.mean()
    return float(np.mean(d**2)), float(np.mean(d**3))


def collective_variables(config: Lj7Config) -> np.ndarray:
    mu2, mu3 = central_moments(coordination_numbers(config))
    return np.array([mu2, mu3])


def _pair_geometry(pos: np.ndarray, sigma: float):
    d = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, np.inf)
    t = r2 / (1.5 * sigma) ** 2
    w = t**4
    g = 1.0 / (1.0 + w)
    # dg[i, j] = d g_ij / d y_i = -8 g^2 w (y_i - y_j) / r^2; zero on the
    # diagonal (g^2 * w is 0 * inf there)
    with np.errstate(invalid="ignore"):
        coef = -8.0 * g * g * w / r2
    np.fill_diagonal(coef, 0.0)
    dg = coef[..., None] * d
    return d, r2, w, g, dg


def cv_jacobian(config: Lj7Config) -> np.ndarray:
    """Analytic d(mu2, mu3)/d(positions), shape (2, 14).

    Chain rule through the coordination numbers:
    dmu2/dc_m = (2/7)(c_m - cbar), dmu3/dc_m = (3/7)[(c_m - cbar)^2 - mu2],
    and dg(r_mj)/dy = -8 g^2 w (y_m - y_j)/r^2 on the m side.
    """
    pos = config.positions
    sigma = config.params.sigma
    d, r2, w, g, dg = _pair_geometry(pos, sigma)
    c = np.sum(g, axis=1)
    cbar = c.mean()
    mu2 = np.mean((c - cbar) ** 2)

    # dc_m/dy_k = -dg[m, k] = dg[k, m] for k != m, and sum_j dg[m, j] at k = m
    jac_c = dg.transpose(1, 0, 2).copy()
    jac_c[np.arange(N_PARTICLES), np.arange(N_PARTICLES)] = dg.sum(axis=1)
    jac_c = jac_c.reshape(N_PARTICLES, 2 * N_PARTICLES)

    dmu2 = (2.0 / N_PARTICLES) * (c - cbar)
    dmu3 = (3.0 / N_PARTICLES) * ((c - cbar) ** 2 - mu2)
    return np.vstack([dmu2 @ jac_c, dmu3 @ jac_c])


def estimate_tensor(config: Lj7Config) -> np.ndarray:
    """Per-sample diffusion tensor J J^T in CV space (2 x 2).

    Symmetric positive semidefinite by construction; a singular result
    (degenerate configuration) raises with the advice to drop the point.
    """
    jac = cv_jacobian(config)
    m = jac @ jac.T
    m = 0.5 * (m + m.T)
    ww = np.linalg.eigvalsh(m)
    if ww[0] <= SPD_EIG_RTOL * ww[-1]:
        raise DataError(
            "estimated tensor is singular to tolerance "
            f"(eigenvalues {ww[0]:.3e}, {ww[-1]:.3e}); drop this point"
        )
    return m


def batch_cvs_and_tensors(frames: np.ndarray, params: Lj7Params):
    """CVs and diffusion tensors for a stack of frames (n, 7, 2).

    Returns (cvs (n, 2), tensors (n, 2, 2), valid (n,) bool); frames with
    singular tensors are flagged invalid rather than raising.
    """
    frames = np.asarray(frames, dtype=float)
    n = frames.shape[0]
    sigma = params.sigma
    d = frames[:, :, None, :] - frames[:, None, :, :]
    r2 = np.einsum("nijk,nijk->nij", d, d)
    ii = np.arange(N_PARTICLES)
    r2[:, ii, ii] = np.inf
    t = r2 / (1.5 * sigma) ** 2
    w = t**4
    g = 1.0 / (1.0 + w)
    c = g.sum(axis=2)
    cbar = c.mean(axis=1, keepdims=True)
    dev = c - cbar
    mu2 = np.mean(dev**2, axis=1)
    mu3 = np.mean(dev**3, axis=1)
    cvs = np.column_stack([mu2, mu3])

    with np.errstate(invalid="ignore"):
        coef = -8.0 * g * g * w / r2
    coef[:, ii, ii] = 0.0
    dg = coef[..., None] * d
    jac_c = dg.transpose(0, 2, 1, 3).copy()
    jac_c[:, ii, ii] = dg.sum(axis=2)
    jac_c = jac_c.reshape(n, N_PARTICLES, 2 * N_PARTICLES)
    dmu2 = (2.0 / N_PARTICLES) * dev
    dmu3 = (3.0 / N_PARTICLES) * (dev**2 - mu2[:, None])
    jac = np.stack(
        [
            np.einsum("ni,nik->nk", dmu2, jac_c),
            np.einsum("ni,nik->nk", dmu3, jac_c),
        ],
        axis=1,
    )
    tensors = jac @ np.transpose(jac, (0, 2, 1))
    tensors = 0.5 * (tensors + np.transpose(tensors, (0, 2, 1)))
    ww = np.linalg.eigvalsh(tensors)
    valid = ww[:, 0] > SPD_EIG_RTOL * ww[:, -1]
    return cvs, tensors, valid


DEFAULT_DT = 5e-4  # largest step that keeps overdamped dynamics stable at beta = 5


def lj7_simulate(
    x0: Lj7Config,
    dt: float,
    n_steps: int,
    stride: int = 1,
    seed: int = 0,
    zero_noise: bool = False,
) -> np.ndarray:
    """Overdamped trajectory of atomic frames, shape (n_steps//stride, 7, 2)."""
    if dt <= 0 or stride < 1 or n_steps < 1:
        raise DataError("dt must be positive and n_steps, stride >= 1")
    p = x0.params
    pos = x0.positions.copy()
    n_ret = n_steps // stride
    out = np.empty((n_ret, N_PARTICLES, 2))
    rng = np.random.default_rng(seed)
    chunk_steps = max(stride, (32_768 // stride) * stride)
    done = 0
    off = 0
    while done < n_steps:
        take = min(chunk_steps, ((n_steps - done) // stride) * stride)
        if take == 0:
            break
        noise = (
            np.zeros((take, N_PARTICLES, 2))
            if zero_noise
            else rng.standard_normal((take, N_PARTICLES, 2))
        )
        k = _em_chunk_lj7(
            pos, noise, dt, p.beta, p.a, p.sigma, p.restraint_radius,
            p.restraint_spring, stride, out, off,
        )
        # the restraint bounds stable motion; escape means the step size
        # was too large for the repulsive wall
        if k < 0:
            raise NumericalError(
                f"LJ7 trajectory blew up at step {done - k}; reduce dt"
            )
        off += k
        done += take
    return out


def hexagon_positions(params: Lj7Params = Lj7Params()) -> np.ndarray:
    """Idealized centered hexagon at pair distance r_star (not relaxed)."""
    r = params.r_star
    ang = np.arange(6) * np.pi / 3.0
    ring = r * np.column_stack([np.cos(ang), np.sin(ang)])
    return np.vstack([[0.0, 0.0], ring])


def trapezoid_positions(params: Lj7Params = Lj7Params()) -> np.ndarray:
    """Idealized 4-3 trapezoid at pair distance r_star (not relaxed)."""
    r = params.r_star
    bottom = np.column_stack([r * np.arange(4), np.zeros(4)])
    top = np.column_stack([r * (0.5 + np.arange(3)), np.full(3, r * np.sqrt(3) / 2)])
    pos = np.vstack([bottom, top])
    return pos - pos.mean(axis=0)


@lru_cache(maxsize=None)
def _minimize_cached(kind: str, a: float, sigma: float) -> tuple:
    from scipy.optimize import minimize

    params = Lj7Params(a=a, sigma=sigma)
    start = hexagon_positions(params) if kind == "hexagon" else trapezoid_positions(params)

    def fun(flat):
        cfg = Lj7Config(positions=flat.reshape(N_PARTICLES, 2), params=params)
        return potential_energy(cfg), -forces(cfg).ravel()

    res = minimize(fun, start.ravel(), jac=True, method="L-BFGS-B", tol=1e-14)
    pos = res.x.reshape(N_PARTICLES, 2)
    pos = pos - pos.mean(axis=0)
    return tuple(map(tuple, pos))


def minimum_configuration(kind: str, params: Lj7Params = Lj7Params()) -> Lj7Config:
    """Relaxed local minimum: 'hexagon' (global) or 'trapezoid'."""
    if kind not in ("hexagon", "trapezoid"):
        raise DataError(f"unknown minimum '{kind}'")
    pos = np.array(_minimize_cached(kind, params.a, params.sigma))
    return Lj7Config(positions=pos, params=params)


class Lj7Simulator:
    """First-hit ensembles in CV space for committor analysis."""

    def __init__(self, params: Lj7Params, dt: float):
        self.params = params
        self.dt = float(dt)

    def first_hit(self, starts, a_spec, b_spec, max_steps: int, seed: int):
        """starts: (n, 7, 2) atomic frames; A/B are ellipse regions in
        (mu2, mu3). Returns labels (1 = A, 2 = B, 0 = censored)."""
        starts = np.asarray(starts, dtype=float)
        if starts.ndim != 3 or starts.shape[1:] != (N_PARTICLES, 2):
            raise DataError(f"starts must be (n, 7, 2), got {starts.shape}")
        n = starts.shape[0]
        seeds = np.random.SeedSequence(seed).generate_state(n).astype(np.int64)
        labels = np.zeros(n, dtype=np.int64)
        steps_taken = np.zeros(n, dtype=np.int64)
        p = self.params
        _first_hit_lj7(
            starts,
            seeds,
            self.dt,
            p.beta,
            p.a,
            p.sigma,
            p.restraint_radius,
            p.restraint_spring,
            np.asarray(a_spec.center, dtype=float),
            np.asarray(a_spec.shape, dtype=float),
            float(a_spec.level),
            np.asarray(b_spec.center, dtype=float),
            np.asarray(b_spec.shape, dtype=float),
            float(b_spec.level),
            int(max_steps),
            labels,
            steps_taken,
        )
        return labels
