"""Euler-Maruyama integration of CV-space dynamics and transition counting.

The update is x <- x + (-M grad F + beta^-1 div M) dt + sqrt(2 beta^-1 dt)
M^{1/2} xi with xi standard normal. Noise is pre-drawn in chunks from one
numpy Generator, so a trajectory is a pure function of its seed no matter
which execution path advances it: built-in systems have numba-compiled
steppers keyed by ``stepper_kind``, everything else runs through the
generic numpy loop. The two paths are consistency-tested against each
other on short horizons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .committor import RegionSpec
from .errors import DataError, NumericalError
from .geometry import Topology, wrap
from .systems import CvSystem

_CHUNK_TARGET = 65_536


@dataclass(frozen=True)
class CvTrajectory:
    """Strided sample of one trajectory: points at steps stride, 2*stride, ..."""

    points: np.ndarray
    dt: float
    stride: int
    beta: float
    topology: Topology

    def __post_init__(self):
        if not np.all(np.isfinite(self.points)):
            raise DataError("trajectory contains non-finite points")
        if self.stride < 1:
            raise DataError(f"stride must be >= 1, got {self.stride}")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def elapsed_time(self) -> float:
        return self.n * self.stride * self.dt


# --- numba chunk steppers for the built-in systems -------------------------
#
# Each advances `noise.shape[0]` steps in place and writes every stride-th
# state into `out` starting at slot `out_off`. The analytic formulas mirror
# the corresponding CvSystem callables; tests enforce agreement.


@njit(cache=True)
def _chunk_quadratic2d(x, noise, dt, beta, stride, out, out_off, params):
    h11, h12, h21, h22 = params[0], params[1], params[2], params[3]
    m11, m12, m21, m22 = params[4], params[5], params[6], params[7]
    # constant tensor: square root fixed for the whole run
    s = np.sqrt(m11 * m22 - m12 * m21)
    t = np.sqrt(m11 + m22 + 2.0 * s)
    r11, r12, r22 = (m11 + s) / t, m12 / t, (m22 + s) / t
    amp = np.sqrt(2.0 * dt / beta)
    k = 0
    for step in range(noise.shape[0]):
        g1 = h11 * x[0] + h12 * x[1]
        g2 = h21 * x[0] + h22 * x[1]
        dx1 = -(m11 * g1 + m12 * g2) * dt
        dx2 = -(m21 * g1 + m22 * g2) * dt
        x[0] += dx1 + amp * (r11 * noise[step, 0] + r12 * noise[step, 1])
        x[1] += dx2 + amp * (r12 * noise[step, 0] + r22 * noise[step, 1])
        if (step + 1) % stride == 0:
            out[out_off + k, 0] = x[0]
            out[out_off + k, 1] = x[1]
            k += 1
    return k


@njit(cache=True)
def _chunk_double_well_1d(x, noise, dt, beta, stride, out, out_off, params):
    amp = np.sqrt(2.0 * dt / beta)
    k = 0
    for step in range(noise.shape[0]):
        xv = x[0]
        m = 1.0 + 0.9 * np.sin(3.0 * xv)
        grad = 4.0 * xv * (xv * xv - 1.0)
        divm = 2.7 * np.cos(3.0 * xv)
        x[0] = xv + (-m * grad + divm / beta) * dt + amp * np.sqrt(m) * noise[step, 0]
        if (step + 1) % stride == 0:
            out[out_off + k, 0] = x[0]
            k += 1
    return k


@njit(cache=True)
def _chunk_torus2d(x, noise, dt, beta, stride, out, out_off, params):
    two_pi = 2.0 * np.pi
    amp = np.sqrt(2.0 * dt / beta)
    k = 0
    for step in range(noise.shape[0]):
        phi, psi = x[0], x[1]
        g1 = -np.sin(phi) - np.sin(phi - psi)
        g2 = np.sin(phi - psi)
        m11 = 1.5 + 0.5 * np.sin(phi)
        m22 = m11
        m12 = 0.3 * np.cos(psi)
        div1 = 0.5 * np.cos(phi) - 0.3 * np.sin(psi)
        s = np.sqrt(m11 * m22 - m12 * m12)
        t = np.sqrt(m11 + m22 + 2.0 * s)
        r11, r12, r22 = (m11 + s) / t, m12 / t, (m22 + s) / t
        d1 = (-(m11 * g1 + m12 * g2) + div1 / beta) * dt
        d2 = (-(m12 * g1 + m22 * g2)) * dt
        phi += d1 + amp * (r11 * noise[step, 0] + r12 * noise[step, 1])
        psi += d2 + amp * (r12 * noise[step, 0] + r22 * noise[step, 1])
        # canonical wrap to [-pi, pi)
        phi = np.mod(phi + np.pi, two_pi) - np.pi
        psi = np.mod(psi + np.pi, two_pi) - np.pi
        x[0], x[1] = phi, psi
        if (step + 1) % stride == 0:
            out[out_off + k, 0] = phi
            out[out_off + k, 1] = psi
            k += 1
    return k


_STEPPERS = {
    "quadratic2d": _chunk_quadratic2d,
    "double_well_1d": _chunk_double_well_1d,
    "torus2d": _chunk_torus2d,
}


def _generic_chunk(system: CvSystem, x, noise, dt, stride, out, out_off):
    """Reference numpy stepper; one row of callables per step."""
    beta = system.beta
    amp = np.sqrt(2.0 * dt / beta)
    k = 0
    for step in range(noise.shape[0]):
        xr = x[None, :]
        drift = system.drift(xr)[0]
        root = system.sqrt_tensor(xr)[0]
        x[:] = x + drift * dt + amp * (root @ noise[step])
        x[:] = wrap(x, system.topology)
        if (step + 1) % stride == 0:
            out[out_off + k] = x
            k += 1
    return k


def simulate_cv(
    system: CvSystem,
    x0,
    dt: float,
    n_steps: int,
    stride: int = 1,
    seed: int = 0,
    zero_noise: bool = False,
    force_generic: bool = False,
) -> CvTrajectory:
    """Integrate the CV SDE and retain every stride-th point.

    Deterministic given the seed. ``zero_noise`` forces xi = 0 (gradient
    descent test mode); ``force_generic`` bypasses the compiled stepper.
    """
    if dt <= 0:
        raise DataError(f"dt must be positive, got {dt}")
    if stride < 1 or n_steps < 1:
        raise DataError("n_steps and stride must be >= 1")
    d = system.dim
    x = wrap(np.array(x0, dtype=float).reshape(d), system.topology)
    n_ret = n_steps // stride
    out = np.empty((n_ret, d))
    rng = np.random.default_rng(seed)

    stepper = None if force_generic else _STEPPERS.get(system.stepper_kind)
    params = np.array(system.stepper_params, dtype=float)

    chunk_steps = max(stride, (_CHUNK_TARGET // stride) * stride)
    done_steps = 0
    out_off = 0
    while done_steps < n_steps:
        take = min(chunk_steps, ((n_steps - done_steps) // stride) * stride)
        if take == 0:
            break  # leftover steps produce no retained points
        noise = (
            np.zeros((take, d))
            if zero_noise
            else rng.standard_normal((take, d))
        )
        if stepper is not None:
            k = stepper(x, noise, dt, system.beta, stride, out, out_off, params)
        else:
            k = _generic_chunk(system, x, noise, dt, stride, out, out_off)
        if not np.all(np.isfinite(x)):
            raise NumericalError(
                f"trajectory blew up near step {done_steps + take} "
                f"(state {x.tolist()})"
            )
        out_off += k
        done_steps += take
    return CvTrajectory(
        points=out,
        dt=float(dt),
        stride=stride,
        beta=system.beta,
        topology=system.topology,
    )


@dataclass(frozen=True)
class TransitionCount:
    n_ab: int
    elapsed_time: float
    rate: float
    never_entered: bool = False


def count_transitions(
    traj: CvTrajectory,
    a_spec: RegionSpec,
    b_spec: RegionSpec,
) -> TransitionCount:
    """Last-visited-set automaton: +1 each time the path enters B with last
    label A; rate is the count over the elapsed time."""
    pts = traj.points
    if pts.shape[0] < 3:
        raise DataError("trajectory too short to count transitions")
    in_a = a_spec.contains(pts, traj.topology)
    in_b = b_spec.contains(pts, traj.topology)
    both = np.nonzero(in_a & in_b)[0]
    if both.size:
        raise DataError(f"A and B overlap along the trajectory, e.g. index {both[0]}")
    labels = np.zeros(pts.shape[0], dtype=np.int8)
    labels[in_a] = 1
    labels[in_b] = 2
    seq = labels[labels > 0]
    elapsed = traj.elapsed_time
    if seq.size == 0:
        return TransitionCount(0, elapsed, 0.0, never_entered=True)
    collapsed = seq[np.concatenate([[True], seq[1:] != seq[:-1]])]
    n_ab = int(np.sum((collapsed[:-1] == 1) & (collapsed[1:] == 2)))
    return TransitionCount(n_ab, elapsed, n_ab / elapsed)


def first_hit_ensemble(
    system: CvSystem,
    starts: np.ndarray,
    a_spec: RegionSpec,
    b_spec: RegionSpec,
    dt: float,
    max_steps: int,
    seed: int,
    check_every: int = 8,
) -> np.ndarray:
    """Advance one chain per start until it enters A (label 1) or B (2).

    Chains still outside both sets after max_steps are censored (label 0).
    Membership is checked every ``check_every`` steps, which bounds the
    time resolution of the hit detection at check_every * dt.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n, d = starts.shape
    if d != system.dim:
        raise DataError(f"starts have dimension {d}, system has {system.dim}")
    x = wrap(starts.copy(), system.topology)
    labels = np.zeros(n, dtype=np.int8)
    active = np.arange(n)
    rng = np.random.default_rng(seed)
    beta = system.beta
    amp = np.sqrt(2.0 * dt / beta)

    steps = 0
    while active.size and steps < max_steps:
        take = min(check_every, max_steps - steps)
        xs = x[active]
        for _ in range(take):
            drift = system.drift(xs)
            roots = system.sqrt_tensor(xs)
            xi = rng.standard_normal(xs.shape)
            xs = xs + drift * dt + amp * np.einsum("nij,nj->ni", roots, xi)
            xs = wrap(xs, system.topology)
        if not np.all(np.isfinite(xs)):
            raise NumericalError(f"ensemble member blew up near step {steps + take}")
        x[active] = xs
        in_a = a_spec.contains(xs, system.topology)
        in_b = b_spec.contains(xs, system.topology)
        labels[active[in_a]] = 1
        labels[active[in_b & ~in_a]] = 2
        active = active[~(in_a | in_b)]
        steps += take
    return labels
