import numpy as np
import pytest

from cvtpt.committor import IndexRegion, ball
from cvtpt.errors import DataError
from cvtpt.fdref import (
    Grid2D,
    _adaptive_simpson,
    bilinear_interp,
    committor_1d,
    divergence_form_operator,
    fd_committor,
    rms_error,
)
from cvtpt.geometry import PointCloud, Topology
from cvtpt.systems import torus_2d

TWO_PI = 2.0 * np.pi
TORUS = Topology((TWO_PI, TWO_PI))


def flat_grid(n):
    F = np.zeros((n, n))
    M = np.zeros((n, n, 2, 2))
    M[..., 0, 0] = 1.0
    M[..., 1, 1] = 1.0
    return Grid2D(topology=TORUS, free_energy=F, tensors=M)


def stripe_regions(grid, a=-np.pi / 2, b=np.pi / 2):
    phi = grid.nodes()[:, 0]
    return (
        IndexRegion(indices=np.nonzero(phi <= a + 1e-12)[0]),
        IndexRegion(indices=np.nonzero(phi >= b - 1e-12)[0]),
    )


class TestGrid2D:
    def test_validation(self):
        with pytest.raises(DataError, match="8x8|at least 8"):
            Grid2D(
                topology=TORUS,
                free_energy=np.zeros((4, 4)),
                tensors=np.zeros((4, 4, 2, 2)),
            )
        M = np.zeros((8, 8, 2, 2))
        M[..., 0, 0] = -1.0
        M[..., 1, 1] = 1.0
        with pytest.raises(DataError, match="SPD"):
            Grid2D(topology=TORUS, free_energy=np.zeros((8, 8)), tensors=M)

    def test_from_system_layout(self):
        grid = Grid2D.from_system(torus_2d(), 16, 12)
        assert grid.shape == (16, 12)
        x1, x2 = grid.axes()
        assert x1[0] == pytest.approx(-np.pi)
        assert x2.size == 12
        nodes = grid.nodes()
        # second index fastest in flattened order
        assert nodes[1, 0] == nodes[0, 0]
        assert nodes[1, 1] != nodes[0, 1]


class TestDivergenceOperator:
    def test_zero_row_sums(self):
        grid = Grid2D.from_system(torus_2d(), 24, 24)
        op = divergence_form_operator(grid, 1.3)
        assert np.max(np.abs(op @ np.ones(24 * 24))) < 1e-11

    def test_matches_analytic_on_smooth_function(self):
        # second-order convergence of the discrete operator against the
        # analytic divergence form, checked by halving the mesh
        system = torus_2d()
        errs = []
        for n in (32, 64):
            grid = Grid2D.from_system(system, n, n)
            pts = grid.nodes()
            phi, psi = pts[:, 0], pts[:, 1]
            f = np.sin(phi) * np.cos(psi)
            op = divergence_form_operator(grid, 1.0)
            # analytic div(w grad f), w = exp(-F) M, computed symbolically
            # offline and pasted here for this specific f
            import sympy as sp

            ph, ps = sp.symbols("ph ps")
            F = sp.cos(ph) + sp.cos(ph - ps)
            m11 = 1.5 + 0.5 * sp.sin(ph)
            m12 = sp.Rational(3, 10) * sp.cos(ps)
            w11 = sp.exp(-F) * m11
            w12 = sp.exp(-F) * m12
            ff = sp.sin(ph) * sp.cos(ps)
            expr = sp.diff(w11 * sp.diff(ff, ph) + w12 * sp.diff(ff, ps), ph) + sp.diff(
                w12 * sp.diff(ff, ph) + w11 * sp.diff(ff, ps), ps
            )
            fn = sp.lambdify((ph, ps), expr, "numpy")
            errs.append(np.max(np.abs(op @ f - fn(phi, psi))))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)


class TestFdCommittor:
    def test_stripe_self_convergence_second_order(self):
        # Dirichlet sets bounded by grid lines shared across refinements,
        # so the boundary is identical at every resolution
        system = torus_2d()
        sols = {}
        for n in (64, 128, 256):
            grid = Grid2D.from_system(system, n, n)
            a_spec, b_spec = stripe_regions(grid)
            sols[n] = fd_committor(grid, 1.0, a_spec, b_spec)
        d1 = np.max(np.abs(sols[64] - sols[128][::2, ::2]))
        d2 = np.max(np.abs(sols[128] - sols[256][::2, ::2]))
        assert 3.4 <= d1 / d2 <= 4.6

    def test_disk_regions_converge(self):
        # curved Dirichlet boundaries quantize to the mesh, which caps
        # self-convergence at first order; assert the differences shrink
        system = torus_2d()
        sols = {}
        for n in (32, 64, 128):
            grid = Grid2D.from_system(system, n, n)
            sols[n] = fd_committor(grid, 1.0, ball((np.pi, 0.0), 0.6), ball((0.0, np.pi), 0.6))
        d1 = np.max(np.abs(sols[32] - sols[64][::2, ::2]))
        d2 = np.max(np.abs(sols[64] - sols[128][::2, ::2]))
        assert d2 < d1

    def test_mirror_symmetry(self):
        # F = cos(2 phi), M = I, with A and B mirror-symmetric bands around
        # phi = 0 (kept away from the self-mirrored line phi = pi):
        # q(phi) + q(-phi) = 1 at mirrored nodes
        n = 64
        x = -np.pi + np.arange(n) * (TWO_PI / n)
        F = np.cos(2 * x)[:, None] * np.ones(n)[None, :]
        M = np.zeros((n, n, 2, 2))
        M[..., 0, 0] = 1.0
        M[..., 1, 1] = 1.0
        grid = Grid2D(topology=TORUS, free_energy=F, tensors=M)
        phi = grid.nodes()[:, 0]
        a_spec = IndexRegion(indices=np.nonzero((phi >= -2.5) & (phi <= -2.0))[0])
        b_spec = IndexRegion(indices=np.nonzero((phi >= 2.0) & (phi <= 2.5))[0])
        q = fd_committor(grid, 1.0, a_spec, b_spec)
        # mirrored node of i is (n - i) mod n
        mirrored = q[(-np.arange(n)) % n, :]
        assert np.max(np.abs(q + mirrored - 1.0)) < 1e-8

    def test_separable_matches_quadrature_oracle(self):
        n = 128
        x = -np.pi + np.arange(n) * (TWO_PI / n)
        F = np.cos(x)[:, None] * np.ones(n)[None, :]
        M = np.zeros((n, n, 2, 2))
        M[..., 0, 0] = 1.0
        M[..., 1, 1] = 1.0
        grid = Grid2D(topology=TORUS, free_energy=F, tensors=M)
        beta = 1.0
        a_spec, b_spec = stripe_regions(grid, a=-2.0, b=2.0)
        q = fd_committor(grid, beta, a_spec, b_spec)
        mask_a = x <= -2.0 + 1e-12
        mask_b = x >= 2.0 - 1e-12
        a_val = x[mask_a].max()
        b_val = x[mask_b].min()
        q_fn = committor_1d(np.cos, lambda s: 1.0, beta, a_val, b_val)
        assert np.max(np.abs(q[:, 0] - q_fn(x))) < 1e-4

    def test_region_errors(self):
        grid = flat_grid(16)
        # a ball smaller than one cell, centered away from any node
        with pytest.raises(DataError, match="cell"):
            fd_committor(grid, 1.0, ball((0.11, 0.13), 0.01), ball((2.0, 2.0), 1.0))
        with pytest.raises(DataError):
            fd_committor(grid, 1.0, ball((0.0, 0.0), 1.0), ball((0.0, 0.0), 1.0))

    def test_range_and_boundary_values(self):
        grid = Grid2D.from_system(torus_2d(), 32, 32)
        a_spec, b_spec = stripe_regions(grid)
        q = fd_committor(grid, 1.0, a_spec, b_spec)
        assert q.min() >= 0.0 and q.max() <= 1.0
        phi = grid.nodes()[:, 0].reshape(32, 32)
        assert np.all(q[phi <= -np.pi / 2 + 1e-12] == 0.0)
        assert np.all(q[phi >= np.pi / 2 - 1e-12] == 1.0)


class TestCommittor1d:
    def test_linear_when_flat(self):
        q = committor_1d(lambda s: 0.0, lambda s: 1.0, 1.0, 0.0, 1.0)
        assert q(0.5) == pytest.approx(0.5, abs=1e-12)
        assert q(0.25) == pytest.approx(0.25, abs=1e-12)

    def test_symmetric_midpoint(self):
        q = committor_1d(lambda s: (s**2 - 1) ** 2, lambda s: 1.0 + 0.5 * s**2, 2.0, -1.5, 1.5)
        assert q(0.0) == pytest.approx(0.5, abs=1e-10)

    def test_boundary_values_and_monotone(self):
        q = committor_1d(lambda s: np.sin(3 * s), lambda s: 1.0 + 0.9 * np.sin(3 * s + 1), 2.0, -1.0, 1.0)
        xs = np.linspace(-1.0, 1.0, 101)
        vals = q(xs)
        assert vals[0] == 0.0 and vals[-1] == 1.0
        assert np.all(np.diff(vals) > 0)

    def test_cross_quadrature_check(self):
        from scipy.integrate import quad

        beta = 1.0
        fe = lambda s: s * s
        m = lambda s: 1.0 + 0.5 * s
        q = committor_1d(fe, m, beta, 0.0, 1.0)
        integrand = lambda s: np.exp(beta * fe(s)) / m(s)
        denom, _ = quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        numer, _ = quad(integrand, 0.0, 0.5, epsabs=1e-13, epsrel=1e-13)
        assert q(0.5) == pytest.approx(numer / denom, abs=1e-8)

    def test_nonpositive_tensor_rejected(self):
        with pytest.raises(DataError, match="positive"):
            committor_1d(lambda s: 0.0, lambda s: -1.0, 1.0, 0.0, 1.0)

    def test_bad_interval(self):
        with pytest.raises(DataError):
            committor_1d(lambda s: 0.0, lambda s: 1.0, 1.0, 1.0, 0.0)

    def test_adaptive_simpson_known_integral(self):
        v = _adaptive_simpson(np.exp, 0.0, 1.0, 1e-12)
        assert v == pytest.approx(np.e - 1.0, abs=1e-11)


class TestBilinearInterp:
    def test_exact_on_nodes(self):
        grid = Grid2D.from_system(torus_2d(), 16, 16)
        vals = np.arange(256, dtype=float).reshape(16, 16)
        cloud = PointCloud(points=grid.nodes(), topology=TORUS)
        out = bilinear_interp(grid, vals, cloud)
        assert np.allclose(out, vals.ravel(), atol=1e-12)

    def test_cell_center_average(self):
        grid = flat_grid(8)
        vals = np.zeros((8, 8))
        vals[1, :] = 1.0  # constant along the second axis
        x1, x2 = grid.axes()
        h1, h2 = grid.spacings
        query = np.array([[x1[0] + h1 / 2, x2[3] + h2 / 2]])
        cloud = PointCloud(points=np.vstack([query, query]), topology=TORUS)
        out = bilinear_interp(grid, vals, cloud)
        assert out[0] == pytest.approx(0.5)

    def test_linear_exactness_within_cell(self):
        grid = flat_grid(16)
        x1, x2 = grid.axes()
        vals = x1[:, None] * np.ones(16)[None, :]  # f = phi (linear per cell)
        rng = np.random.default_rng(0)
        h1, _ = grid.spacings
        # queries strictly inside cells away from the wrap seam
        base = rng.uniform(x1[2], x1[-3], size=(50, 1))
        psi = rng.uniform(-3, 3, size=(50, 1))
        cloud = PointCloud(points=np.hstack([base, psi]), topology=TORUS)
        out = bilinear_interp(grid, vals, cloud)
        assert np.max(np.abs(out - cloud.points[:, 0])) < 1e-13

    def test_contraction_in_max_norm(self):
        grid = flat_grid(12)
        rng = np.random.default_rng(1)
        vals = rng.uniform(-3, 5, size=(12, 12))
        cloud = PointCloud(points=rng.uniform(-np.pi, np.pi, (200, 2)), topology=TORUS)
        out = bilinear_interp(grid, vals, cloud)
        assert out.min() >= vals.min() - 1e-12
        assert out.max() <= vals.max() + 1e-12

    def test_dimension_check(self):
        grid = flat_grid(8)
        cloud = PointCloud(points=np.zeros((3, 1)) + [[0.1], [0.2], [0.3]], topology=Topology((TWO_PI,)))
        with pytest.raises(DataError):
            bilinear_interp(grid, np.zeros((8, 8)), cloud)


class TestRmsError:
    def test_identical(self):
        q = np.array([0.0, 0.5, 1.0])
        assert rms_error(q, q, np.array([0, 1, 2])) == 0.0

    def test_constant_offset(self):
        a = np.zeros(5)
        b = np.full(5, 0.1)
        assert rms_error(a, b, np.arange(5)) == pytest.approx(0.1)

    def test_single_element_mask(self):
        assert rms_error(
            np.array([0.0, 0.6, 1.0]), np.array([0.0, 0.5, 1.0]), np.array([1])
        ) == pytest.approx(0.1)

    def test_boolean_mask_and_empty(self):
        a = np.array([0.0, 1.0])
        assert rms_error(a, a + 1, np.array([True, False])) == pytest.approx(1.0)
        with pytest.raises(DataError):
            rms_error(a, a, np.array([], dtype=int))
