"""Committor functions, reactive currents and reaction rates for stochastic
dynamics in collective variables, discretized to point clouds via diffusion
maps with isotropic or Mahalanobis kernels."""

from .analysis import (
    CvSdeSimulator,
    EpsSweepRow,
    PbHistogram,
    committor_analysis,
    epsilon_heuristic,
    epsilon_sweep,
    run_pipeline,
    sample_level_set,
)
from .committor import (
    CommittorSolution,
    EllipseRegion,
    IndexRegion,
    ball,
    classify,
    solve_committor,
)
from .errors import ConfigError, CvtptError, DataError, NumericalError
from .fdref import Grid2D, bilinear_interp, committor_1d, fd_committor, rms_error
from .generator import GeneratorMatrix, apply, build_generator, row_sums
from .geometry import (
    PointCloud,
    TensorField,
    Topology,
    displacement,
    mahalanobis_quadratic,
    spd_inverse,
    spd_sqrt,
)
from .kernels import ISOTROPIC, MAHALANOBIS, KernelMatrix, isotropic_kernel, mahalanobis_kernel
from .sampling import CvTrajectory, TransitionCount, count_transitions, simulate_cv
from .systems import CvSystem, double_well_1d, make_system, quadratic_2d, torus_2d
from .tpt import TptResult, compute_tpt, density_estimate, gamma, reaction_rate, reactive_current

__version__ = "0.1.0"
