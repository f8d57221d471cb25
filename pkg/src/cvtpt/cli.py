"""Command-line front end: JSON config in, CSV/JSON artifacts out.

Subcommands: sample, committor, fd, sweep, canalysis, rate. Every command
is a pure function of (config, input files, seed): reruns produce
byte-identical outputs. Exit codes: 0 success, 2 config error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import io as cio
from . import lj7 as lj7mod
from .analysis import (
    KERNEL_LABELS,
    CvSdeSimulator,
    committor_analysis,
    epsilon_heuristic,
    epsilon_sweep,
    run_pipeline,
    sample_level_set,
)
from .committor import EllipseRegion, IndexRegion, ball, classify
from .errors import ConfigError, CvtptError, DataError, NumericalError
from .fdref import Grid2D, bilinear_interp, fd_committor
from .generator import build_generator
from .geometry import PointCloud, TensorField
from .kernels import ISOTROPIC, MAHALANOBIS
from .sampling import count_transitions, simulate_cv
from .systems import make_system
from .tpt import compute_tpt

# --- region specs -----------------------------------------------------------

_REGION_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "kind": {"const": "ellipse"},
                "center": {"type": "array", "items": {"type": "number"}},
                "shape": {"type": "array"},
                "level": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind", "center", "shape", "level"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "ball"},
                "center": {"type": "array", "items": {"type": "number"}},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind", "center", "radius"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "indices"},
                "indices": {"type": "array", "items": {"type": "integer"}},
            },
            "required": ["kind", "indices"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "halfspace"},
                "dim": {"type": "integer", "minimum": 0},
                "side": {"enum": ["below", "above"]},
                "value": {"type": "number"},
            },
            "required": ["kind", "dim", "side", "value"],
            "additionalProperties": False,
        },
    ]
}


def region_from_json(spec: dict, cloud: PointCloud | None = None):
    kind = spec["kind"]
    if kind == "ellipse":
        return EllipseRegion(
            center=np.asarray(spec["center"], dtype=float),
            shape=np.asarray(spec["shape"], dtype=float),
            level=float(spec["level"]),
        )
    if kind == "ball":
        return ball(spec["center"], float(spec["radius"]))
    if kind == "indices":
        return IndexRegion(indices=np.asarray(spec["indices"], dtype=np.int64))
    if kind == "halfspace":
        if cloud is None:
            raise ConfigError("halfspace regions need point data to resolve")
        col = cloud.points[:, int(spec["dim"])]
        mask = col <= spec["value"] if spec["side"] == "below" else col >= spec["value"]
        return IndexRegion(indices=np.nonzero(mask)[0])
    raise ConfigError(f"unknown region kind '{kind}'")


# --- config schemas ---------------------------------------------------------

_EPS = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "heuristic"}]}
_KERNEL = {"enum": ["mahalanobis", "isotropic", "mmap", "dmap"]}

_SCHEMAS = {
    "sample": {
        "type": "object",
        "properties": {
            "system": {"enum": ["quadratic2d", "double_well_1d", "torus2d", "lj7"]},
            "beta": {"type": "number", "exclusiveMinimum": 0},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "n_steps": {"type": "integer", "minimum": 1},
            "stride": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "x0": {
                "oneOf": [
                    {"type": "array"},
                    {"enum": ["hexagon", "trapezoid"]},
                ]
            },
            "out": {"type": "string"},
        },
        "required": ["system", "dt", "n_steps", "stride", "seed", "out"],
        "additionalProperties": False,
    },
    "committor": {
        "type": "object",
        "properties": {
            "points": {"type": "string"},
            "tensors": {"type": ["string", "null"]},
            "topology": {"type": "array"},
            "kernel": _KERNEL,
            "epsilon": _EPS,
            "alpha": {"type": "number"},
            "beta": {"type": "number", "exclusiveMinimum": 0},
            "A": _REGION_SCHEMA,
            "B": _REGION_SCHEMA,
            "epsilon_tilde": _EPS,
            "rate_time_scale": {"type": "number", "exclusiveMinimum": 0},
            "out": {"type": "string"},
        },
        "required": ["points", "topology", "kernel", "epsilon", "beta", "A", "B", "out"],
        "additionalProperties": False,
    },
    "fd": {
        "type": "object",
        "properties": {
            "system": {
                "oneOf": [
                    {"enum": ["torus2d"]},
                    {
                        "type": "object",
                        "properties": {
                            "free_energy_file": {"type": "string"},
                            "tensor_file": {"type": "string"},
                        },
                        "required": ["free_energy_file", "tensor_file"],
                        "additionalProperties": False,
                    },
                ]
            },
            "periods": {"type": "array", "items": {"type": "number"}},
            "n1": {"type": "integer", "minimum": 8},
            "n2": {"type": "integer", "minimum": 8},
            "convergence_sizes": {
                "type": "array",
                "items": {"type": "integer", "minimum": 8},
            },
            "beta": {"type": "number", "exclusiveMinimum": 0},
            "A": _REGION_SCHEMA,
            "B": _REGION_SCHEMA,
            "out": {"type": "string"},
        },
        "required": ["system", "periods", "n1", "n2", "beta", "A", "B", "out"],
        "additionalProperties": False,
    },
    "sweep": {
        "type": "object",
        "properties": {
            "points": {"type": "string"},
            "tensors": {"type": ["string", "null"]},
            "topology": {"type": "array"},
            "beta": {"type": "number", "exclusiveMinimum": 0},
            "alpha": {"type": "number"},
            "A": _REGION_SCHEMA,
            "B": _REGION_SCHEMA,
            "eps_list": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 1,
            },
            "kernels": {"type": "array", "items": _KERNEL, "minItems": 1},
            "reference_q": {"type": "string"},
            "reference_grid": {
                "type": "object",
                "properties": {
                    "file": {"type": "string"},
                    "n1": {"type": "integer", "minimum": 8},
                    "n2": {"type": "integer", "minimum": 8},
                    "periods": {"type": "array", "items": {"type": "number"}},
                },
                "required": ["file", "n1", "n2", "periods"],
                "additionalProperties": False,
            },
            "mask": {
                "oneOf": [
                    {
                        "type": "object",
                        "properties": {
                            "kind": {"const": "q_range"},
                            "lo": {"type": "number"},
                            "hi": {"type": "number"},
                        },
                        "required": ["kind", "lo", "hi"],
                        "additionalProperties": False,
                    },
                    {
                        "type": "object",
                        "properties": {
                            "kind": {"const": "indices"},
                            "indices": {"type": "array", "items": {"type": "integer"}},
                        },
                        "required": ["kind", "indices"],
                        "additionalProperties": False,
                    },
                ]
            },
            "out": {"type": "string"},
        },
        "required": [
            "points",
            "topology",
            "beta",
            "A",
            "B",
            "eps_list",
            "kernels",
            "mask",
            "out",
        ],
        "additionalProperties": False,
    },
    "canalysis": {
        "type": "object",
        "properties": {
            "simulator": {
                "type": "object",
                "properties": {
                    "system": {
                        "enum": ["quadratic2d", "double_well_1d", "torus2d", "lj7"]
                    },
                    "beta": {"type": "number", "exclusiveMinimum": 0},
                    "dt": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["system", "dt"],
                "additionalProperties": False,
            },
            "points": {"type": "string"},
            "q": {"type": "string"},
            "atomic": {"type": "string"},
            "topology": {"type": "array"},
            "level": {"type": "number"},
            "tol": {"type": "number", "exclusiveMinimum": 0},
            "n_pt": {"type": "integer", "minimum": 1},
            "n_e": {"type": "integer", "minimum": 1},
            "max_steps": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "A": _REGION_SCHEMA,
            "B": _REGION_SCHEMA,
            "out": {"type": "string"},
        },
        "required": [
            "simulator",
            "points",
            "q",
            "topology",
            "level",
            "n_pt",
            "n_e",
            "max_steps",
            "seed",
            "A",
            "B",
            "out",
        ],
        "additionalProperties": False,
    },
    "rate": {
        "type": "object",
        "properties": {
            "points": {"type": "string"},
            "sidecar": {"type": "string"},
            "A": _REGION_SCHEMA,
            "B": _REGION_SCHEMA,
            "out": {"type": "string"},
        },
        "required": ["points", "sidecar", "A", "B", "out"],
        "additionalProperties": False,
    },
}


def _validate(command: str, config: dict) -> None:
    validator = Draft202012Validator(_SCHEMAS[command])
    errors = sorted(validator.iter_errors(config), key=lambda e: e.path)
    if errors:
        msgs = "; ".join(
            f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}"
            for e in errors[:5]
        )
        raise ConfigError(f"invalid {command} config: {msgs}")


def _normalize_kernel(name: str) -> str:
    return {
        "mmap": MAHALANOBIS,
        "dmap": ISOTROPIC,
        "mahalanobis": MAHALANOBIS,
        "isotropic": ISOTROPIC,
    }[name]


def _outdir(config: dict) -> Path:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cloud_and_field(config: dict):
    topo = cio.topology_from_json(config["topology"])
    cloud = cio.read_points(config["points"], topo)
    field = None
    if config.get("tensors"):
        field = cio.read_tensors(config["tensors"], topo.dim)
        if len(field) != cloud.n:
            raise DataError(
                f"tensor file has {len(field)} rows, points file has {cloud.n}"
            )
    return cloud, field


# --- subcommands ------------------------------------------------------------


def cmd_sample(config: dict) -> dict:
    out = _outdir(config)
    seed = int(config["seed"])
    name = config["system"]
    if name == "lj7":
        beta = float(config.get("beta", 5.0))
        params = lj7mod.Lj7Params(beta=beta)
        x0 = config.get("x0", "hexagon")
        if isinstance(x0, str):
            cfg0 = lj7mod.minimum_configuration(x0, params)
        else:
            cfg0 = lj7mod.Lj7Config(
                positions=np.asarray(x0, dtype=float).reshape(7, 2), params=params
            )
        frames = lj7mod.lj7_simulate(
            cfg0, float(config["dt"]), int(config["n_steps"]),
            stride=int(config["stride"]), seed=seed,
        )
        cvs, tensors, valid = lj7mod.batch_cvs_and_tensors(frames, params)
        n_dropped = int((~valid).sum())
        frames, cvs, tensors = frames[valid], cvs[valid], tensors[valid]
        cio.write_points(out / "points.csv", cvs)
        cio.write_tensors(out / "tensors.csv", tensors)
        cio.write_matrix_csv(out / "atomic.csv", frames.reshape(frames.shape[0], 14))
        sidecar = {
            "system": "lj7",
            "beta": beta,
            "dt": float(config["dt"]),
            "n_steps": int(config["n_steps"]),
            "stride": int(config["stride"]),
            "seed": seed,
            "topology": [None, None],
            "n_points": int(cvs.shape[0]),
            "n_dropped_singular": n_dropped,
        }
        cio.write_json(out / "sidecar.json", sidecar)
        return sidecar

    kwargs = {"beta": float(config["beta"])} if "beta" in config else {}
    system = make_system(name, **kwargs)
    d = system.dim
    x0 = np.asarray(config.get("x0", np.zeros(d)), dtype=float)
    traj = simulate_cv(
        system, x0, float(config["dt"]), int(config["n_steps"]),
        stride=int(config["stride"]), seed=seed,
    )
    tensors = system.tensor(traj.points)
    cio.write_points(out / "points.csv", traj.points)
    cio.write_tensors(out / "tensors.csv", tensors)
    sidecar = {
        "system": name,
        "beta": system.beta,
        "dt": traj.dt,
        "n_steps": int(config["n_steps"]),
        "stride": traj.stride,
        "seed": seed,
        "topology": cio.topology_to_json(system.topology),
        "n_points": traj.n,
    }
    cio.write_json(out / "sidecar.json", sidecar)
    return sidecar


def cmd_committor(config: dict) -> dict:
    out = _outdir(config)
    kind = _normalize_kernel(config["kernel"])
    cloud, field = _load_cloud_and_field(config)
    if kind == MAHALANOBIS and field is None:
        raise DataError(
            "kernel 'mahalanobis' requires a tensors file (config key 'tensors')"
        )
    a_spec = region_from_json(config["A"], cloud)
    b_spec = region_from_json(config["B"], cloud)
    beta = float(config["beta"])
    alpha = float(config.get("alpha", 0.5))

    eps_cfg = config["epsilon"]
    if eps_cfg == "heuristic":
        epsilon = epsilon_heuristic(cloud, field if kind == MAHALANOBIS else None)
    else:
        epsilon = float(eps_cfg)

    sol, gen = run_pipeline(cloud, field, a_spec, b_spec, beta, epsilon, kind, alpha)

    etilde_cfg = config.get("epsilon_tilde", "heuristic")
    if etilde_cfg == "heuristic":
        epsilon_tilde = epsilon_heuristic(cloud, None)
    else:
        epsilon_tilde = float(etilde_cfg)
    tpt = compute_tpt(gen, sol, cloud, epsilon_tilde)
    scale = float(config.get("rate_time_scale", 1.0))

    cio.write_vector(out / "q.csv", sol.q)
    cio.write_matrix_csv(out / "current.csv", tpt.current)
    summary = {
        "kernel": KERNEL_LABELS[kind],
        "epsilon": epsilon,
        "alpha": alpha,
        "beta": beta,
        "epsilon_tilde": epsilon_tilde,
        "n": cloud.n,
        "n_A": int(sol.a_idx.size),
        "n_B": int(sol.b_idx.size),
        "residual": sol.residual,
        "rate": tpt.rate * scale,
        "rate_time_scale": scale,
    }
    cio.write_json(out / "summary.json", summary)
    return summary


def _fd_grid(config: dict, n1: int, n2: int) -> Grid2D:
    periods = [float(p) for p in config["periods"]]
    if isinstance(config["system"], str):
        system = make_system(config["system"], beta=float(config["beta"]))
        return Grid2D.from_system(system, n1, n2)
    from .geometry import Topology

    topo = Topology(tuple(periods))
    F = cio.read_grid_field(config["system"]["free_energy_file"], (n1, n2))
    M = cio.read_grid_tensors(config["system"]["tensor_file"], (n1, n2))
    return Grid2D(topology=topo, free_energy=F, tensors=M)


def cmd_fd(config: dict) -> dict:
    out = _outdir(config)
    beta = float(config["beta"])
    n1, n2 = int(config["n1"]), int(config["n2"])
    grid = _fd_grid(config, n1, n2)
    a_spec = region_from_json(config["A"])
    b_spec = region_from_json(config["B"])
    q = fd_committor(grid, beta, a_spec, b_spec)
    cio.write_grid_field(out / "qgrid.csv", q)
    summary: dict = {"n1": n1, "n2": n2, "beta": beta}

    sizes = config.get("convergence_sizes")
    if sizes:
        sols = {}
        for nn in sizes:
            g = _fd_grid(config, int(nn), int(nn))
            sols[int(nn)] = fd_committor(g, beta, a_spec, b_spec)
        diffs = []
        pairs = sorted(sols)
        for lo, hi in zip(pairs[:-1], pairs[1:]):
            if hi % lo:
                raise ConfigError("convergence sizes must be nested (each divides next)")
            r = hi // lo
            diffs.append(
                float(np.max(np.abs(sols[lo] - sols[hi][::r, ::r])))
            )
        summary["convergence_sizes"] = [int(s) for s in pairs]
        summary["max_node_differences"] = diffs
        summary["convergence_ratios"] = [
            diffs[k] / diffs[k + 1] for k in range(len(diffs) - 1)
        ]
    cio.write_json(out / "summary.json", summary)
    return summary


def cmd_sweep(config: dict) -> dict:
    out = _outdir(config)
    cloud, field = _load_cloud_and_field(config)
    a_spec = region_from_json(config["A"], cloud)
    b_spec = region_from_json(config["B"], cloud)
    if ("reference_q" in config) == ("reference_grid" in config):
        raise ConfigError(
            "give exactly one of 'reference_q' (per-point CSV) or "
            "'reference_grid' (node file to interpolate)"
        )
    if "reference_q" in config:
        reference_q = cio.read_vector(config["reference_q"])
    else:
        ref = config["reference_grid"]
        from .geometry import Topology

        gtopo = Topology(tuple(float(p) for p in ref["periods"]))
        vals = cio.read_grid_field(ref["file"], (int(ref["n1"]), int(ref["n2"])))
        ident = np.broadcast_to(np.eye(2), vals.shape + (2, 2)).copy()
        grid = Grid2D(topology=gtopo, free_energy=np.zeros_like(vals), tensors=ident)
        reference_q = bilinear_interp(grid, vals, cloud)
    if reference_q.size != cloud.n:
        raise DataError("reference committor length does not match the points file")
    mask_cfg = config["mask"]
    if mask_cfg["kind"] == "q_range":
        mask = np.nonzero(
            (reference_q >= mask_cfg["lo"]) & (reference_q <= mask_cfg["hi"])
        )[0]
    else:
        mask = np.asarray(mask_cfg["indices"], dtype=np.int64)
    if mask.size == 0:
        raise DataError("sweep mask selects no points")
    kinds = tuple(_normalize_kernel(k) for k in config["kernels"])
    rows = epsilon_sweep(
        cloud,
        field,
        a_spec,
        b_spec,
        float(config["beta"]),
        [float(e) for e in config["eps_list"]],
        reference_q,
        mask,
        kernels=kinds,
        alpha=float(config.get("alpha", 0.5)),
    )
    with open(out / "sweep.csv", "w") as fh:
        fh.write("epsilon,kernel,rms,error\n")
        for r in rows:
            rms = "" if r.rms is None else f"{r.rms:.17g}"
            err = r.error or ""
            fh.write(f"{r.epsilon:.17g},{r.kernel},{rms},{err}\n")
    summary: dict = {"n_rows": len(rows), "mask_size": int(mask.size)}
    for label in {r.kernel for r in rows}:
        ok = [r for r in rows if r.kernel == label and r.rms is not None]
        if ok:
            best = min(ok, key=lambda r: r.rms)
            summary[f"min_rms_{label}"] = best.rms
            summary[f"best_epsilon_{label}"] = best.epsilon
    cio.write_json(out / "summary.json", summary)
    return summary


def cmd_canalysis(config: dict) -> dict:
    out = _outdir(config)
    topo = cio.topology_from_json(config["topology"])
    cloud = cio.read_points(config["points"], topo)
    q = cio.read_vector(config["q"])
    if q.size != cloud.n:
        raise DataError("committor file length does not match the points file")
    idx = sample_level_set(
        cloud,
        q,
        float(config["level"]),
        tol=float(config.get("tol", 0.05)),
        n_pt=int(config["n_pt"]),
        seed=int(config["seed"]),
    )
    sim_cfg = config["simulator"]
    a_spec = region_from_json(config["A"], cloud)
    b_spec = region_from_json(config["B"], cloud)
    if sim_cfg["system"] == "lj7":
        if "atomic" not in config:
            raise DataError("LJ7 committor analysis needs the 'atomic' frames file")
        frames = cio.read_matrix_csv(config["atomic"], expect_cols=14)
        if frames.shape[0] != cloud.n:
            raise DataError("atomic file length does not match the points file")
        starts = frames[idx].reshape(-1, 7, 2)
        params = lj7mod.Lj7Params(beta=float(sim_cfg.get("beta", 5.0)))
        simulator = lj7mod.Lj7Simulator(params, float(sim_cfg["dt"]))
    else:
        kwargs = {"beta": float(sim_cfg["beta"])} if "beta" in sim_cfg else {}
        system = make_system(sim_cfg["system"], **kwargs)
        simulator = CvSdeSimulator(system, float(sim_cfg["dt"]))
        starts = cloud.points[idx]
    hist = committor_analysis(
        starts,
        simulator,
        a_spec,
        b_spec,
        n_e=int(config["n_e"]),
        max_steps=int(config["max_steps"]),
        seed=int(config["seed"]) + 1,
    )
    with open(out / "histogram.csv", "w") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for k in range(hist.counts.size):
            fh.write(
                f"{hist.bin_edges[k]:.17g},{hist.bin_edges[k + 1]:.17g},"
                f"{hist.counts[k]:.17g}\n"
            )
    summary = {
        "mode": hist.mode,
        "censored_fraction": hist.censored_fraction,
        "n_pt": hist.n_pt,
        "n_e": hist.n_e,
        "n_start_candidates": int(idx.size),
    }
    cio.write_json(out / "summary.json", summary)
    return summary


def cmd_rate(config: dict) -> dict:
    out = _outdir(config)
    sidecar = cio.read_json(config["sidecar"])
    topo = cio.topology_from_json(sidecar["topology"])
    cloud = cio.read_points(config["points"], topo)
    from .sampling import CvTrajectory

    traj = CvTrajectory(
        points=cloud.points,
        dt=float(sidecar["dt"]),
        stride=int(sidecar["stride"]),
        beta=float(sidecar["beta"]),
        topology=topo,
    )
    a_spec = region_from_json(config["A"], cloud)
    b_spec = region_from_json(config["B"], cloud)
    res = count_transitions(traj, a_spec, b_spec)
    summary = {
        "n_ab": res.n_ab,
        "elapsed_time": res.elapsed_time,
        "rate": res.rate,
        "never_entered": res.never_entered,
    }
    cio.write_json(out / "summary.json", summary)
    return summary


_COMMANDS = {
    "sample": cmd_sample,
    "committor": cmd_committor,
    "fd": cmd_fd,
    "sweep": cmd_sweep,
    "canalysis": cmd_canalysis,
    "rate": cmd_rate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cvtpt",
        description="Committor/TPT pipeline on point clouds via diffusion maps",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--workers", type=int, default=None, help="thread cap")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--seed", type=int, default=None, help="override seed")
    args = parser.parse_args(argv)

    try:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {args.config}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        if args.out is not None:
            config["out"] = args.out
        if args.seed is not None and "seed" in _SCHEMAS[args.command]["properties"]:
            config["seed"] = args.seed
        if args.workers is not None:
            import numba

            numba.set_num_threads(max(1, args.workers))
        _validate(args.command, config)
        _COMMANDS[args.command](config)
        return 0
    except CvtptError as e:
        code = 2 if isinstance(e, ConfigError) else 3 if isinstance(e, DataError) else 4
        payload = {"error": type(e).__name__, "message": str(e), "exit_code": code}
        print(json.dumps(payload), file=sys.stderr)
        return code
    except Exception as e:  # pragma: no cover - unexpected failure surface
        payload = {"error": type(e).__name__, "message": str(e), "exit_code": 4}
        print(json.dumps(payload), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
