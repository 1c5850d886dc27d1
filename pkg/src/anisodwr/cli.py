"""Command-line driver: run a configured benchmark and write CSV/VTK output.

Exit codes: 0 success, 1 solver failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys

from .adaptivity import records_to_csv, run_dwr_loop
from .benchmarks import (hemker_cutlines, hemker_problem, manufactured_problem,
                         moving_hump_problem)
from .config import load_config
from .errors import AnisoDwrError, ConfigError
from .goals import exact_goal_value
from .mesh import create_hemker_mesh, create_rectangle_mesh
from .time_slab import TimePartition, solve_primal
from .vtk_io import vertex_values, write_vtk


def build_parser():
    parser = argparse.ArgumentParser(
        prog="anisodwr",
        description="Anisotropic multi-goal space-time adaptive CDR solver")
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--max-loops", type=int, default=None,
                        help="override the configured loop count")
    parser.add_argument("--output-dir", default=None,
                        help="override the configured output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap internal (BLAS) parallelism")
    parser.add_argument("--emit-vtk", action="store_true", default=None,
                        help="write per-loop VTK files")
    return parser


def _setup(cfg):
    """(problem, mesh, partition, goal, exact_goal) for the configured case."""
    if cfg.benchmark == "moving_hump":
        problem, u_exact, goal = moving_hump_problem(cfg.epsilon,
                                                     cutoff=cfg.cutoff1)
        goal.weights = [cfg.weight1, cfg.weight2]
        mesh = create_rectangle_mesh((0.0, 1.0), (0.0, 1.0), cfg.nx, cfg.ny)
        partition = TimePartition.uniform(problem.T, cfg.n_intervals, r=cfg.r)
        exact = exact_goal_value(goal, mesh, u_exact, problem.T)
        return problem, mesh, partition, goal, exact
    if cfg.benchmark == "hemker":
        problem, goal = hemker_problem(cutoff_e1=cfg.cutoff1,
                                       cutoff_e2=cfg.cutoff2)
        goal.weights = [cfg.weight1, cfg.weight2]
        mesh = create_hemker_mesh(cfg.hemker_initial_refines)
        partition = TimePartition.uniform(problem.T, cfg.n_intervals, r=cfg.r)
        return problem, mesh, partition, goal, None
    problem, u_exact, goal, exact = manufactured_problem()
    mesh = create_rectangle_mesh((0.0, 1.0), (0.0, 1.0), cfg.nx, cfg.ny)
    mesh.refine_cells([(c, a) for c in mesh.active_cells() for a in (1, 2)])
    partition = TimePartition.uniform(problem.T, cfg.n_intervals, r=cfg.r)
    return problem, mesh, partition, goal, exact


def run(cfg):
    os.makedirs(cfg.output_dir, exist_ok=True)
    problem, mesh, partition, goal, exact = _setup(cfg)

    emitted = {}

    def on_loop(loop, msh, part, primal, adjoint, field):
        emitted["last"] = (msh, part, primal, adjoint)
        if not cfg.emit_vtk:
            return
        agg = field.aggregate_cells()
        write_vtk(msh, os.path.join(cfg.output_dir, f"loop_{loop}_indicators.vtk"),
                  cell_data={"eta_h_x": agg[:, 0], "eta_h_y": agg[:, 1],
                             "eta_tau": field.eta_tau_local.sum(axis=1)})
        for n in range(part.n_intervals):
            write_vtk(msh,
                      os.path.join(cfg.output_dir, f"loop_{loop}_slab_{n + 1}.vtk"),
                      point_data={
                          "primal": vertex_values(primal.space, primal.U[n]),
                          "adjoint": vertex_values(adjoint.space, adjoint.U[n])})

    records = run_dwr_loop(problem, mesh, partition, goal, cfg.adapt,
                           p=cfg.p, delta0=cfg.delta0, exact_goal=exact,
                           on_loop=on_loop)
    records_to_csv(records, os.path.join(cfg.output_dir, "table.csv"))
    if cfg.benchmark == "hemker" and "last" in emitted:
        _msh, _part, primal, _adj = emitted["last"]
        rows = hemker_cutlines(primal.space, primal.U[-1])
        with open(os.path.join(cfg.output_dir, "cutlines.csv"), "w") as fh:
            fh.write("line,param,x,y,u\n")
            for line, par, x, y, v in rows:
                fh.write(f"{line},{par:.10e},{x:.10e},{y:.10e},{v:.10e}\n")
    return records


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = load_config(args.config)
        if args.max_loops is not None:
            cfg.max_loops = args.max_loops
            cfg.adapt.max_loops = args.max_loops
        if args.output_dir is not None:
            cfg.output_dir = args.output_dir
        if args.threads is not None:
            cfg.threads = args.threads
        if args.emit_vtk:
            cfg.emit_vtk = True
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    limiter = None
    if cfg.threads:
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=cfg.threads)
        except ImportError:
            os.environ.setdefault("OMP_NUM_THREADS", str(cfg.threads))
    try:
        run(cfg)
    except AnisoDwrError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    finally:
        if limiter is not None:
            limiter.unregister()
    return 0


if __name__ == "__main__":
    sys.exit(main())
