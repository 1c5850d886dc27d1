"""The adaptive DWR loop: aggregate localized indicators, mark the worst
cells per direction and the worst intervals, refine, repeat.

Marking uses the magnitude of the signed aggregated indicators; a cell may be
marked in both directions (isotropic split).  Intervals are only refined when
the global temporal estimate is non-negligible against the spatial one, so
problems with negligible temporal error keep their time grid.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .estimator import compute_indicators, effectivity_index
from .fe_space import FeSpace
from .forms import Assembler
from .geometry import max_aspect_ratio
from .goals import GoalAssembly
from .problem import zero_scalar
from .time_slab import solve_adjoint, solve_primal


@dataclass
class AdaptConfig:
    theta_h: float = 1.0 / 3.0
    theta_tau: float = 1.0 / 3.0
    max_loops: int = 10
    max_total_dofs: int = 0          # 0 disables the cap
    stop_tolerance: float = 0.0
    temporal_floor: float = 0.01     # refine time only if |eta_tau| > floor*|eta_h|

    def __post_init__(self):
        if not (0.0 <= self.theta_h <= 1.0 and 0.0 <= self.theta_tau <= 1.0):
            raise ConfigError("marking fractions must lie in [0, 1]")
        if self.max_loops < 1:
            raise ConfigError("need at least one loop")


@dataclass
class LoopRecord:
    loop: int
    n_space: int
    n_t: int
    n_tot: int
    goal_value: float
    exact_error: Optional[float]
    eta_h_x: float
    eta_h_y: float
    eta_h: float
    eta_tau: float
    eta_tauh: float
    i_eff: Optional[float]
    ar_max: float
    wall_time: float


def aggregate(field):
    """Signed sums of the localized indicators: per-cell/direction (E, 2) and
    per-interval (N,)."""
    return field.aggregate_cells(), field.aggregate_intervals()


def _top_fraction(values, theta, floor):
    """Indices of the ceil(theta*len) largest |values| above floor, ties broken
    toward lower index; fewer if not enough nonzero candidates."""
    n = len(values)
    if n == 0 or theta == 0.0:
        return []
    count = math.ceil(theta * n)
    mag = np.abs(values)
    eligible = np.nonzero(mag > floor)[0]
    if len(eligible) == 0:
        return []
    order = eligible[np.lexsort((eligible, -mag[eligible]))]
    return list(order[:min(count, len(order))])


def mark(cell_aggregates, interval_aggregates, cell_ids, config):
    """Marking step of the adaptive algorithm.

    Returns (spatial marks {(cell_id, axis)}, temporal marks {interval k}).
    """
    agg = np.asarray(cell_aggregates)
    scale = np.abs(agg).max() if agg.size else 0.0
    floor = 1e-12 * scale
    smarks = set()
    for i in (1, 2):
        for pos in _top_fraction(agg[:, i - 1], config.theta_h, floor):
            smarks.add((cell_ids[pos], i))
    tmarks = set()
    ivals = np.asarray(interval_aggregates)
    eta_tau_tot = ivals.sum()
    eta_h_tot = agg.sum()
    if abs(eta_tau_tot) > config.temporal_floor * abs(eta_h_tot):
        tfloor = 1e-12 * (np.abs(ivals).max() if ivals.size else 0.0)
        tmarks = set(_top_fraction(ivals, config.theta_tau, tfloor))
    return smarks, tmarks


def run_dwr_loop(problem, mesh, partition, goal, config, p=1, delta0=0.0,
                 exact_goal=None, on_loop=None):
    """Algorithm: solve primal, solve adjoint, estimate, mark, refine.

    exact_goal, when given, fills the error and effectivity columns.
    on_loop(loop, mesh, partition, primal, adjoint, field) is called after
    each estimate (VTK emission etc.).  Returns the list of LoopRecords.
    """
    records = []
    nq = 2 * p + 1
    for loop in range(1, config.max_loops + 1):
        tic = time.perf_counter()
        space_p = FeSpace(mesh, p, dirichlet=problem.dirichlet)
        asm_p = Assembler(space_p, problem, delta0=delta0, nq=nq)
        primal = solve_primal(problem, mesh, partition, p=p, delta0=delta0,
                              space=space_p, assembler=asm_p)
        hom = {bid: zero_scalar for bid in problem.dirichlet}
        space_q = FeSpace(mesh, 2 * p, dirichlet=hom)
        asm_q = Assembler(space_q, problem, delta0=delta0, nq=nq)
        ga_q = GoalAssembly(goal, space_q, partition, geo=asm_q.geo)
        adjoint = solve_adjoint(problem, mesh, partition, goal, p=p,
                                delta0=delta0, space=space_q,
                                assembler=asm_q, goal_assembly=ga_q)
        field = compute_indicators(problem, goal, primal, adjoint,
                                   delta0=delta0, adjoint_assembler=asm_q,
                                   goal_assembly=ga_q)
        ga_p = GoalAssembly(goal, space_p, partition, geo=asm_p.geo)
        j_value = ga_p.evaluate(primal)
        err = exact_goal - j_value if exact_goal is not None else None
        ieff = effectivity_index(field, err) if err is not None else None
        record = LoopRecord(
            loop=loop, n_space=space_p.n_dofs, n_t=partition.n_time_dofs,
            n_tot=space_p.n_dofs * partition.n_time_dofs,
            goal_value=j_value, exact_error=err,
            eta_h_x=field.eta_h_dir(1), eta_h_y=field.eta_h_dir(2),
            eta_h=field.eta_h, eta_tau=field.eta_tau,
            eta_tauh=field.eta_tauh, i_eff=ieff,
            ar_max=max_aspect_ratio(mesh, nq=nq),
            wall_time=time.perf_counter() - tic)
        records.append(record)
        if on_loop is not None:
            on_loop(loop, mesh, partition, primal, adjoint, field)
        if loop == config.max_loops:
            break
        if config.stop_tolerance > 0.0 and abs(field.eta_tauh) < config.stop_tolerance:
            break
        if config.max_total_dofs and record.n_tot >= config.max_total_dofs:
            break
        cell_agg, ival_agg = aggregate(field)
        smarks, tmarks = mark(cell_agg, ival_agg, field.cell_ids, config)
        if not smarks and not tmarks:
            break
        if smarks:
            mesh.refine_cells(sorted(smarks))
        if tmarks:
            partition = partition.bisect(tmarks)
    return records


CSV_COLUMNS = ("loop", "N_space", "N_t", "N_tot", "J_error", "eta_h_x",
               "eta_h_y", "eta_h", "eta_tau", "eta_tauh", "I_eff", "ar_max")


def records_to_csv(records, path):
    """One row per loop with the benchmark-table columns; unavailable exact
    error / effectivity entries stay empty."""

    def fmt(v):
        if v is None:
            return ""
        return f"{v:.6e}"

    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in records:
            row = [str(r.loop), str(r.n_space), str(r.n_t), str(r.n_tot),
                   fmt(r.exact_error), fmt(r.eta_h_x), fmt(r.eta_h_y),
                   fmt(r.eta_h), fmt(r.eta_tau), fmt(r.eta_tauh),
                   fmt(r.i_eff), fmt(r.ar_max)]
            fh.write(",".join(row) + "\n")
