"""End-to-end scenario pipeline and batch runner."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .config import ScenarioConfig
from .errors import InsufficientDataError
from .pdmp import random_policy, simulate_batch
from .solver import (InventoryModel, Policy, QuantGrid, SimReport, ValueTable, backward_dp,
                     estimate_transitions, evaluate_policy, inventory_levels, quantile_grid)

log = logging.getLogger(__name__)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    grid: QuantGrid
    transitions: InventoryModel
    values: ValueTable
    policy: Policy
    report: SimReport


def train_grid(cfg: ScenarioConfig) -> QuantGrid:
    """Exogenous quantization grids from paths driven by random admissible actions.

    Late stages that few training paths reach get as many points as they have
    samples; stages no path reaches are dropped, shortening the horizon in
    arrivals.
    """
    seed = cfg.seed.child(0)
    s = cfg.solver
    batch = simulate_batch(random_policy(cfg.liquidation, seed.generator(1)), cfg.liquidation,
                           cfg.market, cfg.intensity, s.train_paths, seed.generator(0), s.stages)
    points, scales = [], []
    for k in range(s.stages + 1):
        cloud = batch.stage_coords(k)
        if cloud.shape[0] == 0:
            log.info("%s: no training path reaches stage %d; using %d stages", cfg.label, k, k - 1)
            break
        pts, scale = quantile_grid(cloud[:, [0, 2, 3]], min(s.grid_points, cloud.shape[0]))
        points.append(pts)
        scales.append(scale)
    if len(points) < 2:
        raise InsufficientDataError(f"{cfg.label}: no arrivals in training paths")
    return QuantGrid(points, scales, inventory_levels(cfg.liquidation))


def solve_scenario(cfg: ScenarioConfig, threads: int = 1) -> ScenarioResult:
    grid = train_grid(cfg)
    model = estimate_transitions(grid, cfg.liquidation, cfg.market, cfg.intensity,
                                 cfg.solver.mc_paths, cfg.seed.child(1), threads=threads)
    values, policy = backward_dp(grid, model, cfg.liquidation)
    report = evaluate_policy(policy, grid, cfg.liquidation, cfg.market, cfg.intensity,
                             cfg.solver.eval_paths, cfg.seed.child(2), label=cfg.label)
    return ScenarioResult(cfg, grid, model, values, policy, report)


def _failed(cfg: ScenarioConfig, exc: Exception) -> SimReport:
    nan5 = (math.nan,) * 5
    return SimReport(cfg.label, math.nan, math.nan, math.nan, nan5, nan5, 0, cfg.seed.seed,
                     cfg.intensity.excitation, cfg.intensity.decay,
                     error=f"{type(exc).__name__}: {exc}")


def _run_one(cfg: ScenarioConfig):
    try:
        return solve_scenario(cfg)
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        log.error("scenario %s failed: %s", cfg.label, exc)
        return exc


def run_batch_results(configs, parallelism: int = 1) -> list:
    """Solve every scenario; failed scenarios yield their exception instead of a result."""
    configs = list(configs)
    if parallelism > 1 and len(configs) > 1:
        with ThreadPoolExecutor(parallelism) as pool:
            return list(pool.map(_run_one, configs))
    return [_run_one(c) for c in configs]


def run_batch(configs, parallelism: int = 1) -> list:
    """One :class:`SimReport` per scenario, in input order.

    Each scenario's randomness comes only from its own seed, so the reports do
    not depend on ``parallelism``. A failing scenario produces a report with
    ``error`` set and NaN figures; the rest of the batch still runs.
    """
    configs = list(configs)
    out = []
    for cfg, res in zip(configs, run_batch_results(configs, parallelism)):
        out.append(_failed(cfg, res) if isinstance(res, Exception) else res.report)
    return out
