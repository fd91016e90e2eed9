"""Quantized backward dynamic programming over the embedded chain.

Stage ``k`` is the state right after the ``k``-th arrival. Its coordinates
split into an exogenous part ``(time, intensity, price)``, whose evolution
does not depend on how many shares are held, and the inventory, which moves
deterministically by ``slice * gamma`` at each arrival. The exogenous part is
quantized per stage by a finite grid with a scaled Euclidean metric; the
inventory lives on a fixed lattice of levels shared by every stage. The
stage grid is the product of the two.

Transition probabilities between consecutive exogenous grids are estimated by
simulating one epoch from every grid point under every action. An extra
absorbing column collects the paths that reach the deadline without another
arrival; the haircut credit they receive is linear in the inventory held.

:func:`backward_dp` solves either a generic finite :class:`TransitionModel`
or the factorized :class:`InventoryModel`; :meth:`InventoryModel.expand`
turns the latter into an equivalent generic model.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, InsufficientDataError
from .impact import ImpactedIntensityState, evolve_level, impact_value, jump_level
from .pdmp import LiquidationConfig, MarketParams, PathBatch, draw_marks, invert_arrival, simulate_batch
from .rng import as_seed

log = logging.getLogger(__name__)

COORDS = ("time", "inventory", "intensity", "price")
EXOGENOUS = ("time", "intensity", "price")
_EXO_COLS = [0, 2, 3]
# inventories closer than this fraction of the lattice span count as equal
_SNAP = 1e-9


# ---------------------------------------------------------------------------
# inventory lattice


def inventory_levels(config: LiquidationConfig, max_levels: int = 2001,
                     fallback_levels: int = 201) -> np.ndarray:
    """Ascending inventory levels for the DP.

    When every action is a whole number the reachable inventories are
    ``q0 - m * lot`` with ``lot = slice * gcd(actions)``; those levels (plus 0)
    are exact. Otherwise, or if there would be more than ``max_levels`` of
    them, a uniform grid of ``fallback_levels`` on ``[0, q0]`` is used and
    values between levels are interpolated linearly.
    """
    acts = config.actions[1:]
    q0 = config.q0
    if acts.size and np.allclose(acts, np.round(acts), rtol=0, atol=1e-9):
        g = int(np.gcd.reduce(np.round(acts).astype(np.int64)))
        lot = config.slice * g
        count = int(math.floor(q0 / lot * (1 + 1e-12)))
        if count + 2 <= max_levels:
            levels = q0 - lot * np.arange(count, -1, -1)
            if levels[0] > _SNAP * q0:
                levels = np.concatenate([[0.0], levels])
            else:
                levels[0] = 0.0
            return levels
    return np.linspace(0.0, q0, fallback_levels)


def _locate_levels(levels: np.ndarray, target: np.ndarray) -> tuple:
    """Interpolation bracket of each target: ``(lo, weight of lo + 1, inside)``."""
    span = levels[-1] - levels[0] if levels.size > 1 else 1.0
    tol = _SNAP * max(span, 1.0)
    inside = (target >= levels[0] - tol) & (target <= levels[-1] + tol)
    t = np.clip(target, levels[0], levels[-1])
    hi = np.clip(np.searchsorted(levels, t, side="left"), 0, levels.size - 1)
    exact = np.abs(levels[hi] - t) <= tol
    lo = np.where(exact, hi, np.maximum(hi - 1, 0))
    width = levels[np.minimum(lo + 1, levels.size - 1)] - levels[lo]
    w = np.where(exact | (width <= 0), 0.0, (t - levels[lo]) / np.where(width > 0, width, 1.0))
    return lo, w, inside


def nearest_level(levels: np.ndarray, inventory) -> np.ndarray:
    """Index of the closest level; ties go to the lower level."""
    inv = np.asarray(inventory, dtype=float)
    hi = np.clip(np.searchsorted(levels, inv, side="left"), 0, levels.size - 1)
    lo = np.maximum(hi - 1, 0)
    return np.where(np.abs(levels[hi] - inv) < np.abs(inv - levels[lo]), hi, lo)


# ---------------------------------------------------------------------------
# grids


@dataclass
class QuantGrid:
    """Per-stage exogenous grid points, metric scales and the inventory lattice.

    ``points[k]`` holds ``(time, intensity, price)`` rows. Product grid states
    are indexed ``i * n_levels + l`` for exogenous point ``i`` and level ``l``.
    """

    points: list            # stage -> (N_k, 3)
    scales: list            # stage -> (3,)
    levels: np.ndarray      # (L,) ascending inventory levels

    @property
    def n_stages(self) -> int:
        """Number of decision stages; grids exist for stages ``0..n_stages``."""
        return len(self.points) - 1

    @property
    def n_levels(self) -> int:
        return self.levels.size

    def size(self, stage: int) -> int:
        return self.points[stage].shape[0]

    def states(self, stage: int) -> np.ndarray:
        """Full ``(time, inventory, intensity, price)`` rows of the product grid."""
        pts = self.points[stage]
        n, L = pts.shape[0], self.n_levels
        out = np.empty((n * L, 4))
        out[:, 0] = np.repeat(pts[:, 0], L)
        out[:, 1] = np.tile(self.levels, n)
        out[:, 2] = np.repeat(pts[:, 1], L)
        out[:, 3] = np.repeat(pts[:, 2], L)
        return out

    def project(self, states, stage: int):
        return project(states, self, stage)


def _leaf_points(x: np.ndarray, n_points: int, scale: np.ndarray) -> list:
    if n_points == 1:
        return [np.median(x, axis=0)]
    z = x / scale
    axis = int(np.argmax(z.std(axis=0)))
    n_left = n_points // 2
    n_right = n_points - n_left
    order = np.argsort(z[:, axis], kind="stable")
    cut = int(round(x.shape[0] * n_left / n_points))
    cut = min(max(cut, n_left), x.shape[0] - n_right)
    return (_leaf_points(x[order[:cut]], n_left, scale)
            + _leaf_points(x[order[cut:]], n_right, scale))


def quantile_grid(samples: np.ndarray, n_points: int) -> tuple:
    """Grid of ``n_points`` by recursive quantile splitting of ``samples``.

    The cloud is split at the quantile ``floor(n/2)/n`` of the coordinate with
    the largest scaled spread, recursively, and each final cell contributes
    its per-coordinate median. Deterministic given the samples. Returns
    ``(points, scale)`` where ``scale`` is the per-coordinate sample standard
    deviation (1 for constant coordinates).
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < n_points:
        have = x.shape[0] if x.ndim == 2 else 0
        raise InsufficientDataError(f"need at least {n_points} samples, got {have}")
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return np.array(_leaf_points(x, n_points, scale)), scale


def build_grid(samples: Sequence[np.ndarray], points_per_stage: int,
               levels: Optional[np.ndarray] = None) -> QuantGrid:
    """One quantile grid per stage from ``(time, inventory, intensity, price)`` clouds.

    Only the exogenous columns are quantized. Without explicit ``levels`` the
    inventory lattice is the set of distinct sampled inventories.
    """
    points, scales = [], []
    for k, cloud in enumerate(samples):
        cloud = np.asarray(cloud, dtype=float).reshape(-1, 4)
        try:
            pts, scale = quantile_grid(cloud[:, _EXO_COLS], points_per_stage)
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"stage {k}: {exc}") from None
        points.append(pts)
        scales.append(scale)
    if levels is None:
        levels = np.unique(np.concatenate([np.asarray(c, dtype=float).reshape(-1, 4)[:, 1] for c in samples]))
    return QuantGrid(points, scales, np.asarray(levels, dtype=float))


def project_exogenous(exo, grid: QuantGrid, stage: int) -> np.ndarray:
    """Nearest exogenous grid point of ``(time, intensity, price)`` rows; ties go low."""
    if not 0 <= stage < len(grid.points):
        raise IndexError(f"stage {stage} out of range")
    x = np.atleast_2d(np.asarray(exo, dtype=float))
    pts = grid.points[stage] / grid.scales[stage]
    z = x / grid.scales[stage]
    d2 = ((z[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def locate(states, grid: QuantGrid, stage: int) -> tuple:
    """``(exogenous index, inventory level index)`` of full-coordinate states."""
    x = np.atleast_2d(np.asarray(states, dtype=float))
    return project_exogenous(x[:, _EXO_COLS], grid, stage), nearest_level(grid.levels, x[:, 1])


def project(states, grid: QuantGrid, stage: int):
    """Flat index of the nearest product-grid state; ties go to the lowest index.

    On a product grid the scaled distance separates, so the nearest state
    pairs the nearest exogenous point with the nearest inventory level.
    """
    single = np.asarray(states).ndim == 1
    i, l = locate(states, grid, stage)
    flat = i * grid.n_levels + l
    return int(flat[0]) if single else flat


def within_cell_variance(samples: np.ndarray, points: np.ndarray, scale: np.ndarray) -> float:
    """Mean squared scaled distance from samples to their nearest point."""
    z = samples / scale
    p = points / scale
    d2 = ((z[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).mean())


# ---------------------------------------------------------------------------
# transition models


def _check_rows(k, prob, absorb, ok, atol):
    if np.any(prob < 0) or np.any(absorb < 0):
        raise ContractError(f"stage {k}: negative transition probability")
    rows = prob.sum(axis=2) + absorb
    if not np.allclose(rows[ok], 1.0, atol=atol, rtol=0):
        raise ContractError(f"stage {k}: rows do not sum to 1")


@dataclass
class TransitionModel:
    """Generic finite model for stages ``k = 0 .. n-1``.

    ``prob[k]`` has shape ``(A, N_k, N_{k+1})`` and ``absorb[k]`` shape
    ``(A, N_k)``; together each admissible row sums to one. ``reward[k]`` is
    the expected one-step reward (absorbed paths included) and
    ``admissible[k]`` masks the actions allowed at each state. ``terminal``
    holds the stage-``n`` values.
    """

    actions: np.ndarray
    prob: list
    absorb: list
    reward: list
    admissible: list
    terminal: np.ndarray

    @property
    def n_stages(self) -> int:
        return len(self.prob)

    def check(self, atol: float = 1e-9) -> None:
        for k in range(self.n_stages):
            _check_rows(k, self.prob[k], self.absorb[k], self.admissible[k], atol)


@dataclass
class InventoryModel:
    """Factorized liquidation model on an exogenous grid times an inventory lattice.

    Per stage ``k`` and action ``a`` at exogenous point ``i``:

    * ``prob[k][a, i, j]``: probability that the next arrival lands in cell ``j``;
    * ``absorb[k][a, i]``: probability of no further arrival before the deadline;
    * ``proceeds[k][a, i]``: expected discounted sale proceeds at that arrival;
    * ``credit[k][a, i]``: expected discounted haircut credit per share held,
      received when absorbed.

    ``terminal[j]`` is the per-share credit at the last stage grid.
    """

    actions: np.ndarray
    slice: float
    levels: np.ndarray
    prob: list
    absorb: list
    proceeds: list
    credit: list
    terminal: np.ndarray

    @property
    def n_stages(self) -> int:
        return len(self.prob)

    def admissible(self) -> np.ndarray:
        """``(A, L)`` mask of actions that do not oversell each level."""
        tol = _SNAP * max(1.0, float(self.levels[-1]))
        return self.actions[:, None] * self.slice <= self.levels[None, :] + tol

    def shifts(self) -> list:
        """Per action, the interpolation bracket of every level after selling."""
        return [_locate_levels(self.levels, self.levels - self.slice * g) for g in self.actions]

    def check(self, atol: float = 1e-9) -> None:
        for k in range(self.n_stages):
            ok = np.ones(self.absorb[k].shape, dtype=bool)
            _check_rows(k, self.prob[k], self.absorb[k], ok, atol)

    def expand(self) -> TransitionModel:
        """The same model as a generic :class:`TransitionModel` on product states."""
        L = self.levels.size
        ok = self.admissible()
        move = np.zeros((self.actions.size, L, L))
        for a, (lo, w, inside) in enumerate(self.shifts()):
            rows = np.flatnonzero(ok[a] & inside)
            move[a, rows, lo[rows]] += 1.0 - w[rows]
            move[a, rows, np.minimum(lo[rows] + 1, L - 1)] += w[rows]
        prob, absorb, reward, admissible = [], [], [], []
        for k in range(self.n_stages):
            n_act, n_here, n_next = self.prob[k].shape
            # state i*L + l moves to j*L + l'
            p = np.einsum("aij,alm->ailjm", self.prob[k], move)
            prob.append(p.reshape(n_act, n_here * L, n_next * L))
            absorb.append(np.repeat(self.absorb[k], L, axis=1))
            reward.append((self.proceeds[k][:, :, None]
                           + self.credit[k][:, :, None] * self.levels[None, None, :]).reshape(n_act, -1))
            admissible.append(np.tile(ok, (1, n_here)))
        terminal = (self.terminal[:, None] * self.levels[None, :]).reshape(-1)
        return TransitionModel(self.actions, prob, absorb, reward, admissible, terminal)


def _step_from(exo: np.ndarray, gamma: float, exp_draw: np.ndarray, marks: np.ndarray,
               config: LiquidationConfig, params: MarketParams, intensity: ImpactedIntensityState):
    """One epoch from ``(time, intensity, price)`` rows at a fixed rate.

    ``exp_draw`` and ``marks`` hold one draw per row. Returns next exogenous
    coordinates (NaN when absorbed), discounted sale proceeds, per-share
    absorption credit and the arrival mask.
    """
    t, lam, s = exo.T
    drift = float(impact_value(intensity.impact, gamma))
    when = invert_arrival(t, lam, drift, intensity.decay, config.horizon, exp_draw)
    hit = np.isfinite(when)
    nxt = np.full(exo.shape, np.nan)
    proceeds = np.zeros(exo.shape[0])
    credit = np.zeros(exo.shape[0])
    miss = ~hit
    credit[miss] = ((1.0 - config.terminal_haircut) * math.exp(-params.r * config.horizon)
                    * s[miss] * np.exp(params.mu * (config.horizon - t[miss])))
    if hit.any():
        dt = when[hit] - t[hit]
        price = s[hit] * np.exp(params.mu * dt) * (1.0 - marks[hit])
        proceeds[hit] = np.exp(-params.r * when[hit]) * price * config.slice * gamma
        level = np.maximum(evolve_level(lam[hit], drift, intensity.decay, dt), 0.0)
        nxt[hit] = np.column_stack([when[hit], jump_level(level, intensity.excitation)[0], price])
    return nxt, proceeds, credit, hit


def terminal_credit_per_share(points: np.ndarray, config: LiquidationConfig,
                              params: MarketParams) -> np.ndarray:
    """Haircut credit per share for ``(time, intensity, price)`` points at the deadline."""
    t, _, s = points.T
    return ((1.0 - config.terminal_haircut) * math.exp(-params.r * config.horizon)
            * s * np.exp(params.mu * (config.horizon - np.minimum(t, config.horizon))))


def _estimate_stage(k, grid, config, params, intensity, mc_paths, seed):
    pts = grid.points[k]
    n_here, n_next = pts.shape[0], grid.size(k + 1)
    n_act = config.actions.size
    start = np.repeat(pts, mc_paths, axis=0)
    rng = seed.generator(k)
    # every action sees the same draws, so action comparisons are not swamped by noise
    exp_draw = rng.standard_exponential(start.shape[0])
    marks = draw_marks(params, rng, start.shape[0])
    owner = np.repeat(np.arange(n_here), mc_paths)
    prob = np.zeros((n_act, n_here, n_next))
    absorb = np.zeros((n_act, n_here))
    proceeds = np.zeros((n_act, n_here))
    credit = np.zeros((n_act, n_here))
    for a, gamma in enumerate(config.actions):
        nxt, gain, cred, hit = _step_from(start, gamma, exp_draw, marks, config, params, intensity)
        if hit.any():
            cell = project_exogenous(nxt[hit], grid, k + 1)
            np.add.at(prob[a], (owner[hit], cell), 1.0)
        absorb[a] = np.bincount(owner, weights=~hit, minlength=n_here)
        proceeds[a] = np.bincount(owner, weights=gain, minlength=n_here)
        credit[a] = np.bincount(owner, weights=cred, minlength=n_here)
    return prob / mc_paths, absorb / mc_paths, proceeds / mc_paths, credit / mc_paths


def estimate_transitions(grid: QuantGrid, config: LiquidationConfig, params: MarketParams,
                         intensity: ImpactedIntensityState, mc_paths: int, seed,
                         threads: int = 1) -> InventoryModel:
    """Monte Carlo kernel between consecutive exogenous grids.

    Every (grid point, action) pair is simulated ``mc_paths`` times, with the
    same random draws reused across actions. Stage ``k`` draws from substream
    ``k`` of ``seed``, so the result does not depend on ``threads``.
    """
    if mc_paths < 1:
        raise ValueError("mc_paths must be >= 1")
    seed = as_seed(seed)
    args = [(k, grid, config, params, intensity, mc_paths, seed) for k in range(grid.n_stages)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _estimate_stage(*a), args))
    else:
        parts = [_estimate_stage(*a) for a in args]
    return InventoryModel(
        actions=config.actions,
        slice=config.slice,
        levels=grid.levels,
        prob=[p[0] for p in parts],
        absorb=[p[1] for p in parts],
        proceeds=[p[2] for p in parts],
        credit=[p[3] for p in parts],
        terminal=terminal_credit_per_share(grid.points[-1], config, params),
    )


# ---------------------------------------------------------------------------
# dynamic programming


@dataclass
class Policy:
    """Optimal rate per stage, indexed like the value table."""

    actions: list

    def rate(self, stage: int, *index):
        return self.actions[stage][index]


@dataclass
class ValueTable:
    """Stage values: ``(N_k,)`` for generic models, ``(N_k, L)`` for inventory models."""

    values: list

    def __getitem__(self, stage):
        return self.values[stage]


def q_values(model: TransitionModel, k: int, v_next: np.ndarray) -> np.ndarray:
    """``(A, N_k)`` action values at stage ``k``; inadmissible entries are ``-inf``."""
    q = model.reward[k] + model.prob[k] @ v_next
    return np.where(model.admissible[k], q, -np.inf)


def inventory_q_values(model: InventoryModel, k: int, v_next: np.ndarray,
                       shifts=None, ok=None) -> np.ndarray:
    """``(A, N_k, L)`` action values of an :class:`InventoryModel` at stage ``k``."""
    shifts = model.shifts() if shifts is None else shifts
    ok = model.admissible() if ok is None else ok
    n_act, n_here, _ = model.prob[k].shape
    L = model.levels.size
    q = np.full((n_act, n_here, L), -np.inf)
    for a, (lo, w, inside) in enumerate(shifts):
        cols = ok[a] & inside
        cont = v_next[:, lo] * (1.0 - w) + v_next[:, np.minimum(lo + 1, L - 1)] * w
        value = (model.proceeds[k][a][:, None] + model.credit[k][a][:, None] * model.levels[None, :]
                 + model.prob[k][a] @ cont)
        q[a][:, cols] = value[:, cols]
    return q


def backward_dp(grid: Optional[QuantGrid], model, config: Optional[LiquidationConfig] = None) -> tuple:
    """Backward induction; returns ``(ValueTable, Policy)``.

    Works on a generic :class:`TransitionModel` or a factorized
    :class:`InventoryModel`. Ties between actions resolve to the smaller rate.
    """
    n = model.n_stages
    if config is not None and not np.array_equal(config.actions, model.actions):
        raise ContractError("transition actions differ from the configured action grid")
    if np.any(np.diff(model.actions) <= 0):
        raise ContractError("actions must be strictly ascending")
    factored = isinstance(model, InventoryModel)
    if factored:
        terminal = model.terminal[:, None] * model.levels[None, :]
        shifts, ok = model.shifts(), model.admissible()
    else:
        terminal = np.asarray(model.terminal, dtype=float)
    if grid is not None:
        if grid.n_stages != n:
            raise ContractError(f"grid has {grid.n_stages} stages, transitions have {n}")
        if terminal.shape[0] != grid.size(n):
            raise ContractError("terminal values do not match the last stage grid")
    values = [None] * (n + 1)
    rates = [None] * (n + 1)
    values[n] = terminal
    rates[n] = np.zeros(terminal.shape)
    for k in range(n - 1, -1, -1):
        n_next = values[k + 1].shape[0]
        if model.prob[k].shape[2] != n_next:
            raise ContractError(f"stage {k}: transition width {model.prob[k].shape[2]} != {n_next}")
        if factored:
            q = inventory_q_values(model, k, values[k + 1], shifts, ok)
        else:
            q = q_values(model, k, values[k + 1])
        # argmax returns the first maximum, i.e. the smallest rate
        best = np.argmax(q, axis=0)
        values[k] = np.take_along_axis(q, best[None], axis=0)[0]
        rates[k] = model.actions[best]
    return ValueTable(values), Policy(rates)


def value_iteration(reward: np.ndarray, prob: np.ndarray, admissible: np.ndarray, discount: float,
                    init: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> tuple:
    """Fixed point of the discounted stationary Bellman operator.

    ``reward`` and ``admissible`` are ``(A, N)``, ``prob`` is ``(A, N, N)``
    (sub-stochastic rows are allowed). Returns ``(values, iterations)``.
    """
    if not 0 <= discount < 1:
        raise ValueError("discount must be in [0, 1)")
    v = np.asarray(init, dtype=float).copy()
    for it in range(1, max_iter + 1):
        q = np.where(admissible, reward + discount * (prob @ v), -np.inf)
        new = q.max(axis=0)
        if np.max(np.abs(new - v)) <= tol:
            return new, it
        v = new
    return v, max_iter


# ---------------------------------------------------------------------------
# evaluation


def grid_policy(policy: Policy, grid: QuantGrid):
    """Batch policy for :func:`simulate_batch` that projects and looks up rates."""
    def act(k, coords):
        i, l = locate(coords, grid, k)
        return policy.actions[k][i, l]
    return act


def quantiles(values: np.ndarray, probes=(10, 25, 50, 75, 100)) -> tuple:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return tuple(math.nan for _ in probes)
    return tuple(float(v) for v in np.percentile(values, probes))


@dataclass
class SimReport:
    """Mean revenue and rate and inventory quantiles from policy evaluation.

    ``revenue`` nets in the terminal credit; ``gross_revenue`` counts only
    proceeds from arrivals.
    """

    label: str
    revenue: float
    revenue_se: float
    gross_revenue: float
    rate_quantiles: tuple
    inventory_quantiles: tuple
    n_paths: int
    seed: int
    excitation: float = math.nan
    decay: float = math.nan
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "revenue": self.revenue,
            "revenue_se": self.revenue_se,
            "gross_revenue": self.gross_revenue,
            "rate_quantiles": list(self.rate_quantiles),
            "inventory_quantiles": list(self.inventory_quantiles),
            "n_paths": self.n_paths,
            "seed": self.seed,
            "excitation": self.excitation,
            "decay": self.decay,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        return cls(
            label=d["label"], revenue=d["revenue"], revenue_se=d["revenue_se"],
            gross_revenue=d["gross_revenue"], rate_quantiles=tuple(d["rate_quantiles"]),
            inventory_quantiles=tuple(d["inventory_quantiles"]), n_paths=d["n_paths"],
            seed=d["seed"], excitation=d["excitation"], decay=d["decay"], error=d.get("error"),
        )


def summarize(batch: PathBatch, label: str = "", seed: int = 0) -> SimReport:
    revenue = batch.revenue
    se = float(revenue.std(ddof=1) / math.sqrt(revenue.size)) if revenue.size > 1 else math.nan
    return SimReport(
        label=label,
        revenue=float(revenue.mean()),
        revenue_se=se,
        gross_revenue=float(batch.gross.mean()),
        rate_quantiles=quantiles(batch.gamma),
        inventory_quantiles=quantiles(batch.inventory),
        n_paths=batch.n_paths,
        seed=seed,
    )


def evaluate_policy(policy: Policy, grid: QuantGrid, config: LiquidationConfig, params: MarketParams,
                    intensity: ImpactedIntensityState, n_paths: int, seed, label: str = "") -> SimReport:
    """Simulate the grid policy for ``grid.n_stages`` arrivals and summarize."""
    seed = as_seed(seed)
    batch = simulate_batch(grid_policy(policy, grid), config, params, intensity, n_paths,
                           seed, grid.n_stages)
    report = summarize(batch, label, seed.seed)
    report.excitation = intensity.excitation
    report.decay = intensity.decay
    return report


# ---------------------------------------------------------------------------
# serialization


def policy_document(grid: QuantGrid, values: ValueTable, policy: Policy) -> list:
    """Per stage: exogenous points with value and rate listed per inventory level."""
    doc = []
    for k, pts in enumerate(grid.points):
        doc.append({
            "stage": k,
            "scale": [float(c) for c in grid.scales[k]],
            "points": [
                {"coords": [float(c) for c in pts[i]],
                 "value": [float(v) for v in values[k][i]],
                 "gamma": [float(g) for g in policy.actions[k][i]]}
                for i in range(pts.shape[0])
            ],
        })
    return doc


def dumps_policy(grid: QuantGrid, values: ValueTable, policy: Policy) -> str:
    return json.dumps({
        "coords": list(EXOGENOUS),
        "inventory": [float(q) for q in grid.levels],
        "stages": policy_document(grid, values, policy),
    }, indent=1) + "\n"


def loads_policy(text: str) -> tuple:
    """Inverse of :func:`dumps_policy`."""
    doc = json.loads(text)
    points, scales, vals, rates = [], [], [], []
    for stage in doc["stages"]:
        pts = stage["points"]
        points.append(np.array([p["coords"] for p in pts], dtype=float).reshape(len(pts), -1))
        scales.append(np.array(stage["scale"], dtype=float))
        vals.append(np.array([p["value"] for p in pts], dtype=float))
        rates.append(np.array([p["gamma"] for p in pts], dtype=float))
    levels = np.array(doc["inventory"], dtype=float)
    return QuantGrid(points, scales, levels), ValueTable(vals), Policy(rates)
