"""Piecewise-deterministic liquidation process.

State between arrivals moves deterministically: the intensity relaxes toward
``f(gamma)/kappa`` and the price drifts by ``exp(mu * dt)``. At an arrival
the price takes a multiplicative mark ``S -> S (1 - J)``, the trader sells
``slice * gamma`` shares at that price, and the intensity jumps by ``sigma``.
Inventory and cash change only at arrivals.

The scalar operations (:func:`flow`, :func:`sample_next_jump`, :func:`jump`)
and the vectorized :func:`simulate_batch` share the same array kernels.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError
from .impact import ImpactedIntensityState, evolve_between_jumps, evolve_level, impact_value, jump_level
from .lob import PriceDistribution
from .rng import as_generator

# tolerance for gamma * slice <= inventory, relative to q0
_ADMISSIBLE_RTOL = 1e-9


@dataclass(frozen=True)
class MarketParams:
    """Price and discounting parameters.

    Jump marks default to ``uniform(-vol, vol)``; a custom ``mark_dist`` must
    be uniform with upper bound below 1 so prices stay positive.
    """

    s0: float = 1.0
    mu: float = 0.0
    vol: float = 0.0
    r: float = 0.0
    mark_dist: Optional[PriceDistribution] = None

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError(f"s0 must be > 0, got {self.s0}")
        if not self.vol >= 0:
            raise ValueError(f"vol must be >= 0, got {self.vol}")
        if not self.r >= 0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        marks = self.marks
        if marks.family != "uniform" or not marks.upper < 1.0:
            raise ValueError("jump marks must be uniform(a, b) with b < 1 to keep prices positive")

    @property
    def marks(self) -> PriceDistribution:
        if self.mark_dist is not None:
            return self.mark_dist
        return PriceDistribution.uniform(-self.vol, self.vol)

    def mean_price(self, t):
        """Expected price at time ``t`` (marks enter multiplicatively)."""
        return self.s0 * np.exp(self.mu * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class LiquidationConfig:
    q0: float
    slice: float
    horizon: float
    action_grid: tuple
    terminal_haircut: float = 0.5

    def __post_init__(self):
        grid = tuple(float(g) for g in self.action_grid)
        object.__setattr__(self, "action_grid", grid)
        if not self.q0 > 0:
            raise ValueError(f"q0 must be > 0, got {self.q0}")
        if not self.slice > 0:
            raise ValueError(f"slice must be > 0, got {self.slice}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if not grid or any(g < 0 for g in grid) or list(grid) != sorted(set(grid)):
            raise ValueError(f"action_grid must be strictly ascending and non-negative, got {grid}")
        if grid[0] != 0.0:
            raise ValueError("action_grid must contain 0 (the no-trade action)")
        if self.slice * grid[-1] > self.q0:
            raise ValueError("slice * max(action_grid) exceeds q0")
        if not 0.0 <= self.terminal_haircut <= 1.0:
            raise ValueError(f"terminal_haircut must be in [0, 1], got {self.terminal_haircut}")

    @property
    def actions(self) -> np.ndarray:
        return np.array(self.action_grid)

    @property
    def _tol(self) -> float:
        return _ADMISSIBLE_RTOL * max(1.0, self.q0)


@dataclass(frozen=True)
class PdmpState:
    t: float
    inventory: float
    cash: float
    intensity: ImpactedIntensityState
    price: float

    def __post_init__(self):
        if self.inventory < 0:
            raise ValueError(f"inventory must be >= 0, got {self.inventory}")
        if not self.price > 0:
            raise ValueError(f"price must be > 0, got {self.price}")

    @classmethod
    def initial(cls, config: LiquidationConfig, params: MarketParams,
                intensity: ImpactedIntensityState) -> "PdmpState":
        return cls(0.0, config.q0, 0.0, intensity, params.s0)

    def coords(self) -> np.ndarray:
        """Reduced coordinates ``(time, inventory, intensity, price)``."""
        return np.array([self.t, self.inventory, self.intensity.level, self.price])


@dataclass(frozen=True)
class ChainNode:
    """Stage ``k`` of the embedded chain: jump time and post-jump state."""

    k: int
    jump_time: float
    post_jump: PdmpState


# ---------------------------------------------------------------------------
# admissibility


def admissible_mask(inventory, config: LiquidationConfig) -> np.ndarray:
    """Boolean ``(..., n_actions)`` mask of ``gamma * slice <= inventory``."""
    inv = np.asarray(inventory, dtype=float)[..., None]
    return config.actions * config.slice <= inv + config._tol


def admissible_actions(state: PdmpState, config: LiquidationConfig) -> list:
    mask = admissible_mask(state.inventory, config)
    return [g for g, ok in zip(config.action_grid, mask) if ok]


def clip_to_admissible(gamma, inventory, config: LiquidationConfig) -> np.ndarray:
    """Largest admissible grid action not above ``gamma``, elementwise."""
    gamma = np.asarray(gamma, dtype=float)
    inv = np.asarray(inventory, dtype=float)
    cap = np.minimum(gamma, (inv + config._tol) / config.slice)
    idx = np.searchsorted(config.actions, cap + 1e-12, side="right") - 1
    return config.actions[np.maximum(idx, 0)]


# ---------------------------------------------------------------------------
# array kernels


def next_arrival(t0, level, drift, decay, horizon, rng) -> np.ndarray:
    """Thinning draw of the next arrival after ``t0`` for a batch of paths.

    Between arrivals the intensity is ``target + (level - target) exp(-decay s)``
    with ``target = drift / decay``, which is monotone, so
    ``max(level, target)`` bounds it. Returns ``inf`` where no arrival happens
    before ``horizon``.
    """
    t0 = np.asarray(t0, dtype=float)
    level = np.broadcast_to(np.asarray(level, dtype=float), t0.shape)
    drift = np.broadcast_to(np.asarray(drift, dtype=float), t0.shape)
    target = drift / decay
    bound = np.maximum(level, target)
    out = np.full(t0.shape, np.inf)
    s = np.zeros(t0.shape)
    active = (bound > 0) & (t0 < horizon)
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        e = rng.standard_exponential(idx.size)
        u = rng.random(idx.size)
        s[idx] += e / bound[idx]
        when = t0[idx] + s[idx]
        late = when >= horizon
        lam = target[idx] + (level[idx] - target[idx]) * np.exp(-decay * s[idx])
        accept = ~late & (u * bound[idx] < lam)
        out[idx[accept]] = when[accept]
        active[idx[late | accept]] = False
    return out


def invert_arrival(t0, level, drift, decay, horizon, exp_draw, iterations: int = 64) -> np.ndarray:
    """Next arrival as the time where the compensator reaches ``exp_draw``.

    Same law as :func:`next_arrival` when ``exp_draw`` is standard exponential,
    but a single draw per path, so runs that share draws stay coupled across
    different drifts. Solved by bisection; ``inf`` where the compensator up to
    ``horizon`` stays below the draw.
    """
    t0 = np.asarray(t0, dtype=float)
    level = np.broadcast_to(np.asarray(level, dtype=float), t0.shape)
    drift = np.broadcast_to(np.asarray(drift, dtype=float), t0.shape)
    e = np.broadcast_to(np.asarray(exp_draw, dtype=float), t0.shape)
    target = drift / decay

    def compensator(s):
        return target * s + (level - target) * -np.expm1(-decay * s) / decay

    span = np.maximum(horizon - t0, 0.0)
    hit = compensator(span) > e
    lo = np.zeros(t0.shape)
    hi = span.copy()
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = compensator(mid) < e
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(hit, t0 + hi, np.inf)


def draw_marks(params: MarketParams, rng, size) -> np.ndarray:
    return params.marks.sample(rng, size=size)


# ---------------------------------------------------------------------------
# scalar operations


def flow(state: PdmpState, gamma: float, dt: float, params: MarketParams) -> PdmpState:
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return state
    return replace(
        state,
        t=state.t + dt,
        intensity=evolve_between_jumps(state.intensity, gamma, dt),
        price=state.price * math.exp(params.mu * dt),
    )


def sample_next_jump(state: PdmpState, gamma: float, rng, params: MarketParams, horizon: float):
    """Next arrival time and the post-mark price, or ``(None, None)``."""
    if not state.t < horizon:
        raise ValueError(f"state time {state.t} is not before the horizon {horizon}")
    rng = as_generator(rng)
    drift = impact_value(state.intensity.impact, gamma)
    when = next_arrival(np.array([state.t]), state.intensity.level, drift,
                        state.intensity.decay, horizon, rng)[0]
    if not np.isfinite(when):
        return None, None
    mark = draw_marks(params, rng, 1)[0]
    price = state.price * math.exp(params.mu * (when - state.t)) * (1.0 - mark)
    return float(when), float(price)


def reward(pre_state: PdmpState, gamma: float, config: LiquidationConfig, params: MarketParams) -> float:
    """Discounted proceeds of selling ``slice * gamma`` at the current price."""
    return math.exp(-params.r * pre_state.t) * pre_state.price * config.slice * gamma


def jump(state: PdmpState, gamma: float, config: LiquidationConfig, params: MarketParams) -> PdmpState:
    if gamma not in config.action_grid:
        raise ContractError(f"gamma={gamma} is not in the action grid")
    if gamma * config.slice > state.inventory + config._tol:
        raise ContractError(
            f"gamma={gamma} sells {gamma * config.slice} shares with only {state.inventory} held")
    level, clamped = jump_level(state.intensity.level, state.intensity.excitation)
    return replace(
        state,
        inventory=max(state.inventory - config.slice * gamma, 0.0),
        cash=state.cash + reward(state, gamma, config, params),
        intensity=replace(state.intensity, level=float(level), clamped=bool(clamped)),
    )


def terminal_credit(state: PdmpState, config: LiquidationConfig, params: MarketParams) -> float:
    """Value received for inventory left at the deadline after the haircut."""
    if state.t < config.horizon - 1e-12:
        raise ValueError(f"terminal value requested at t={state.t} before horizon {config.horizon}")
    return ((1.0 - config.terminal_haircut) * math.exp(-params.r * config.horizon)
            * state.price * state.inventory)


def terminal_penalty(state: PdmpState, config: LiquidationConfig, params: MarketParams) -> float:
    """Value lost to the haircut relative to liquidating at the fair price."""
    if state.t < config.horizon - 1e-12:
        raise ValueError(f"terminal value requested at t={state.t} before horizon {config.horizon}")
    return config.terminal_haircut * math.exp(-params.r * config.horizon) * state.price * state.inventory


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """One simulated path of the embedded chain.

    ``gammas[k]`` is the rate chosen at node ``k``. ``mark_prices[k]`` is the
    post-mark price of the arrival that created node ``k + 1``.
    """

    nodes: list
    gammas: list
    mark_prices: list
    rewards: list
    final_state: PdmpState
    terminal_credit: float

    @property
    def revenue(self) -> float:
        return math.fsum(self.rewards) + self.terminal_credit


def _epoch(state, gamma, rng, config, params):
    when, price = sample_next_jump(state, gamma, rng, params, config.horizon)
    if when is None:
        return None, None, flow(state, gamma, config.horizon - state.t, params)
    moved = replace(flow(state, gamma, when - state.t, params), price=price)
    return when, price, moved


def simulate_trajectory(policy: Callable, config: LiquidationConfig, params: MarketParams,
                        intensity: ImpactedIntensityState, seed, max_epochs: int) -> Trajectory:
    """Scalar path simulation; ``policy(k, state)`` returns a grid rate.

    The path stops at the deadline or after ``max_epochs`` arrivals; any
    inventory left is then credited at the deadline with the haircut.
    """
    rng = as_generator(seed)
    state = PdmpState.initial(config, params, intensity)
    nodes = [ChainNode(0, 0.0, state)]
    gammas, marks, rewards = [], [], []
    for k in range(max_epochs):
        gamma = float(clip_to_admissible(policy(k, state), state.inventory, config))
        when, price, moved = _epoch(state, gamma, rng, config, params)
        gammas.append(gamma)
        if when is None:
            state = moved
            break
        rewards.append(reward(moved, gamma, config, params))
        state = jump(moved, gamma, config, params)
        marks.append(price)
        nodes.append(ChainNode(k + 1, when, state))
    if state.t < config.horizon:
        state = flow(state, 0.0, config.horizon - state.t, params)
    return Trajectory(nodes, gammas, marks, rewards, state, terminal_credit(state, config, params))


def replay(initial: PdmpState, jump_times: Sequence[float], mark_prices: Sequence[float],
           gammas: Sequence[float], config: LiquidationConfig, params: MarketParams) -> list:
    """Rebuild chain nodes from recorded jump times, marks and actions."""
    state = initial
    nodes = [ChainNode(0, initial.t, initial)]
    for k, (when, price) in enumerate(zip(jump_times, mark_prices)):
        gamma = gammas[k]
        state = replace(flow(state, gamma, when - state.t, params), price=price)
        state = jump(state, gamma, config, params)
        nodes.append(ChainNode(k + 1, when, state))
    return nodes


@dataclass
class PathBatch:
    """Vectorized record of many paths, one row per path.

    State arrays have ``max_epochs + 1`` columns (stage ``k`` is the state
    after ``k`` arrivals, NaN if never reached). ``gamma`` and ``reward`` have
    ``max_epochs`` columns; ``gamma`` is NaN where no decision was taken.
    """

    time: np.ndarray
    inventory: np.ndarray
    cash: np.ndarray
    intensity: np.ndarray
    price: np.ndarray
    gamma: np.ndarray
    reward: np.ndarray
    terminal_credit: np.ndarray
    n_jumps: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.time.shape[0]

    @property
    def revenue(self) -> np.ndarray:
        return self.reward.sum(axis=1) + self.terminal_credit

    @property
    def gross(self) -> np.ndarray:
        return self.reward.sum(axis=1)

    def stage_coords(self, k: int) -> np.ndarray:
        """``(time, inventory, intensity, price)`` rows of paths that reached stage ``k``."""
        rows = np.isfinite(self.time[:, k])
        return np.column_stack([self.time[rows, k], self.inventory[rows, k],
                                self.intensity[rows, k], self.price[rows, k]])

    def write_csv(self, path, path_index: int = 0) -> None:
        """Dump one path as ``k, T_k, inventory, cash, intensity, price, gamma``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "T_k", "inventory", "cash", "intensity", "price", "gamma"])
            for k in range(self.n_jumps[path_index] + 1):
                g = self.gamma[path_index, k] if k < self.gamma.shape[1] else float("nan")
                w.writerow([k] + [f"{v:.12g}" for v in (
                    self.time[path_index, k], self.inventory[path_index, k],
                    self.cash[path_index, k], self.intensity[path_index, k],
                    self.price[path_index, k], g)])


BatchPolicy = Callable[[int, np.ndarray], np.ndarray]


def simulate_batch(policy: BatchPolicy, config: LiquidationConfig, params: MarketParams,
                   intensity: ImpactedIntensityState, n_paths: int, seed, max_epochs: int) -> PathBatch:
    """Simulate ``n_paths`` trajectories at once.

    ``policy(k, coords)`` receives the ``(m, 4)`` reduced coordinates of the
    paths alive at stage ``k`` and returns ``m`` rates; they are clipped to
    the largest admissible grid action.
    """
    rng = as_generator(seed)
    cols = max_epochs + 1
    time = np.full((n_paths, cols), np.nan)
    inv = np.full((n_paths, cols), np.nan)
    cash = np.full((n_paths, cols), np.nan)
    lam = np.full((n_paths, cols), np.nan)
    price = np.full((n_paths, cols), np.nan)
    gamma = np.full((n_paths, max_epochs), np.nan)
    rew = np.zeros((n_paths, max_epochs))
    time[:, 0] = 0.0
    inv[:, 0] = config.q0
    cash[:, 0] = 0.0
    lam[:, 0] = intensity.level
    price[:, 0] = params.s0
    n_jumps = np.zeros(n_paths, dtype=np.int64)
    # price and inventory of each path at its end, before flowing to the deadline
    end_t = np.zeros(n_paths)
    end_q = np.full(n_paths, float(config.q0))
    end_s = np.full(n_paths, float(params.s0))
    alive = np.arange(n_paths)
    decay = intensity.decay
    for k in range(max_epochs):
        if alive.size == 0:
            break
        coords = np.column_stack([time[alive, k], inv[alive, k], lam[alive, k], price[alive, k]])
        g = clip_to_admissible(policy(k, coords), inv[alive, k], config)
        gamma[alive, k] = g
        drift = impact_value(intensity.impact, g)
        when = next_arrival(time[alive, k], lam[alive, k], drift, decay, config.horizon, rng)
        hit = np.isfinite(when)
        stop = alive[~hit]
        end_t[stop] = time[stop, k]
        end_q[stop] = inv[stop, k]
        end_s[stop] = price[stop, k]
        go = alive[hit]
        if go.size == 0:
            alive = go
            break
        dt = when[hit] - time[go, k]
        marks = draw_marks(params, rng, go.size)
        new_price = price[go, k] * np.exp(params.mu * dt) * (1.0 - marks)
        sold = config.slice * g[hit]
        rew[go, k] = np.exp(-params.r * when[hit]) * new_price * sold
        time[go, k + 1] = when[hit]
        inv[go, k + 1] = np.maximum(inv[go, k] - sold, 0.0)
        cash[go, k + 1] = cash[go, k] + rew[go, k]
        evolved = evolve_level(lam[go, k], drift[hit], decay, dt)
        lam[go, k + 1] = jump_level(np.maximum(evolved, 0.0), intensity.excitation)[0]
        price[go, k + 1] = new_price
        n_jumps[go] += 1
        alive = go
    # paths still alive after max_epochs arrivals stop at their last arrival
    end_t[alive] = time[alive, max_epochs]
    end_q[alive] = inv[alive, max_epochs]
    end_s[alive] = price[alive, max_epochs]
    final_price = end_s * np.exp(params.mu * (config.horizon - end_t))
    credit = (1.0 - config.terminal_haircut) * math.exp(-params.r * config.horizon) * final_price * end_q
    return PathBatch(time, inv, cash, lam, price, gamma, rew, credit, n_jumps)


def constant_policy(gamma: float) -> BatchPolicy:
    def policy(k, coords):
        return np.full(coords.shape[0], gamma)
    return policy


def random_policy(config: LiquidationConfig, seed) -> BatchPolicy:
    """Uniformly random admissible actions; used to spread training samples."""
    rng = as_generator(seed)

    def policy(k, coords):
        mask = admissible_mask(coords[:, 1], config)
        counts = mask.sum(axis=1)
        pick = np.floor(rng.random(coords.shape[0]) * counts).astype(int)
        return config.actions[pick]
    return policy
