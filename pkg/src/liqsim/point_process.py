"""Homogeneous Poisson and exponential-kernel Hawkes processes.

The Hawkes intensity is

    lambda(t) = max(0, base + excitation * sum_{t_i < t} exp(-decay * (t - t_i)))

Negative ``excitation`` gives a self-damping process; the floor at zero keeps
the intensity meaningful in that case, both when simulating and when
evaluating the likelihood.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import ConvergenceWarning, StabilityError
from .rng import RngSeed, as_generator

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EventStream:
    """Strictly increasing event times observed on ``[0, horizon]``."""

    horizon: float
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if times.size:
            if times[0] < 0 or times[-1] > self.horizon:
                raise ValueError("event times must lie in [0, horizon]")
            if np.any(np.diff(times) <= 0):
                raise ValueError("event times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "horizon", float(self.horizon))

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.times, other.times)

    def count_before(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="left"))


@dataclass(frozen=True)
class HawkesParams:
    base: float
    excitation: float
    decay: float

    def __post_init__(self):
        if not self.decay > 0:
            raise ValueError(f"decay must be > 0, got {self.decay}")
        if not self.base >= 0:
            raise ValueError(f"base must be >= 0, got {self.base}")
        if not math.isfinite(self.excitation):
            raise ValueError("excitation must be finite")

    @property
    def branching_ratio(self) -> float:
        return self.excitation / self.decay

    @property
    def stable(self) -> bool:
        return self.excitation < self.decay

    def stationary_rate(self) -> float:
        """Long-run mean event rate, ``base / (1 - excitation/decay)``.

        Only meaningful for ``0 <= excitation < decay``; the zero floor makes
        the self-damping rate differ from this linear formula.
        """
        if not self.stable:
            return math.inf
        return self.base / (1.0 - self.branching_ratio)

    def as_tuple(self):
        return (self.base, self.excitation, self.decay)


# ---------------------------------------------------------------------------
# simulation


def simulate_poisson(rate: float, horizon: float, seed) -> EventStream:
    """Homogeneous Poisson sample on ``[0, horizon]``."""
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rng = as_generator(seed)
    n = rng.poisson(rate * horizon)
    times = np.sort(rng.uniform(0.0, horizon, size=n))
    return EventStream(horizon, times)


@njit(cache=True)
def _ogata(rng, base, excitation, decay, horizon, max_events):
    out = np.empty(64)
    n = 0
    t = 0.0
    # excitation * sum of kernels, evaluated at the current time t
    excess = 0.0
    while True:
        level = base + excess
        if level < 0.0:
            level = 0.0
        # between events the unclamped intensity moves monotonically toward base
        bound = level if level > base else base
        if bound <= 0.0:
            break
        wait = rng.standard_exponential() / bound
        t_next = t + wait
        if t_next > horizon:
            break
        excess *= math.exp(-decay * wait)
        t = t_next
        level = base + excess
        if level < 0.0:
            level = 0.0
        if rng.random() * bound < level:
            if n == out.size:
                grown = np.empty(2 * out.size)
                grown[:n] = out[:n]
                out = grown
            out[n] = t
            n += 1
            excess += excitation
            if n >= max_events:
                break
    return out[:n].copy()


def simulate_hawkes(
    params: HawkesParams,
    horizon: float,
    seed,
    allow_unstable: bool = False,
    max_events: int = 10_000_000,
) -> EventStream:
    """Ogata thinning sample of an exponential-kernel Hawkes process.

    Supercritical parameters (``excitation >= decay``) may produce an
    exploding number of events and must be requested explicitly with
    ``allow_unstable``. ``max_events`` caps the output in that case.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not params.stable and not allow_unstable:
        raise StabilityError(
            f"excitation {params.excitation} >= decay {params.decay}: "
            "pass allow_unstable=True to simulate a supercritical process"
        )
    rng = as_generator(seed)
    times = _ogata(rng, float(params.base), float(params.excitation), float(params.decay),
                   float(horizon), int(max_events))
    return EventStream(horizon, times)


def simulate_counts(params: HawkesParams, horizon: float, n_runs: int, seed: RngSeed,
                    allow_unstable: bool = False) -> np.ndarray:
    """Event counts of ``n_runs`` independent Hawkes samples.

    Run ``i`` uses stream ``(seed.seed, seed.stream, i)`` so any subset of runs
    can be reproduced individually.
    """
    counts = np.empty(n_runs, dtype=np.int64)
    for i in range(n_runs):
        counts[i] = len(simulate_hawkes(params, horizon, seed.generator(i), allow_unstable))
    return counts


# ---------------------------------------------------------------------------
# intensity and likelihood


def intensity_at(stream: EventStream, params: HawkesParams, t: float) -> float:
    """Left-continuous intensity: events at exactly ``t`` are not yet counted."""
    if not 0.0 <= t <= stream.horizon:
        raise ValueError(f"t={t} outside [0, {stream.horizon}]")
    past = stream.times[: stream.count_before(t)]
    value = params.base + params.excitation * np.exp(-params.decay * (t - past)).sum()
    return max(0.0, float(value))


@njit(cache=True)
def _segment_integral(base, c, decay, d):
    # integral over [0, d] of max(0, base + c * exp(-decay * u))
    if d <= 0.0:
        return 0.0
    if base + c >= 0.0:
        return base * d - c * math.expm1(-decay * d) / decay
    if base <= 0.0:
        return 0.0
    u0 = math.log(-c / base) / decay
    if u0 >= d:
        return 0.0
    return base * (d - u0) + (-base - c * math.exp(-decay * d)) / decay


@njit(cache=True)
def _loglik_parts(times, horizon, base, excitation, decay):
    # returns (sum of log-intensities at events, compensator); -inf if some intensity is 0
    logs = 0.0
    comp = 0.0
    excess = 0.0
    t_prev = 0.0
    for i in range(times.size):
        d = times[i] - t_prev
        comp += _segment_integral(base, excess, decay, d)
        excess *= math.exp(-decay * d)
        level = base + excess
        if level <= 0.0:
            logs = -np.inf
        else:
            logs += math.log(level)
        excess += excitation
        t_prev = times[i]
    comp += _segment_integral(base, excess, decay, horizon - t_prev)
    return logs, comp


@njit(cache=True)
def _exp_loglik(times, horizon, base, excitation, decay):
    logs, comp = _loglik_parts(times, horizon, base, excitation, decay)
    return logs - comp


def compensator(stream: EventStream, params: HawkesParams) -> float:
    """Closed-form ``integral_0^T lambda(s) ds`` including the zero floor."""
    return float(_loglik_parts(stream.times, stream.horizon, float(params.base),
                               float(params.excitation), float(params.decay))[1])


def log_likelihood(stream: EventStream, params: HawkesParams) -> float:
    """Exact log-likelihood of an exponential-kernel Hawkes process.

    Returns ``-inf`` when the intensity is zero at some event time, which can
    only happen for self-damping parameters.
    """
    value = float(_exp_loglik(stream.times, stream.horizon, float(params.base),
                              float(params.excitation), float(params.decay)))
    if value == -math.inf:
        log.debug("zero intensity at an event time for %s", params)
    return value


@dataclass(frozen=True)
class MLEResult:
    params: HawkesParams
    log_likelihood: float
    converged: bool
    iterations: int


def fit_mle(
    stream: EventStream,
    init: HawkesParams,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> MLEResult:
    """Maximum-likelihood Hawkes parameters by bounded Nelder-Mead.

    The search starts at ``init`` and never returns parameters with a lower
    likelihood than ``init``. If the iteration cap is hit the best point found
    is returned with ``converged=False`` and a :class:`ConvergenceWarning`.
    """
    if len(stream) < 10:
        raise ValueError(f"need at least 10 events to fit, got {len(stream)}")
    times = stream.times
    horizon = stream.horizon

    def objective(x):
        if x[0] <= 0 or x[2] <= 0:
            return 1e300
        value = _exp_loglik(times, horizon, x[0], x[1], x[2])
        return -value if np.isfinite(value) else 1e300

    x0 = np.array(init.as_tuple(), dtype=float)
    x0[0] = max(x0[0], 1e-6)
    simplex = np.tile(x0, (4, 1))
    for j in range(3):
        simplex[j + 1, j] += 0.1 * max(abs(x0[j]), 0.1)
    floor = 1e-10
    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=[(floor, None), (None, None), (floor, None)],
        options={"initial_simplex": simplex, "maxiter": max_iter, "maxfev": 4 * max_iter,
                 "xatol": tol, "fatol": tol},
    )
    best = res.x
    best_ll = -res.fun if res.fun < 1e300 else -math.inf
    init_ll = log_likelihood(stream, init)
    if not best_ll >= init_ll:
        best, best_ll = x0, init_ll
    if not res.success:
        warnings.warn(f"MLE did not converge after {res.nit} iterations: {res.message}",
                      ConvergenceWarning, stacklevel=2)
    params = HawkesParams(float(best[0]), float(best[1]), float(best[2]))
    return MLEResult(params, float(best_ll), bool(res.success), int(res.nit))


# ---------------------------------------------------------------------------
# CSV


def write_events(stream: EventStream, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# horizon={stream.horizon!r}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "time"])
        for i, t in enumerate(stream.times):
            writer.writerow([i, f"{t:.17g}"])


def read_events(path, horizon: float | None = None) -> EventStream:
    """Read an ``index,time`` CSV.

    The horizon comes from a ``# horizon=`` comment line when present, else
    from the argument, else the last event time.
    """
    file_horizon = None
    rows = []
    with open(Path(path), newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "horizon":
                    file_horizon = float(value)
                continue
            lines.append(line)
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["index", "time"]:
        raise ValueError(f"{path}: expected header 'index,time'")
    for row in reader:
        rows.append(float(row["time"]))
    times = np.array(rows, dtype=float)
    if horizon is None:
        horizon = file_horizon if file_horizon is not None else (times[-1] if times.size else 1.0)
    return EventStream(horizon, times)
