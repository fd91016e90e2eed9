"""Order-statistics model of the limit order book.

Orders arrive as a Poisson stream with prices drawn from a distribution F.
Given ``L`` orders still unexecuted, the number of unexecuted orders priced
above the current best ``Y`` is Poisson with an exceedance rate that depends
on ``F(Y)``. Two algebraic groupings of that rate exist in the literature
(``1 - F(Y) t`` versus ``(1 - F(Y)) t``); both are available through
``ExceedanceModel.variant`` and coincide at ``t = 1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ClampWarning, DomainError
from .rng import as_generator

VARIANTS = ("theorem", "proof")


@dataclass(frozen=True)
class PriceDistribution:
    """Uniform ``(a, b)`` or lognormal ``(mu, s)`` price law.

    ``uniform`` with ``a == b`` is allowed and degenerates to a point mass.
    """

    family: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.family == "uniform":
            a, b = self.params
            if not a <= b:
                raise ValueError(f"uniform requires a <= b, got ({a}, {b})")
        elif self.family == "lognormal":
            _, s = self.params
            if not s > 0:
                raise ValueError(f"lognormal requires s > 0, got {s}")
        else:
            raise ValueError(f"unsupported price family {self.family!r}")

    @classmethod
    def uniform(cls, a: float, b: float) -> "PriceDistribution":
        return cls("uniform", (a, b))

    @classmethod
    def lognormal(cls, mu: float, s: float) -> "PriceDistribution":
        return cls("lognormal", (mu, s))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "uniform":
            a, b = self.params
            if a == b:
                out = (x >= a).astype(float)
            else:
                out = np.clip((x - a) / (b - a), 0.0, 1.0)
        else:
            mu, s = self.params
            out = stats.lognorm.cdf(x, s, scale=math.exp(mu))
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        rng = as_generator(rng)
        if self.family == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=size)
        mu, s = self.params
        return rng.lognormal(mu, s, size=size)

    @property
    def upper(self) -> float:
        return self.params[1] if self.family == "uniform" else math.inf


@dataclass(frozen=True, eq=False)
class BookSnapshot:
    prices: np.ndarray
    t: float = 0.0
    unexecuted_count: int = 0

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float).reshape(-1)
        if not np.all(np.isfinite(prices)):
            raise ValueError("prices must be finite")
        if self.unexecuted_count < 0:
            raise ValueError("unexecuted_count must be >= 0")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    def __eq__(self, other):
        if not isinstance(other, BookSnapshot):
            return NotImplemented
        return (self.t == other.t and self.unexecuted_count == other.unexecuted_count
                and np.array_equal(self.prices, other.prices))

    @property
    def size(self) -> int:
        return self.prices.size


@dataclass(frozen=True)
class ExceedanceModel:
    rate: float
    elapsed: float
    threshold_cdf: float
    carried: int = 0
    variant: str = "proof"

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if not 0.0 <= self.threshold_cdf <= 1.0:
            raise ValueError(f"threshold_cdf must be in [0, 1], got {self.threshold_cdf}")
        if self.carried < 0:
            raise ValueError(f"carried must be >= 0, got {self.carried}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass(frozen=True)
class ExceedanceRate:
    """Exceedance rate together with whether it was clamped at zero."""

    value: float
    raw: float
    clamped: bool

    def __float__(self):
        return self.value


def _carry_term(rate: float, carried: int) -> float:
    # rate^(L+1) / (L+1)!
    m = carried + 1
    if rate == 0.0:
        return 0.0
    if m <= 170:
        return rate**m / math.factorial(m)
    return math.exp(m * math.log(rate) - math.lgamma(m + 1))


def exceedance_rate(model: ExceedanceModel) -> ExceedanceRate:
    lam, t, fy = float(model.rate), float(model.elapsed), float(model.threshold_cdf)
    if lam == 0.0:
        return ExceedanceRate(0.0, 0.0, False)
    arg = math.exp(lam * fy) - _carry_term(lam, int(model.carried))
    if not arg > 0.0:
        raise DomainError(
            f"ln argument exp(rate*F(Y)) - rate^(L+1)/(L+1)! = {arg!r} is not positive "
            f"(rate={lam}, F(Y)={fy}, L={model.carried})"
        )
    if model.variant == "theorem":
        head = 1.0 - fy * t
    else:
        head = (1.0 - fy) * t
    raw = lam * (head - math.log(arg))
    if raw < 0.0:
        warnings.warn(f"negative exceedance rate {raw:.6g} clamped to 0", ClampWarning, stacklevel=2)
        return ExceedanceRate(0.0, raw, True)
    return ExceedanceRate(raw, raw, False)


def exceedance_pmf(k: int, lambda_y: float) -> float:
    """Poisson probability of ``k`` unexecuted orders above the threshold."""
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a non-negative integer, got {k}")
    lambda_y = float(lambda_y)
    if lambda_y < 0:
        raise ValueError(f"lambda_y must be >= 0, got {lambda_y}")
    if lambda_y == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lambda_y) - lambda_y - math.lgamma(k + 1))


def exceedance_cdf(k: int, lambda_y: float) -> float:
    return math.fsum(exceedance_pmf(j, lambda_y) for j in range(int(k) + 1))


def order_statistics(prices) -> np.ndarray:
    prices = np.asarray(prices, dtype=float).reshape(-1)
    if prices.size == 0:
        raise ValueError("order_statistics of an empty book")
    return np.sort(prices, kind="stable")


def top_k_sum(snapshot: BookSnapshot, k: int) -> float:
    _check_k(snapshot, k)
    return float(order_statistics(snapshot.prices)[-k:].sum())


def boundary_weights(k: int, lambda_y: float) -> np.ndarray:
    """Weights for the top ``k`` orders, best order first.

    The order ranked ``r`` from the top (``r = 1`` is the best) gets weight
    ``P(U <= k - r)`` with ``U ~ Poisson(lambda_y)``.
    """
    return np.array([exceedance_cdf(k - r, lambda_y) for r in range(1, k + 1)])


def expected_boundary(snapshot: BookSnapshot, k: int, model: ExceedanceModel) -> float:
    _check_k(snapshot, k)
    lam_y = exceedance_rate(model).value
    top = order_statistics(snapshot.prices)[::-1][:k]
    return float(np.dot(boundary_weights(k, lam_y), top))


def depth_payoff(snapshot: BookSnapshot, k: int, model: ExceedanceModel) -> float:
    """Positive part of realized minus expected top-``k`` sum."""
    return max(top_k_sum(snapshot, k) - expected_boundary(snapshot, k, model), 0.0)


def _check_k(snapshot: BookSnapshot, k: int) -> None:
    if snapshot.size == 0:
        raise ValueError("empty book")
    if not 1 <= k <= snapshot.size:
        raise ValueError(f"k must be in [1, {snapshot.size}], got {k}")


def count_exceedances(rate: float, elapsed: float, dist: PriceDistribution, threshold: float,
                      n_runs: int, seed) -> np.ndarray:
    """Monte Carlo counts of arrivals on ``(0, elapsed)`` priced above ``threshold``.

    Each run draws a Poisson number of orders and a price for every order; no
    conditioning on carried orders is applied.
    """
    rng = as_generator(seed)
    n_orders = rng.poisson(rate * elapsed, size=n_runs)
    prices = dist.sample(rng, size=int(n_orders.sum()))
    run_id = np.repeat(np.arange(n_runs), n_orders)
    return np.bincount(run_id, weights=prices > threshold, minlength=n_runs).astype(np.int64)


def write_snapshot(snapshot: BookSnapshot, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# t={snapshot.t!r}\n# L={snapshot.unexecuted_count}\nprice\n")
        for p in snapshot.prices:
            fh.write(f"{p:.17g}\n")


def read_snapshot(path) -> BookSnapshot:
    t, count, prices = 0.0, 0, []
    header_seen = False
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            key = key.strip()
            if key == "t":
                t = float(value)
            elif key == "L":
                count = int(value)
            continue
        if not header_seen:
            if line != "price":
                raise ValueError(f"{path}: expected header 'price', got {line!r}")
            header_seen = True
            continue
        prices.append(float(line))
    return BookSnapshot(np.array(prices), t, count)
