"""Trading impact on the order-arrival intensity.

The intensity follows ``d lambda = (f(gamma) - kappa * lambda) dt + sigma dN``
where ``f`` is a power or exponential impact function of the trading rate.
Between arrivals and for a constant rate the ODE has the closed form used by
:func:`evolve_between_jumps`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

FAMILIES = ("power", "exponential")


@dataclass(frozen=True)
class ImpactFunction:
    family: str = "exponential"
    alpha: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"impact family must be one of {FAMILIES}, got {self.family!r}")
        # alpha = 0 is accepted as the zero-impact limit of both families
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")

    def __call__(self, gamma):
        return impact_value(self, gamma)


def impact_value(f: ImpactFunction, gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError(f"trading rate must be >= 0, got {gamma}")
    if f.family == "power":
        out = np.power(g, f.alpha)
    else:
        out = np.exp(f.alpha * g)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ImpactedIntensityState:
    """Current arrival intensity plus the constants driving its dynamics.

    ``clamped`` records whether the last jump hit the zero floor.
    """

    level: float
    decay: float
    excitation: float
    impact: ImpactFunction = ImpactFunction()
    clamped: bool = False

    def __post_init__(self):
        if not self.decay > 0:
            raise ValueError(f"decay must be > 0, got {self.decay}")
        if not self.level >= 0:
            raise ValueError(f"intensity level must be >= 0, got {self.level}")

    def steady_level(self, gamma: float) -> float:
        return impact_value(self.impact, gamma) / self.decay


def evolve_level(level, drift, decay, dt):
    """Array form of the exact between-jump step, ``drift = f(gamma)``."""
    target = drift / decay
    return target + (level - target) * np.exp(-decay * dt)


def evolve_between_jumps(state: ImpactedIntensityState, gamma: float, dt: float) -> ImpactedIntensityState:
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    drift = impact_value(state.impact, gamma)
    level = float(evolve_level(state.level, drift, state.decay, dt))
    return replace(state, level=max(level, 0.0), clamped=False)


def jump_level(level, excitation):
    """Array form of the jump: returns the new level and a clamp mask."""
    raw = np.asarray(level, dtype=float) + excitation
    return np.maximum(raw, 0.0), raw < 0.0


def apply_jump(state: ImpactedIntensityState) -> ImpactedIntensityState:
    raw = state.level + state.excitation
    return replace(state, level=max(raw, 0.0), clamped=raw < 0.0)


def permanent_intensity(alpha: float, gamma_T: float, kappa: float) -> float:
    """Long-run intensity under linearized exponential impact, ``(1 + alpha*gamma)/kappa``."""
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    return (1.0 + alpha * gamma_T) / kappa


def instantaneous_intensity(alpha: float, gamma_eps: float, kappa: float, t: float) -> float:
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return math.exp(-kappa * t + alpha * gamma_eps)


def impact_integral(alpha: float, gamma: float, kappa: float, t: float) -> float:
    """``integral_0^t exp(alpha*gamma) exp(-kappa (t - s)) ds`` for constant gamma."""
    return math.exp(alpha * gamma) * -math.expm1(-kappa * t) / kappa
