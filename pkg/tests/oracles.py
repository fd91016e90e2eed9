"""Independent reference computations shared by the test modules."""
import itertools

import mpmath as mp
import numpy as np
from scipy import stats

from liqsim.solver import TransitionModel


def random_model(rng, n_stages, sizes, n_actions, absorb=True):
    """Analytic transition model with random rewards, kernels and admissibility.

    ``sizes[k]`` is the number of grid points at stage ``k`` (``n_stages + 1``
    entries). Action 0 is always admissible.
    """
    actions = np.arange(n_actions, dtype=float)
    prob, absorb_mass, reward, admissible = [], [], [], []
    for k in range(n_stages):
        n_here, n_next = sizes[k], sizes[k + 1]
        width = n_next + (1 if absorb else 0)
        w = rng.dirichlet(np.ones(width), size=(n_actions, n_here))
        prob.append(w[..., :n_next])
        absorb_mass.append(w[..., n_next] if absorb else np.zeros((n_actions, n_here)))
        reward.append(rng.uniform(0.0, 10.0, size=(n_actions, n_here)))
        ok = rng.random((n_actions, n_here)) < 0.7
        ok[0] = True
        admissible.append(ok)
    terminal = rng.uniform(0.0, 10.0, size=sizes[-1])
    return TransitionModel(actions, prob, absorb_mass, reward, admissible, terminal)


def enumerate_policies(model):
    """Stage-0 values of every deterministic Markov policy, one row per policy."""
    downstream = model.terminal[None, :]
    for k in range(model.n_stages - 1, -1, -1):
        ok = model.admissible[k]
        per_point = [np.flatnonzero(ok[:, i]) for i in range(ok.shape[1])]
        local = np.array(list(itertools.product(*per_point)), dtype=int)   # (M, N_k)
        pts = np.arange(ok.shape[1])
        r = model.reward[k][local, pts]                                     # (M, N_k)
        p = model.prob[k][local, pts]                                       # (M, N_k, N_k+1)
        vals = r[:, None, :] + np.einsum("mij,cj->mci", p, downstream)
        downstream = vals.reshape(-1, ok.shape[1])
    return downstream


def policy_value(model, rates):
    """Exact stage-0 value of the Markov policy choosing ``rates[k][i]``."""
    v = model.terminal
    for k in range(model.n_stages - 1, -1, -1):
        a = np.searchsorted(model.actions, rates[k])
        pts = np.arange(a.size)
        assert np.all(model.admissible[k][a, pts])
        v = model.reward[k][a, pts] + model.prob[k][a, pts] @ v
    return v


def exhaustive_optimum(model):
    return enumerate_policies(model).max(axis=0)


def sell_max_value(q0, slice_, gamma_max, level, horizon, haircut, s0, max_epochs):
    """Exact expected revenue of selling ``slice * gamma_max`` at every arrival.

    Constant Poisson intensity ``level``, constant price ``s0``, no discounting.
    The inventory runs out after ``m`` arrivals, so the shares sold are
    ``slice * gamma_max * min(N_T, m, max_epochs)`` with ``N_T ~ Poisson(level * T)``;
    what is left is credited at ``(1 - haircut) * s0``.
    """
    lot = slice_ * gamma_max
    if q0 % lot:
        raise ValueError("q0 must be a whole number of lots")
    m = min(int(q0 // lot), max_epochs)
    n = np.arange(m)
    mu = level * horizon
    expected_min = np.sum(n * stats.poisson.pmf(n, mu)) + m * stats.poisson.sf(m - 1, mu)
    sold = lot * expected_min
    return s0 * (sold + (1.0 - haircut) * (q0 - sold))


def oracle_rate(lam, t, fy, carried, variant):
    """Exceedance rate from its closed form at 40 significant digits, unclamped."""
    with mp.workdps(40):
        lam, t, fy = mp.mpf(lam), mp.mpf(t), mp.mpf(fy)
        arg = mp.e ** (lam * fy) - lam ** (carried + 1) / mp.factorial(carried + 1)
        head = 1 - fy * t if variant == "theorem" else (1 - fy) * t
        return float(lam * (head - mp.log(arg)))
