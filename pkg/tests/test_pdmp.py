import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from liqsim import pdmp
from liqsim.errors import ContractError
from liqsim.impact import ImpactedIntensityState, ImpactFunction
from liqsim.rng import RngSeed

ZERO_IMPACT = ImpactFunction("exponential", 0.0)     # f == 1


def _intensity(level=1.0, decay=0.6, excitation=0.1, f=ImpactFunction("exponential", 0.02)):
    return ImpactedIntensityState(level, decay, excitation, f)


def _state(t=0.0, q=100.0, cash=0.0, level=1.0, price=1.0, **kw):
    return pdmp.PdmpState(t, q, cash, _intensity(level, **kw), price)


CFG = pdmp.LiquidationConfig(q0=100.0, slice=10.0, horizon=5.0, action_grid=(0, 1, 2, 5), terminal_haircut=0.5)
MKT = pdmp.MarketParams(s0=1.0, mu=0.01, vol=0.05, r=0.02)


# --- configuration ------------------------------------------------------------------


def test_liquidation_config_validation():
    with pytest.raises(ValueError):
        pdmp.LiquidationConfig(10, 1, 1, (0, 2, 1))
    with pytest.raises(ValueError):
        pdmp.LiquidationConfig(10, 1, 1, (1, 2))
    with pytest.raises(ValueError):
        pdmp.LiquidationConfig(10, 6, 1, (0, 2))
    with pytest.raises(ValueError):
        pdmp.LiquidationConfig(10, 1, 1, (0, 1), terminal_haircut=1.5)


def test_market_params_validation():
    with pytest.raises(ValueError):
        pdmp.MarketParams(s0=0.0)
    with pytest.raises(ValueError):
        pdmp.MarketParams(vol=1.0)
    with pytest.raises(ValueError):
        pdmp.MarketParams(r=-0.1)


# --- admissible actions -------------------------------------------------------------


def test_admissible_examples():
    assert pdmp.admissible_actions(_state(q=0.0), CFG) == [0.0]
    assert pdmp.admissible_actions(_state(q=100.0), CFG) == list(CFG.action_grid)
    cfg = pdmp.LiquidationConfig(10.0, 2.0, 1.0, (0, 1, 2))
    assert pdmp.admissible_actions(_state(q=3.0), cfg) == [0.0, 1.0]


def test_clip_to_admissible():
    got = pdmp.clip_to_admissible([5, 5, 3, 0], [100, 25, 100, 0], CFG)
    assert got.tolist() == [5.0, 2.0, 2.0, 0.0]


# --- flow ---------------------------------------------------------------------------


def test_flow_identity_at_zero_dt():
    s = _state()
    assert pdmp.flow(s, 2.0, 0.0, MKT) == s


def test_flow_no_trade_power_impact():
    s = _state(level=2.0, f=ImpactFunction("power", 0.5))
    out = pdmp.flow(s, 0.0, 1.5, MKT)
    assert out.intensity.level == pytest.approx(2.0 * math.exp(-0.6 * 1.5), rel=1e-14)
    assert out.price == pytest.approx(math.exp(0.01 * 1.5), rel=1e-14)
    assert (out.inventory, out.cash, out.t) == (s.inventory, s.cash, 1.5)


@settings(max_examples=100, deadline=None)
@given(dt=st.floats(0, 4), gamma=st.sampled_from([0.0, 1.0, 2.0, 5.0]), level=st.floats(0, 5))
def test_flow_semigroup(dt, gamma, level):
    s = _state(level=level)
    half = pdmp.flow(pdmp.flow(s, gamma, dt / 2, MKT), gamma, dt / 2, MKT)
    full = pdmp.flow(s, gamma, dt, MKT)
    assert half.t == pytest.approx(full.t, abs=1e-12)
    assert half.intensity.level == pytest.approx(full.intensity.level, abs=1e-12)
    assert half.price == pytest.approx(full.price, abs=1e-12)


# --- sampling -----------------------------------------------------------------------


def test_no_arrival_with_zero_intensity():
    s = _state(level=0.0, f=ImpactFunction("power", 0.5))
    assert pdmp.sample_next_jump(s, 0.0, RngSeed(1), MKT, 5.0) == (None, None)


def test_constant_intensity_gaps_are_exponential():
    # sigma = 0 and f = kappa * lambda keeps the intensity at lambda = 2
    level, decay = 2.0, 0.5
    t0 = np.zeros(100_000)
    gaps = pdmp.next_arrival(t0, level, decay * level, decay, 1e9, np.random.default_rng(2))
    assert stats.kstest(gaps, "expon", args=(0, 1 / level)).pvalue > 0.01
    # the scalar path goes through the same kernel
    s = pdmp.PdmpState(0.0, 100.0, 0.0, ImpactedIntensityState(level, decay, 0.0, ZERO_IMPACT), 1.0)
    rng = np.random.default_rng(3)
    scalar = [pdmp.sample_next_jump(s, 0.0, rng, pdmp.MarketParams(), 1e9)[0] for _ in range(20_000)]
    assert stats.kstest(scalar, "expon", args=(0, 1 / level)).pvalue > 0.01


def test_time_varying_intensity_arrival_law():
    # P(no arrival before t) = exp(-integral of the deterministic intensity)
    level, drift, decay, horizon = 3.0, 0.2, 1.5, 2.0
    when = pdmp.next_arrival(np.zeros(100_000), level, drift, decay, horizon, np.random.default_rng(4))
    target = drift / decay
    for t in (0.2, 0.7, 1.5):
        comp = target * t + (level - target) * (1 - math.exp(-decay * t)) / decay
        assert np.mean(when > t) == pytest.approx(math.exp(-comp), abs=0.005)
    assert np.mean(np.isinf(when)) == pytest.approx(
        math.exp(-(target * horizon + (level - target) * (1 - math.exp(-decay * horizon)) / decay)), abs=0.005)


def test_inversion_arrivals_match_thinning():
    level, drift, decay, horizon = 0.4, 2.0, 0.8, 3.0
    rng = np.random.default_rng(9)
    inv = pdmp.invert_arrival(np.zeros(50_000), level, drift, decay, horizon,
                              rng.standard_exponential(50_000))
    thin = pdmp.next_arrival(np.zeros(50_000), level, drift, decay, horizon, rng)
    assert np.mean(np.isinf(inv)) == pytest.approx(np.mean(np.isinf(thin)), abs=0.01)
    assert stats.ks_2samp(inv[np.isfinite(inv)], thin[np.isfinite(thin)]).pvalue > 1e-3


def test_inversion_solves_compensator():
    level, drift, decay = 2.0, 0.3, 1.1
    e = np.array([0.05, 0.5, 1.7])
    when = pdmp.invert_arrival(np.full(3, 0.5), level, drift, decay, 10.0, e)
    s = when - 0.5
    target = drift / decay
    comp = target * s + (level - target) * (1 - np.exp(-decay * s)) / decay
    np.testing.assert_allclose(comp, e, rtol=1e-12)
    # a draw beyond the compensator at the deadline means no arrival
    assert np.isinf(pdmp.invert_arrival(0.0, 0.0, 0.0, 1.0, 1.0, 0.1))


def test_sample_next_jump_reproducible():
    s = _state()
    a = pdmp.sample_next_jump(s, 2.0, RngSeed(5), MKT, 5.0)
    assert a == pdmp.sample_next_jump(s, 2.0, RngSeed(5), MKT, 5.0)
    assert a[0] is not None and 0 < a[0] < 5
    # mark applied multiplicatively after drift
    assert 1 - 0.05 <= a[1] / math.exp(0.01 * a[0]) <= 1 + 0.05


def test_sample_next_jump_requires_time_before_horizon():
    with pytest.raises(ValueError):
        pdmp.sample_next_jump(_state(t=5.0), 1.0, RngSeed(0), MKT, 5.0)


# --- jump / reward / terminal -------------------------------------------------------


def test_jump_zero_trade_still_excites():
    s = _state(level=1.0, excitation=0.6)
    out = pdmp.jump(s, 0.0, CFG, MKT)
    assert (out.inventory, out.cash) == (s.inventory, s.cash)
    assert out.intensity.level == pytest.approx(1.6)


def test_jump_arithmetic():
    cfg = pdmp.LiquidationConfig(5.0, 1.0, 10.0, (0, 1, 2))
    s = pdmp.PdmpState(3.0, 5.0, 0.0, _intensity(), 10.0)
    out = pdmp.jump(s, 2.0, cfg, pdmp.MarketParams(r=0.0))
    assert out.inventory == 3.0 and out.cash == 20.0
    disc = pdmp.jump(s, 2.0, cfg, pdmp.MarketParams(r=0.05))
    assert disc.cash == pytest.approx(20.0 * math.exp(-0.15)) and disc.cash < 20.0


def test_jump_contract_errors():
    with pytest.raises(ContractError):
        pdmp.jump(_state(q=15.0), 2.0, CFG, MKT)
    with pytest.raises(ContractError):
        pdmp.jump(_state(), 3.0, CFG, MKT)


def test_reward_matches_cash_increment():
    s = _state(t=1.3, price=1.7)
    assert pdmp.reward(s, 0.0, CFG, MKT) == 0.0
    for g in (1.0, 2.0, 5.0):
        assert pdmp.jump(s, g, CFG, MKT).cash - s.cash == pdmp.reward(s, g, CFG, MKT)


def test_terminal_values():
    cfg = pdmp.LiquidationConfig(100.0, 1.0, 2.0, (0, 1), terminal_haircut=0.5)
    mkt = pdmp.MarketParams(r=0.0)
    s = pdmp.PdmpState(2.0, 100.0, 0.0, _intensity(), 2.0)
    assert pdmp.terminal_credit(s, cfg, mkt) == 100.0
    assert pdmp.terminal_penalty(s, cfg, mkt) == 100.0
    empty = pdmp.PdmpState(2.0, 0.0, 5.0, _intensity(), 2.0)
    assert pdmp.terminal_credit(empty, cfg, mkt) == 0.0 == pdmp.terminal_penalty(empty, cfg, mkt)
    wipe = pdmp.LiquidationConfig(100.0, 1.0, 2.0, (0, 1), terminal_haircut=1.0)
    assert pdmp.terminal_credit(s, wipe, mkt) == 0.0
    with pytest.raises(ValueError):
        pdmp.terminal_credit(pdmp.PdmpState(1.0, 1.0, 0.0, _intensity(), 1.0), cfg, mkt)


# --- trajectories -------------------------------------------------------------------


def _check_path(traj, cfg):
    inv = [n.post_jump.inventory for n in traj.nodes]
    cash = [n.post_jump.cash for n in traj.nodes]
    times = [n.jump_time for n in traj.nodes]
    assert all(q >= 0 for q in inv)
    assert all(b <= a for a, b in zip(inv, inv[1:]))
    assert all(b >= a for a, b in zip(cash, cash[1:]))
    assert all(b >= a for a, b in zip(times, times[1:]))
    assert cash[-1] == pytest.approx(math.fsum(traj.rewards), rel=1e-12, abs=1e-12)
    assert traj.revenue == pytest.approx(traj.final_state.cash + traj.terminal_credit, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), sigma=st.floats(-0.6, 0.6), level=st.floats(0.1, 4),
       haircut=st.floats(0, 1))
def test_trajectory_invariants_and_replay(seed, sigma, level, haircut):
    cfg = pdmp.LiquidationConfig(100.0, 10.0, 5.0, (0, 1, 2, 5), haircut)
    intensity = _intensity(level=level, excitation=sigma)
    rng = np.random.default_rng(seed)

    def policy(k, state):
        return float(rng.choice(cfg.action_grid))

    traj = pdmp.simulate_trajectory(policy, cfg, MKT, intensity, RngSeed(seed), max_epochs=30)
    _check_path(traj, cfg)
    nodes = pdmp.replay(traj.nodes[0].post_jump, [n.jump_time for n in traj.nodes[1:]],
                        traj.mark_prices, traj.gammas, cfg, MKT)
    assert nodes == traj.nodes


def test_batch_of_one_matches_scalar_trajectory():
    intensity = _intensity(level=2.0, excitation=0.3)
    for seed in range(20):
        traj = pdmp.simulate_trajectory(lambda k, s: 2.0, CFG, MKT, intensity, RngSeed(seed), 30)
        batch = pdmp.simulate_batch(pdmp.constant_policy(2.0), CFG, MKT, intensity, 1, RngSeed(seed), 30)
        n = len(traj.nodes) - 1
        assert batch.n_jumps[0] == n
        assert batch.time[0, 1:n + 1] == pytest.approx([x.jump_time for x in traj.nodes[1:]], abs=1e-12)
        assert batch.reward[0, :n] == pytest.approx(traj.rewards, abs=1e-12)
        assert batch.terminal_credit[0] == pytest.approx(traj.terminal_credit, abs=1e-12)


def test_batch_invariants_and_accounting():
    intensity = _intensity(level=1.5, excitation=-0.2)
    b = pdmp.simulate_batch(pdmp.random_policy(CFG, RngSeed(7)), CFG, MKT, intensity, 5000, RngSeed(8), 25)
    inv, cash = b.inventory, b.cash
    ok = np.isfinite(inv[:, 1:])
    assert np.all(inv[np.isfinite(inv)] >= 0)
    assert np.all(np.diff(inv, axis=1)[ok] <= 0)
    assert np.all(np.diff(cash, axis=1)[ok] >= 0)
    assert np.allclose(np.diff(cash, axis=1)[ok], b.reward[ok], rtol=0, atol=1e-12)
    last = cash[np.arange(b.n_paths), b.n_jumps]
    assert np.allclose(last, b.gross, rtol=1e-12)


def test_constant_rate_revenue_matches_integral():
    # zero impact on the intensity, inventory never binding:
    # E sum of rewards = integral_0^T exp(-r t) E[S_t] slice*gamma*lambda dt
    level, decay, gamma, horizon = 2.0, 0.5, 1.0, 5.0
    cfg = pdmp.LiquidationConfig(1e9, 10.0, horizon, (0, 1))
    mkt = pdmp.MarketParams(s0=1.0, mu=0.03, vol=0.2, r=0.05)
    intensity = ImpactedIntensityState(level, decay, 0.0, ZERO_IMPACT)
    b = pdmp.simulate_batch(pdmp.constant_policy(gamma), cfg, mkt, intensity, 100_000, RngSeed(9), 60)
    assert b.n_jumps.max() < 60
    exact = integrate.quad(lambda t: math.exp(-mkt.r * t) * mkt.mean_price(t) * cfg.slice * gamma * level,
                           0, horizon)[0]
    assert abs(b.gross.mean() - exact) / exact < 0.01


def test_zero_policy_revenue_is_terminal_credit():
    intensity = _intensity()
    b = pdmp.simulate_batch(pdmp.constant_policy(0.0), CFG, MKT, intensity, 200, RngSeed(10), 20)
    assert np.all(b.gross == 0)
    assert np.allclose(b.revenue, b.terminal_credit)


def test_batch_csv_dump(tmp_path):
    b = pdmp.simulate_batch(pdmp.constant_policy(1.0), CFG, MKT, _intensity(), 3, RngSeed(11), 10)
    path = tmp_path / "path.csv"
    b.write_csv(path, 0)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,T_k,inventory,cash,intensity,price,gamma"
    assert len(lines) == b.n_jumps[0] + 2
