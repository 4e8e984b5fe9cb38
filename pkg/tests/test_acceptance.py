"""End-to-end acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (shown in the terminal summary)
before asserting. The heavy fixtures -- a 200-customer yearly corpus, a policy
trained on 150 of them and a synthesis model -- are built once per session.
Run only this module with ``pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest

from lvmc.cli import train_from_profiles
from lvmc.config import ExperimentConfig
from lvmc.hem import BatterySpec, Tariff, battery_for_pv, schedule_residuals, solve_dp
from lvmc.io.corpus import generate_corpus
from lvmc.mc import McConfig, ScheduleCache, injections, run_assessment, sample_allocation
from lvmc.metrics import vuf
from lvmc.pfa import PolicyNet, benchmark_speedup, infer_schedule
from lvmc.powerflow import fixture
from lvmc.powerflow.solver import solve_snapshot, solve_timeseries, source_voltage
from lvmc.scm import scm_schedule
from lvmc.synthesis import fit_model, synthesize_pool
from lvmc.synthesis.markov import digitize
from lvmc.synthesis.model import state_distribution, total_variation

from conftest import two_bus_feeder
from oracles import brute_force_dp, dyadic_toy_instance, two_bus_voltage, vuf_percent

pytestmark = pytest.mark.slow

SEED = 0
TREND_DAYS = 56
TREND_RUNS = 20


# -- shared fixtures -----------------------------------------------------------

@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(200, 365, seed=SEED)


@pytest.fixture(scope="module")
def experiment():
    return ExperimentConfig.from_dict({"seed": SEED})


@pytest.fixture(scope="module")
def policy(corpus, experiment):
    return train_from_profiles(experiment, corpus[:150])


@pytest.fixture(scope="module")
def held_out_benchmark(corpus, experiment, policy):
    held = corpus[150:]
    customers = [(p.id, p.demand, p.pv, battery_for_pv(p.pv_kw, experiment.battery_table)) for p in held]
    return benchmark_speedup(policy, customers, experiment.tariff)


@pytest.fixture(scope="module")
def model(corpus):
    return fit_model(corpus[:150], seed=SEED)


@pytest.fixture(scope="module")
def trend_pool(model):
    return synthesize_pool(model, 300, TREND_DAYS, seed=7)


# -- 1 ---------------------------------------------------------------------------

def test_c1_dp_matches_brute_force(record_criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        inst = dyadic_toy_instance(rng)
        demand, pv, prices, feed_in, kw, n_levels, init = inst
        spec = BatterySpec(**kw)
        tariff = Tariff(prices, feed_in, (0, prices.size))
        levels = np.linspace(spec.soc_min_kwh, spec.capacity_kwh, n_levels)
        s = solve_dp(demand, pv, spec, tariff, levels[init], n_levels=n_levels, balance_action=False)
        best = brute_force_dp(*inst)
        worst = max(worst, abs(s.objective - best))
    elapsed = time.perf_counter() - t0
    ok = worst == 0.0 and elapsed < 10
    record_criterion(1, ok, f"50 toy instances, max |DP - brute force| = {worst:g}, {elapsed:.2f} s")
    assert ok


# -- 2 ---------------------------------------------------------------------------

def _random_day(rng):
    t = np.arange(48) / 2.0
    pv_kw = rng.uniform(0.0, 12.0)
    demand = rng.uniform(0.1, 1.0) + rng.gamma(1.0, 0.6, 48) * rng.uniform(0.2, 2.0)
    pv = np.clip(pv_kw * np.sin(np.pi * (t - rng.uniform(5, 7)) / 12.0), 0.0, None) * rng.uniform(0.2, 1.0, 48)
    if rng.random() < 0.5:
        spec = battery_for_pv(max(pv_kw, 0.5))
    else:
        spec = BatterySpec.sized(rng.uniform(1.0, 15.0), rng.uniform(0.5, 6.0),
                                 soc_min_fraction=rng.uniform(0.0, 0.3),
                                 charge_efficiency=rng.uniform(0.85, 1.0),
                                 inverter_efficiency=rng.uniform(0.9, 1.0))
    init = rng.uniform(spec.soc_min_kwh, spec.capacity_kwh)
    return demand, pv, spec, init


def test_c2_constraint_suite(record_criterion, policy):
    rng = np.random.default_rng(99)
    tariff = Tariff.time_of_use()
    prices = tariff.prices_for(48)
    infer_schedule(PolicyNet.random(0), np.ones(48), np.ones(48), BatterySpec.sized(5, 2), tariff)  # JIT warm-up
    t0 = time.perf_counter()
    worst = {}
    counts = dict.fromkeys(("dp", "pfa-random", "pfa-trained", "scm"), 0)
    for k in range(10_000):
        demand, pv, spec, init = _random_day(rng)
        kind = ("dp", "pfa-random", "pfa-trained", "scm")[k % 4]
        if kind == "dp":
            levels = np.linspace(spec.soc_min_kwh, spec.capacity_kwh, 101)
            s = solve_dp(demand, pv, spec, tariff, levels[rng.integers(101)])
        elif kind == "pfa-random":
            net = PolicyNet.random(int(rng.integers(1 << 31)), scale=rng.uniform(0.1, 5.0))
            s = infer_schedule(net, demand, pv, spec, tariff, init)
        elif kind == "pfa-trained":
            s = infer_schedule(policy, demand, pv, spec, tariff, init)
        else:
            s = scm_schedule(demand, pv, spec, init, prices, tariff.feed_in)
        counts[kind] += 1
        for name, v in schedule_residuals(s).items():
            worst[name] = max(worst.get(name, 0.0), v)
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < 1e-9 and elapsed < 60
    record_criterion(2, ok, f"{sum(counts.values())} schedules {counts}, max residual {top:.2e}, {elapsed:.1f} s")
    assert ok


# -- 3 ---------------------------------------------------------------------------

def test_c3_pfa_cost_within_ten_percent(record_criterion, held_out_benchmark):
    rows = held_out_benchmark.rows
    dp = np.array([r.dp_cost for r in rows])
    pfa = np.array([r.pfa_cost for r in rows])
    within = pfa <= dp + 0.10 * np.abs(dp)
    frac = within.mean()
    excess = np.median((pfa - dp) / np.abs(dp))
    ok = frac >= 0.90
    record_criterion(3, ok, f"{within.sum()}/{len(rows)} held-out customers within 10 % of DP "
                            f"(median excess {excess:.1%})")
    assert ok


# -- 4 ---------------------------------------------------------------------------

def test_c4_speedup(record_criterion, held_out_benchmark):
    rep = held_out_benchmark
    ok = len(rep.rows) >= 10 and rep.ratio < 0.05
    record_criterion(4, ok, f"PFA {rep.pfa_seconds * 1e3:.2f} ms vs DP {rep.dp_seconds:.2f} s per customer-year "
                            f"(ratio {rep.ratio:.3%}, {len(rep.rows)} customers)")
    assert ok


# -- 5 ---------------------------------------------------------------------------

def test_c5_power_flow(record_criterion, corpus):
    rng = np.random.default_rng(5)
    worst_two_bus = 0.0
    for _ in range(100):
        z = complex(rng.uniform(0.01, 0.3), rng.uniform(0.005, 0.2))
        p, q = rng.uniform(-8, 8), rng.uniform(-2, 2)
        feeder = two_bus_feeder(z, source_pu=rng.uniform(0.95, 1.05))
        sol = solve_snapshot(feeder, [p], [q])
        v_src = source_voltage(feeder)[0]
        expect = two_bus_voltage(v_src, z, p * 1e3, q * 1e3)
        worst_two_bus = max(worst_two_bus, abs(sol.voltages[1, 0] - expect) / feeder.v_base)

    feeder = fixture("AUS2")
    pool = generate_corpus(feeder.n_customers, 365, seed=11)
    alloc = sample_allocation(pool, feeder.n_customers, 50, 0, SEED, 0)
    cache = ScheduleCache(pool, 365, Tariff.time_of_use(), "scm")
    p, q = injections(alloc, pool, cache, 365 * 48)
    t0 = time.perf_counter()
    ts = solve_timeseries(feeder, p, q)
    elapsed = time.perf_counter() - t0
    cons = float(ts.conservation.max())
    ok = worst_two_bus < 1e-6 and cons < 1e-6 and elapsed < 300 and len(ts) == 365 * 48
    record_criterion(5, ok, f"two-bus max error {worst_two_bus:.2e} pu; AUS2 year: {len(ts)} snapshots, "
                            f"max conservation residual {cons:.2e}, {elapsed:.1f} s")
    assert ok


# -- 6 ---------------------------------------------------------------------------

def test_c6_sequence_components(record_criterion):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        mag = rng.uniform(0.5, 1.5, 3)
        ang = np.deg2rad([0, -120, 120]) + rng.normal(0, 0.3, 3)
        va, vb, vc = mag * np.exp(1j * ang)
        worst = max(worst, abs(float(vuf(va, vb, vc)) - vuf_percent(va, vb, vc)))
    a = np.exp(2j * np.pi / 3)
    balanced = [float(vuf(m * np.exp(1j * th), m * np.exp(1j * th) * a * a, m * np.exp(1j * th) * a))
                for m, th in rng.uniform([0.1, -np.pi], [10.0, np.pi], (100, 2))]
    ok = worst < 1e-9 and all(b == 0.0 for b in balanced)
    record_criterion(6, ok, f"max |VUF - oracle| = {worst:.2e} over 1000 triples; "
                            f"100 balanced triples -> max VUF {max(balanced)}")
    assert ok


# -- 7 ---------------------------------------------------------------------------

def test_c7_mc_count_and_reproducibility(record_criterion, trend_pool, policy):
    default = McConfig()
    cfg = McConfig(runs=10, days=30, seed=SEED)
    feeder = fixture(cfg.feeder)
    t0 = time.perf_counter()
    first = run_assessment(cfg, trend_pool, feeder, policy=policy)
    second = run_assessment(cfg, trend_pool, feeder, policy=policy)
    elapsed = time.perf_counter() - t0
    identical = first.results_csv() == second.results_csv()
    ok = default.n_simulations == 3300 and first.n_simulations == 330 and identical and elapsed < 3600
    record_criterion(7, ok, f"default sweep {default.n_simulations} simulations; smoke sweep "
                            f"{first.n_simulations} x 2 ({cfg.scheduler}, {cfg.feeder}, {cfg.days} d) "
                            f"identical results.csv: {identical}; {elapsed:.0f} s")
    assert ok


# -- 8 ---------------------------------------------------------------------------

def test_c8_directional_trends(record_criterion, trend_pool):
    feeder = fixture("AUS2")
    levels = tuple(range(0, 101, 10))
    dp = run_assessment(McConfig(runs=TREND_RUNS, pv_levels=levels, battery_levels=(0, 100), seed=SEED,
                                 scheduler="dp", days=TREND_DAYS), trend_pool, feeder)
    scm = run_assessment(McConfig(runs=TREND_RUNS, pv_levels=(100,), battery_levels=(100,), seed=SEED,
                                  scheduler="scm", days=TREND_DAYS), trend_pool, feeder)
    volt = [dp.median(pv, 0, "pct_voltage_problem") for pv in levels]
    load = [dp.median(pv, 0, "max_loading") for pv in levels]
    a = all(x <= y for x, y in zip(volt, volt[1:]))
    k = int(np.argmin(load))
    b = 0 < k < len(levels) - 1 and load[-1] > load[k]
    v_dp = dp.median(100, 100, "pct_voltage_problem")
    c = v_dp < volt[-1]
    v_scm = scm.median(100, 100, "pct_voltage_problem")
    d = v_dp <= v_scm
    ok = a and b and c and d and not dp.failures and not scm.failures
    record_criterion(8, ok, f"(a) voltage {['%.1f' % v for v in volt]} monotone={a}; "
                            f"(b) loading min at {levels[k]} % interior={b}; "
                            f"(c) P_b 100 vs 0 at P_PV 100: {v_dp:.1f} vs {volt[-1]:.1f} ({c}); "
                            f"(d) DP {v_dp:.1f} <= SCM {v_scm:.1f} ({d})")
    assert ok


# -- 9 ---------------------------------------------------------------------------

def test_c9_synthesis_statistics(record_criterion, corpus, model):
    observed = corpus[:150]
    pool = synthesize_pool(model, 1000, 365, seed=1)
    edges = model.chains[0].state_edges
    ns = edges.size - 1
    obs = np.concatenate([digitize(p.demand - p.pv, edges) for p in observed])
    syn = np.concatenate([tr.states for tr in pool])
    tv = total_variation(state_distribution(obs, ns), state_distribution(syn, ns))
    mats = np.concatenate([np.asarray(c.matrices).reshape(-1, ns) for c in model.chains])
    rows_ok = bool(np.all(mats > 0) and np.all(np.abs(mats.sum(axis=1) - 1) <= 1e-9))
    ok = tv.max() < 0.1 and rows_ok
    record_criterion(9, ok, f"max per-slot TV {tv.max():.3f} (mean {tv.mean():.3f}, worst slot {int(tv.argmax())}); "
                            f"{mats.shape[0]} rows positive and stochastic: {rows_ok}")
    assert ok
