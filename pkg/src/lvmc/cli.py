"""Command line entry point: ``lvmc {synth,dp,train-pfa,assess,bench}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from lvmc.config import ExperimentConfig
from lvmc.errors import InvalidInputError, LvmcError
from lvmc.io.atomic import atomic_write

log = logging.getLogger("lvmc")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
DP_EXPLORE = 2  # off-trajectory DP decisions per step added to the PFA training set


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--scheduler", choices=("dp", "pfa", "scm"))
    common.add_argument("--feeder", help="fixture name (UK, AUS1, AUS2) or feeder JSON path")
    common.add_argument("--parallelism", type=int, help="worker processes")
    common.add_argument("--runs", type=int, help="Monte Carlo runs (overrides mc.runs)")
    common.add_argument("--days", type=int, help="simulated days (overrides mc.days)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="lvmc", description="Probabilistic LV hosting-capacity assessment with scheduled batteries.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="cluster the corpus, fit chains and synthesise a trace pool")
    sub.add_parser("dp", parents=[common], help="optimal yearly battery schedules for the observed customers")
    sub.add_parser("train-pfa", parents=[common], help="train the policy net on DP schedules")
    sub.add_parser("assess", parents=[common], help="Monte Carlo penetration sweep on a feeder")
    sub.add_parser("bench", parents=[common], help="DP versus PFA wall-clock per customer-year")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None:
        cfg.seed = cfg.mc.seed = args.seed
    if args.scheduler:
        cfg.mc.scheduler = args.scheduler
    if args.feeder:
        cfg.feeder = cfg.mc.feeder = args.feeder
    if args.parallelism is not None:
        cfg.mc.parallelism = args.parallelism
    if args.runs is not None:
        cfg.mc.runs = args.runs
    if args.days is not None:
        cfg.mc.days = args.days
    return cfg.validate()


# -- shared steps -------------------------------------------------------------

def observed_profiles(cfg: ExperimentConfig):
    if cfg.traces is not None:
        from lvmc.io.traces import ingest_traces

        return ingest_traces(cfg.path(cfg.traces))
    from lvmc.io.corpus import generate_corpus

    return generate_corpus(cfg.corpus.customers, cfg.corpus.days, seed=cfg.seed)


def load_feeder(cfg: ExperimentConfig):
    from lvmc.powerflow import FeederModel, fixture

    if cfg.feeder.lower().endswith(".json"):
        return FeederModel.load(cfg.path(cfg.feeder))
    return fixture(cfg.feeder)


def synthesise(cfg: ExperimentConfig, profiles, days=None):
    from lvmc.synthesis import fit_model, synthesize_pool

    s = cfg.synthesis
    model = fit_model(profiles, n_states=s.n_states, concentration=s.concentration, seed=cfg.seed, restarts=s.restarts)
    pool = synthesize_pool(model, s.pool_size, days or s.days, seed=cfg.seed)
    return model, pool


def _dp_job(job):
    from lvmc.hem import solve_year

    cid, demand, pv, spec, tariff, explore, seed = job
    return cid, solve_year(demand, pv, spec, tariff, explore=explore, seed=seed)


def dp_schedules(cfg: ExperimentConfig, profiles, explore=0, parallelism=1):
    """``[(profile, schedule)]`` for every profile, battery sized from its PV."""
    from lvmc.hem import battery_for_pv

    jobs = [(p.id, p.demand, p.pv, battery_for_pv(p.pv_kw, cfg.battery_table), cfg.tariff, explore, [cfg.seed, i])
            for i, p in enumerate(profiles)]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(parallelism) as ex:
            done = list(ex.map(_dp_job, jobs))
    else:
        done = [_dp_job(j) for j in jobs]
    return [(p, s) for p, (_, s) in zip(profiles, done)]


def train_from_profiles(cfg: ExperimentConfig, profiles, parallelism=1):
    from lvmc.pfa import build_training_set, train_policy

    train = profiles[: cfg.pfa.train_customers]
    results = dp_schedules(cfg, train, explore=DP_EXPLORE, parallelism=parallelism)
    samples = build_training_set([(p.demand, p.pv, s, cfg.tariff) for p, s in results])
    return train_policy(samples, epochs=cfg.pfa.epochs, seed=cfg.seed, hidden=cfg.pfa.hidden)


def obtain_policy(cfg: ExperimentConfig, profiles=None):
    from lvmc.pfa import PolicyNet

    if cfg.pfa.policy is not None:
        return PolicyNet.load(cfg.path(cfg.pfa.policy))
    log.info("no policy configured: training one on the observed customers")
    return train_from_profiles(cfg, profiles if profiles is not None else observed_profiles(cfg), cfg.mc.parallelism)


# -- commands -----------------------------------------------------------------

def cmd_synth(cfg, out):
    from lvmc.io.pool import save_pool

    profiles = observed_profiles(cfg)
    model, pool = synthesise(cfg, profiles)
    os.makedirs(out, exist_ok=True)
    model.save(os.path.join(out, "model.json"))
    save_pool(pool, out)
    print(f"{len(profiles)} observed customers -> {model.clusters.n_clusters} clusters; "
          f"{len(pool)} synthetic traces of {cfg.synthesis.days} days written to {out}")


def cmd_dp(cfg, out):
    profiles = observed_profiles(cfg)
    results = dp_schedules(cfg, profiles, parallelism=cfg.mc.parallelism)
    sched_dir = os.path.join(out, "schedules")
    os.makedirs(sched_dir, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("customer_id", "pv_kw", "capacity_kwh", "yearly_cost"))
    for p, s in results:
        s.to_csv(os.path.join(sched_dir, f"{p.id}.csv"))
        w.writerow([p.id, repr(float(p.pv_kw)), repr(s.spec.capacity_kwh), repr(s.total_cost)])
    atomic_write(os.path.join(out, "dp_costs.csv"), buf.getvalue())
    print(f"{len(results)} yearly DP schedules written to {out}")


def cmd_train_pfa(cfg, out):
    net = train_from_profiles(cfg, observed_profiles(cfg), cfg.mc.parallelism)
    os.makedirs(out, exist_ok=True)
    net.save(os.path.join(out, "policy.json"))
    atomic_write(os.path.join(out, "training_history.csv"),
                 "iteration,rmse\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(net.history)))
    print(f"policy trained ({len(net.history) - 1} iterations, held-out RMSE {net.holdout_rmse:.4f}); "
          f"written to {os.path.join(out, 'policy.json')}")


def cmd_assess(cfg, out):
    from lvmc.mc import run_assessment

    feeder = load_feeder(cfg)
    profiles = None
    if cfg.pool is not None:
        from lvmc.io.pool import load_pool

        pool = load_pool(cfg.path(cfg.pool))
    else:
        profiles = observed_profiles(cfg)
        _, pool = synthesise(cfg, profiles, max(cfg.synthesis.days, cfg.mc.days))
    policy = obtain_policy(cfg, profiles) if cfg.mc.scheduler == "pfa" else None

    def progress(i, n):
        if i == n or i % max(1, n // 20) == 0:
            log.info("%d/%d simulations", i, n)

    t0 = time.perf_counter()
    result = run_assessment(cfg.mc, pool, feeder, cfg.tariff, policy, cfg.battery_table, progress)
    result.write(out)
    atomic_write(os.path.join(out, "config.json"), json.dumps(cfg.mc.to_dict(), indent=2))
    print(f"{result.n_simulations} simulations ({cfg.mc.days} d) on {feeder.name} in {time.perf_counter() - t0:.1f} s "
          f"({len(result.failures)} failed); results in {out}")


def cmd_bench(cfg, out):
    from lvmc.hem import battery_for_pv
    from lvmc.pfa import benchmark_speedup

    profiles = observed_profiles(cfg)
    policy = obtain_policy(cfg, profiles)
    held = profiles[cfg.pfa.train_customers:]
    if len(held) < 10:
        held = profiles
    customers = [(p.id, p.demand, p.pv, battery_for_pv(p.pv_kw, cfg.battery_table)) for p in held]
    report = benchmark_speedup(policy, customers, cfg.tariff)
    os.makedirs(out, exist_ok=True)
    report.to_csv(os.path.join(out, "benchmark.csv"))
    print(f"DP {report.dp_seconds:.3f} s, PFA {report.pfa_seconds:.5f} s per customer-year "
          f"(ratio {report.ratio:.2%}) over {len(report.rows)} customers")


COMMANDS = {
    "synth": cmd_synth,
    "dp": cmd_dp,
    "train-pfa": cmd_train_pfa,
    "assess": cmd_assess,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command](cfg, args.out)
    except InvalidInputError as exc:
        print(f"lvmc: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except LvmcError as exc:
        print(f"lvmc: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
