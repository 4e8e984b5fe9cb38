"""Monte Carlo hosting-capacity sweep.

For every run a set of pool traces is assigned to the feeder's load points.
For every PV level a PV subset is drawn, and for every battery level a
battery subset is drawn from the PV owners. Battery owners are scheduled,
the grid exchange of every customer goes through a yearly power flow, and
the three metrics are recorded. Each cell ``(run, P_PV, P_b)`` derives its
randomness from the master seed and its own key only, so cells can run in
any order or in parallel with identical results.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.errors import InvalidInputError, LvmcError
from lvmc.hem.battery import BATTERY_TABLE, BatterySpec, Tariff, battery_for_pv, grid_power
from lvmc.io.atomic import atomic_write
from lvmc.metrics import evaluate

log = logging.getLogger(__name__)

SCHEDULERS = ("dp", "pfa", "scm")
METRICS = ("pct_voltage_problem", "max_loading", "max_vuf")
RESULT_COLUMNS = ("run", "p_pv", "p_b") + METRICS
STAT_NAMES = ("min", "p25", "median", "p75", "max")
DEMAND_PF = 0.95


@dataclass
class McConfig:
    runs: int = 100
    pv_levels: tuple = tuple(range(0, 101, 10))
    battery_levels: tuple = (0, 50, 100)
    seed: int = 0
    scheduler: str = "pfa"
    feeder: str = "AUS2"
    days: int = 365
    n_levels: int = 101
    parallelism: int = 1
    demand_pf: float = DEMAND_PF

    def __post_init__(self):
        self.pv_levels = tuple(self.pv_levels)
        self.battery_levels = tuple(self.battery_levels)
        self.validate()

    def validate(self):
        if not isinstance(self.runs, int) or self.runs < 1:
            raise InvalidInputError(f"runs: must be an integer >= 1, got {self.runs!r}")
        for name in ("pv_levels", "battery_levels"):
            levels = getattr(self, name)
            if not levels:
                raise InvalidInputError(f"{name}: at least one level is required")
            if any(not 0 <= x <= 100 for x in levels):
                raise InvalidInputError(f"{name}: levels must lie within [0, 100], got {list(levels)}")
        if self.scheduler not in SCHEDULERS:
            raise InvalidInputError(f"scheduler: must be one of {SCHEDULERS}, got {self.scheduler!r}")
        if not isinstance(self.days, int) or self.days < 1:
            raise InvalidInputError(f"days: must be an integer >= 1, got {self.days!r}")
        if self.n_levels < 2:
            raise InvalidInputError(f"n_levels: must be >= 2, got {self.n_levels}")
        if self.parallelism < 1:
            raise InvalidInputError(f"parallelism: must be >= 1, got {self.parallelism}")
        if not 0 < self.demand_pf <= 1:
            raise InvalidInputError(f"demand_pf: must lie in (0, 1], got {self.demand_pf}")

    def cells(self):
        """Every (run, P_PV, P_b) in sweep order."""
        return [(r, pv, pb) for r in range(self.runs) for pv in self.pv_levels for pb in self.battery_levels]

    @property
    def n_simulations(self):
        return self.runs * len(self.pv_levels) * len(self.battery_levels)

    def to_dict(self):
        d = asdict(self)
        d["pv_levels"] = list(self.pv_levels)
        d["battery_levels"] = list(self.battery_levels)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown McConfig field(s): {sorted(unknown)}")
        return cls(**d)


def _level_key(x):
    return int(round(float(x) * 1000))


def cell_seed(master, run, p_pv=None, p_b=None) -> np.random.SeedSequence:
    """Seed for a run, a (run, P_PV) pair or a full cell, from the master seed only."""
    key = [int(master), 0x4C564D43, int(run)]
    if p_pv is not None:
        key.append(_level_key(p_pv))
    if p_b is not None:
        key.append(_level_key(p_b))
    return np.random.SeedSequence(key)


def round_half_up(x) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class Allocation:
    """Per load point: pool trace index, PV and battery ownership, battery spec."""

    trace_index: np.ndarray
    has_pv: np.ndarray
    has_battery: np.ndarray
    specs: list

    def __len__(self):
        return self.trace_index.size


def load_assignment(pool_size, n_customers, master, run) -> np.ndarray:
    if pool_size < n_customers:
        raise InvalidInputError(f"pool of {pool_size} traces cannot cover {n_customers} customers")
    rng = np.random.default_rng(cell_seed(master, run))
    return rng.choice(pool_size, size=n_customers, replace=False)


def sample_allocation(pool, n_customers, p_pv, p_b, master, run, table=BATTERY_TABLE) -> Allocation:
    """Random PV/battery allocation for one cell.

    Load points get pool traces without replacement (fixed per run); the PV
    subset is drawn per (run, P_PV) and the battery subset from the PV owners
    per (run, P_PV, P_b). Counts round half up.
    """
    if hasattr(n_customers, "n_customers"):
        n_customers = n_customers.n_customers
    traces = load_assignment(len(pool), n_customers, master, run)
    n_pv = round_half_up(p_pv / 100.0 * n_customers)
    pv_rng = np.random.default_rng(cell_seed(master, run, p_pv))
    pv_idx = pv_rng.choice(n_customers, size=n_pv, replace=False)
    n_b = round_half_up(p_b / 100.0 * n_pv)
    b_rng = np.random.default_rng(cell_seed(master, run, p_pv, p_b))
    b_idx = b_rng.choice(pv_idx, size=n_b, replace=False) if n_b else np.empty(0, dtype=np.int64)
    has_pv = np.zeros(n_customers, dtype=bool)
    has_pv[pv_idx] = True
    has_b = np.zeros(n_customers, dtype=bool)
    has_b[b_idx] = True
    specs = [battery_for_pv(pool[traces[i]].pv_kw, table) if has_b[i] else None for i in range(n_customers)]
    return Allocation(traces, has_pv, has_b, specs)


def percentiles(samples) -> dict:
    """Min, quartiles, median and max with linear interpolation between ranks."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InvalidInputError("cannot summarise an empty sample")
    q = np.percentile(x, [0, 25, 50, 75, 100])
    return dict(zip(STAT_NAMES, (float(v) for v in q)))


aggregate = percentiles


class ScheduleCache:
    """Grid exchange of battery owners, computed once per pool trace."""

    def __init__(self, pool, days, tariff: Tariff, scheduler, n_levels=101, policy=None, table=BATTERY_TABLE):
        self.pool = pool
        self.T = days * SLOTS_PER_DAY
        self.tariff = tariff
        self.scheduler = scheduler
        self.n_levels = n_levels
        self.policy = policy
        self.table = table
        self._grid = {}

    def spec_for(self, idx) -> BatterySpec:
        return battery_for_pv(self.pool[idx].pv_kw, self.table)

    def compute(self, idx):
        tr = self.pool[idx]
        d, pv = tr.demand[: self.T], tr.pv[: self.T]
        spec = self.spec_for(idx)
        if self.scheduler == "dp":
            from lvmc.hem.dp import solve_year

            s = solve_year(d, pv, spec, self.tariff, n_levels=self.n_levels)
        elif self.scheduler == "pfa":
            from lvmc.pfa import infer_schedule

            s = infer_schedule(self.policy, d, pv, spec, self.tariff)
        else:
            from lvmc.scm import scm_schedule

            s = scm_schedule(d, pv, spec, prices=self.tariff.prices_for(d.size), feed_in=self.tariff.feed_in)
        return s.grid_power

    def fill(self, indices, parallelism=1):
        todo = sorted(set(int(i) for i in indices) - set(self._grid))
        if parallelism > 1 and len(todo) > 1:
            with ProcessPoolExecutor(parallelism) as ex:
                for i, g in zip(todo, ex.map(self.compute, todo, chunksize=max(1, len(todo) // (4 * parallelism)))):
                    self._grid[i] = g
        else:
            for i in todo:
                self._grid[i] = self.compute(i)

    def __getitem__(self, idx):
        if idx not in self._grid:
            self._grid[idx] = self.compute(idx)
        return self._grid[idx]


def injections(alloc: Allocation, pool, cache: ScheduleCache, T, eta_i=0.96, demand_pf=DEMAND_PF):
    """Active (grid exchange) and reactive power per customer, (n, T) kW / kvar.

    Non-PV customers draw their demand; PV owners without a battery exchange
    demand minus the inverter output; battery owners the scheduled exchange.
    Reactive power follows the demand at ``demand_pf``; inverters run at
    unity power factor.
    """
    n = len(alloc)
    p = np.empty((n, T))
    q = np.empty((n, T))
    tan_phi = math.tan(math.acos(demand_pf))
    for i in range(n):
        tr = pool[alloc.trace_index[i]]
        d = tr.demand[:T]
        if alloc.has_battery[i]:
            p[i] = cache[int(alloc.trace_index[i])]
        elif alloc.has_pv[i]:
            p[i] = grid_power(d, tr.pv[:T], eta_i)
        else:
            p[i] = d
        q[i] = d * tan_phi
    return p, q


@dataclass
class CellResult:
    run: int
    p_pv: float
    p_b: float
    metrics: dict | None
    error: str | None = None
    seed: list | None = None

    def row(self):
        m = self.metrics or {k: float("nan") for k in METRICS}
        return [self.run, self.p_pv, self.p_b] + [m[k] for k in METRICS]


@dataclass
class McResult:
    config: McConfig
    cells: list = field(default_factory=list)

    @property
    def n_simulations(self):
        return len(self.cells)

    @property
    def failures(self):
        return [c for c in self.cells if c.error is not None]

    def samples(self, p_pv, p_b, metric):
        return np.array([c.metrics[metric] for c in self.cells
                         if c.p_pv == p_pv and c.p_b == p_b and c.metrics is not None])

    def summary(self) -> list:
        rows = []
        for pv in self.config.pv_levels:
            for pb in self.config.battery_levels:
                for metric in METRICS:
                    x = self.samples(pv, pb, metric)
                    if x.size == 0:
                        continue
                    st = percentiles(x)
                    rows.append([pv, pb, metric] + [st[k] for k in STAT_NAMES] + [x.size])
        return rows

    def median(self, p_pv, p_b, metric):
        return float(np.median(self.samples(p_pv, p_b, metric)))

    def results_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for c in sorted(self.cells, key=lambda c: (c.run, c.p_pv, c.p_b)):
            w.writerow([_fmt(v) for v in c.row()])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("p_pv", "p_b", "metric") + STAT_NAMES + ("n",))
        for r in self.summary():
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def failures_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("run", "p_pv", "p_b", "seed", "error"))
        for c in self.failures:
            w.writerow([c.run, _fmt(c.p_pv), _fmt(c.p_b), " ".join(map(str, c.seed or [])), c.error])
        return buf.getvalue()

    def write(self, out_dir):
        import os

        os.makedirs(out_dir, exist_ok=True)
        atomic_write(os.path.join(out_dir, "results.csv"), self.results_csv())
        atomic_write(os.path.join(out_dir, "summary.csv"), self.summary_csv())
        if self.failures:
            atomic_write(os.path.join(out_dir, "failures.csv"), self.failures_csv())


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _solve_cell(args):
    from lvmc.powerflow.solver import solve_timeseries

    feeder, run, pv, pb, p, q, seed = args
    try:
        sol = solve_timeseries(feeder, p, q)
        rep = evaluate(feeder, sol)
        m = {
            "pct_voltage_problem": rep.pct_customers_voltage_problem,
            "max_loading": rep.transformer_loading_peak,
            "max_vuf": rep.vuf_max,
        }
        return CellResult(run, pv, pb, m)
    except LvmcError as exc:
        return CellResult(run, pv, pb, None, f"{type(exc).__name__}: {exc}", seed)


def run_assessment(config: McConfig, pool, feeder, tariff: Tariff | None = None, policy=None,
                   table=BATTERY_TABLE, progress=None) -> McResult:
    """Execute every cell of the sweep and collect the metrics.

    ``pool`` is a sequence of traces with ``demand``, ``pv`` and ``pv_kw``
    covering at least ``config.days`` days. A failing cell is recorded with
    its seed and the sweep continues.
    """
    tariff = tariff or Tariff.time_of_use()
    T = config.days * SLOTS_PER_DAY
    if any(len(tr.demand) < T for tr in pool):
        raise InvalidInputError(f"pool traces are shorter than {config.days} days")
    if config.scheduler == "pfa" and policy is None:
        raise InvalidInputError("the pfa scheduler needs a trained policy")
    cache = ScheduleCache(pool, config.days, tariff, config.scheduler, config.n_levels, policy, table)

    allocs = {}
    for run, pv, pb in config.cells():
        allocs[(run, pv, pb)] = sample_allocation(pool, feeder.n_customers, pv, pb, config.seed, run, table)
    needed = [a.trace_index[a.has_battery] for a in allocs.values()]
    if needed:
        cache.fill(np.concatenate(needed), config.parallelism)

    eta_i = BatterySpec.__dataclass_fields__["inverter_efficiency"].default

    def jobs():
        for key in config.cells():
            p, q = injections(allocs[key], pool, cache, T, eta_i, config.demand_pf)
            seed = list(cell_seed(config.seed, *key).entropy)
            yield (feeder,) + key + (p, q, seed)

    result = McResult(config)
    if config.parallelism > 1:
        with ProcessPoolExecutor(config.parallelism) as ex:
            for i, cell in enumerate(ex.map(_solve_cell, jobs())):
                result.cells.append(cell)
                if progress:
                    progress(i + 1, config.n_simulations)
    else:
        for i, job in enumerate(jobs()):
            result.cells.append(_solve_cell(job))
            if progress:
                progress(i + 1, config.n_simulations)
    for c in result.failures:
        log.warning("cell run=%s p_pv=%s p_b=%s failed: %s", c.run, c.p_pv, c.p_b, c.error)
    return result
