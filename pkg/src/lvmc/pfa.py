"""Policy function approximation of the DP battery schedules.

A small feed-forward regressor maps (previous SOC, demand, PV, price) to the
next SOC. SOC, demand and PV are divided by the customer's battery capacity
so one net serves every battery size. The hidden layer predicts the SOC
change, added to the previous SOC through a skip connection and clipped to
[0, 1]; holding and net-load-following moves are then easy to represent.
At inference time the prediction is turned into a battery power, projected
onto the rate limits and then the capacity limits, and the projected SOC is
fed back as the next input.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize

from lvmc import DT_HOURS
from lvmc.errors import InvalidInputError, TrainingDivergenceError
from lvmc.hem.battery import BatterySpec, DispatchSchedule, Tariff, build_schedule
from lvmc.hem.dp import solve_year

N_INPUTS = 4
MIN_SAMPLES = 1000


@dataclass
class TrainingSet:
    """Rows of ``[soc_prev, demand_kw, pv_kw, price]`` (the first three divided by the
    battery capacity in kWh) and the next SOC over capacity."""

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return len(self.targets)


def build_training_set(dp_results) -> TrainingSet:
    """Flatten DP results into one sample per customer and time step.

    ``dp_results`` is an iterable of ``(demand, pv, schedule, tariff)`` or of
    ``(trace, schedule, tariff)`` where ``trace`` has ``demand``/``pv``.
    Off-trajectory decisions recorded by the DP (``schedule.meta["explore"]``)
    are appended as further samples, so the regressor also sees how to act
    from SOC values the optimal path never visits.
    """
    xs, ys = [], []
    for item in dp_results:
        if len(item) == 3:
            trace, sched, tariff = item
            demand, pv = trace.demand, trace.pv
        else:
            demand, pv, sched, tariff = item
        demand = np.asarray(demand, dtype=float)
        pv = np.asarray(pv, dtype=float)
        n = len(sched)
        if demand.size != n or pv.size != n:
            raise InvalidInputError(
                f"trace of length {demand.size}/{pv.size} does not match schedule of length {n}"
            )
        cap = sched.spec.capacity_kwh
        soc = sched.soc / cap
        prices = tariff.prices_for(n)
        xs.append(np.column_stack([soc[:-1], demand / cap, pv / cap, prices]))
        ys.append(soc[1:])
        extra = sched.meta.get("explore")
        if extra is not None and len(extra):
            t = extra[:, 0].astype(np.int64)
            xs.append(np.column_stack([extra[:, 1] / cap, demand[t] / cap, pv[t] / cap, prices[t]]))
            ys.append(extra[:, 2] / cap)
    if not xs:
        raise InvalidInputError("no DP results given")
    return TrainingSet(np.concatenate(xs), np.concatenate(ys))


@dataclass
class PolicyNet:
    w_in: np.ndarray      # (hidden, 4)
    b_in: np.ndarray      # (hidden,)
    w_out: np.ndarray     # (hidden,)
    b_out: float
    input_scale: np.ndarray = field(default_factory=lambda: np.ones(N_INPUTS))
    history: list = field(default_factory=list)
    holdout_rmse: float | None = None

    @property
    def hidden(self):
        return self.b_in.size

    def predict(self, inputs) -> np.ndarray:
        x = np.atleast_2d(np.asarray(inputs, dtype=float)) * self.input_scale
        h = np.tanh(x @ self.w_in.T + self.b_in)
        return np.clip(x[:, 0] + h @ self.w_out + self.b_out, 0.0, 1.0)

    def to_dict(self):
        return {
            "topology": {"inputs": N_INPUTS, "hidden": int(self.hidden), "activation": "tanh", "output": "skip+clip"},
            "input_order": ["soc_prev_per_capacity", "demand_kw_per_kwh", "pv_kw_per_kwh", "price_per_kwh"],
            "input_scale": self.input_scale.tolist(),
            "w_in": self.w_in.tolist(),
            "b_in": self.b_in.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": float(self.b_out),
            "holdout_rmse": self.holdout_rmse,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["w_in"], float),
            np.asarray(d["b_in"], float),
            np.asarray(d["w_out"], float),
            float(d["b_out"]),
            np.asarray(d["input_scale"], float),
            holdout_rmse=d.get("holdout_rmse"),
        )

    def save(self, path):
        from lvmc.io.atomic import atomic_write

        atomic_write(path, json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def random(cls, seed, hidden=32, scale=1.0):
        rng = np.random.default_rng(seed)
        return cls(
            rng.normal(0, scale, (hidden, N_INPUTS)),
            rng.normal(0, scale, hidden),
            rng.normal(0, scale, hidden),
            float(rng.normal(0, scale)),
        )


def _unpack(theta, hidden):
    i = hidden * N_INPUTS
    return (
        theta[:i].reshape(hidden, N_INPUTS),
        theta[i:i + hidden],
        theta[i + hidden:i + 2 * hidden],
        theta[i + 2 * hidden],
    )


def _loss_and_grad(theta, x, y, hidden):
    w_in, b_in, w_out, b_out = _unpack(theta, hidden)
    h = np.tanh(x @ w_in.T + b_in)
    out = x[:, 0] + h @ w_out + b_out
    err = out - y
    n = y.size
    loss = float(err @ err) / n
    d_z = (2.0 / n) * err
    d_h = np.outer(d_z, w_out) * (1.0 - h * h)
    grad = np.concatenate([
        (d_h.T @ x).ravel(),
        d_h.sum(axis=0),
        h.T @ d_z,
        [d_z.sum()],
    ])
    return loss, grad


def input_scale_for(inputs: np.ndarray) -> np.ndarray:
    """SOC unchanged, demand and PV by their 99th percentile, price by its maximum."""
    def safe(v):
        return 1.0 / v if v > 0 else 1.0

    return np.array([
        1.0,
        safe(np.percentile(inputs[:, 1], 99)),
        safe(np.percentile(inputs[:, 2], 99)),
        safe(inputs[:, 3].max()),
    ])


def train_policy(
    samples: TrainingSet,
    epochs: int = 300,
    seed: int = 0,
    hidden: int = 32,
    max_samples: int | None = 100_000,
    holdout: float = 0.1,
) -> PolicyNet:
    """Fit the regressor by full-batch quasi-Newton minimisation of the squared error.

    At most ``max_samples`` rows (drawn without replacement under ``seed``)
    are used; ``holdout`` of them are kept aside to report the held-out RMSE.
    ``net.history`` holds the training RMSE after every iteration.
    """
    n = len(samples)
    if n < MIN_SAMPLES:
        raise InvalidInputError(f"need at least {MIN_SAMPLES} samples, got {n}")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(n)
    if max_samples is not None:
        idx = idx[:max_samples]
    n_hold = int(round(holdout * idx.size))
    hold, fit = idx[:n_hold], idx[n_hold:]
    scale = input_scale_for(samples.inputs[fit])
    x = samples.inputs[fit] * scale
    y = samples.targets[fit]
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("training samples must be finite")

    theta = np.concatenate([
        rng.normal(0.0, 1.0 / np.sqrt(N_INPUTS), hidden * N_INPUTS),
        np.zeros(hidden),
        rng.normal(0.0, 1.0 / np.sqrt(hidden), hidden),
        [0.0],
    ])
    history = []

    def fun(th):
        loss, grad = _loss_and_grad(th, x, y, hidden)
        if not np.isfinite(loss):
            raise TrainingDivergenceError("training loss became non-finite")
        return loss, grad

    def record(intermediate_result):
        history.append(float(np.sqrt(intermediate_result.fun)))

    history.append(float(np.sqrt(fun(theta)[0])))
    res = minimize(fun, theta, jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": epochs, "maxcor": 20})
    w_in, b_in, w_out, b_out = _unpack(res.x, hidden)
    net = PolicyNet(w_in.copy(), b_in.copy(), w_out.copy(), float(b_out), scale, history)
    if n_hold:
        pred = net.predict(samples.inputs[hold])
        net.holdout_rmse = float(np.sqrt(np.mean((pred - samples.targets[hold]) ** 2)))
    return net


@numba.njit(cache=True)
def _rollout(w_in, b_in, w_out, b_out, scale, demand, pv, price,
             cap, lo, max_c, max_d, eta, dt, soc0, out):
    hidden = b_in.size
    s = soc0
    out[0] = s
    for t in range(demand.size):
        x0 = s / cap * scale[0]
        x1 = demand[t] / cap * scale[1]
        x2 = pv[t] / cap * scale[2]
        x3 = price[t] * scale[3]
        z = b_out
        for j in range(hidden):
            a = b_in[j] + w_in[j, 0] * x0 + w_in[j, 1] * x1 + w_in[j, 2] * x2 + w_in[j, 3] * x3
            z += w_out[j] * np.tanh(a)
        target = cap * min(max(x0 + z, 0.0), 1.0)
        delta = target - s
        if delta > 0:
            p = delta / (dt * eta)
        else:
            p = delta * eta / dt
        # rate limits first, then capacity limits on the resulting SOC
        if p > max_c:
            p = max_c
        elif p < -max_d:
            p = -max_d
        if p > 0:
            s_next = s + dt * eta * p
        else:
            s_next = s + dt * p / eta
        if s_next > cap:
            s_next = cap
        elif s_next < lo:
            s_next = lo
        out[t + 1] = s_next
        s = s_next


def infer_soc(net: PolicyNet, demand, pv, prices, spec: BatterySpec, initial_soc, dt=DT_HOURS):
    demand = np.ascontiguousarray(demand, dtype=float)
    pv = np.ascontiguousarray(pv, dtype=float)
    prices = np.ascontiguousarray(prices, dtype=float)
    out = np.empty(demand.size + 1)
    soc0 = min(max(float(initial_soc), spec.soc_min_kwh), spec.capacity_kwh)
    _rollout(net.w_in, net.b_in, net.w_out, float(net.b_out), net.input_scale,
             demand, pv, prices, spec.capacity_kwh, spec.soc_min_kwh,
             spec.max_charge_kw, spec.max_discharge_kw, spec.charge_efficiency, dt, soc0, out)
    return out


def infer_schedule(
    net: PolicyNet,
    demand,
    pv,
    spec: BatterySpec,
    tariff: Tariff,
    initial_soc: float | None = None,
    dt: float = DT_HOURS,
) -> DispatchSchedule:
    """Closed-loop schedule from the policy net, feasible by construction."""
    demand = np.asarray(demand, dtype=float)
    pv = np.asarray(pv, dtype=float)
    if demand.size % tariff.n_slots or demand.size != pv.size or demand.size == 0:
        raise InvalidInputError(f"trace length must be a positive multiple of {tariff.n_slots}")
    prices = tariff.prices_for(demand.size)
    soc0 = spec.soc_min_kwh if initial_soc is None else initial_soc
    soc = infer_soc(net, demand, pv, prices, spec, soc0, dt)
    return build_schedule(demand, pv, soc, spec, prices, tariff.feed_in, dt)


@dataclass
class BenchmarkRow:
    customer_id: str
    dp_cost: float
    pfa_cost: float
    dp_seconds: float
    pfa_seconds: float


@dataclass
class BenchmarkReport:
    rows: list

    @property
    def dp_seconds(self):
        return float(np.mean([r.dp_seconds for r in self.rows]))

    @property
    def pfa_seconds(self):
        return float(np.mean([r.pfa_seconds for r in self.rows]))

    @property
    def ratio(self):
        return self.pfa_seconds / self.dp_seconds

    def to_csv(self, path):
        from lvmc.io.atomic import atomic_write

        lines = ["customer_id,dp_cost,pfa_cost,dp_seconds,pfa_seconds"]
        lines += [f"{r.customer_id},{r.dp_cost!r},{r.pfa_cost!r},{r.dp_seconds!r},{r.pfa_seconds!r}" for r in self.rows]
        atomic_write(path, "\n".join(lines) + "\n")


def benchmark_speedup(net: PolicyNet, customers, tariff: Tariff, n_levels: int = 101) -> BenchmarkReport:
    """Wall-clock DP versus PFA scheduling per customer.

    ``customers`` yields ``(customer_id, demand, pv, spec)``. The JIT-compiled
    rollout is warmed up once before timing.
    """
    customers = list(customers)
    if len(customers) < 10:
        raise InvalidInputError("benchmark needs at least 10 customers")
    _, d0, p0, s0 = customers[0]
    n0 = tariff.n_slots
    infer_schedule(net, d0[:n0], p0[:n0], s0, tariff)
    rows = []
    for cid, demand, pv, spec in customers:
        t0 = time.perf_counter()
        dp = solve_year(demand, pv, spec, tariff, n_levels=n_levels)
        t1 = time.perf_counter()
        pfa = infer_schedule(net, demand, pv, spec, tariff)
        t2 = time.perf_counter()
        rows.append(BenchmarkRow(str(cid), dp.total_cost, pfa.total_cost, t1 - t0, t2 - t1))
    return BenchmarkReport(rows)
