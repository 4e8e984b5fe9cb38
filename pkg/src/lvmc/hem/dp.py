"""Deterministic dynamic programming for daily battery scheduling.

The state is the battery energy on a uniform grid between ``soc_min`` and
``capacity``. Every grid-to-grid move reachable within the charge and
discharge rate limits is an admissible action, so the recovered schedule
lands exactly on grid points. Demand and PV are known for the whole day.
"""

from __future__ import annotations

import math

import numpy as np

from lvmc import DT_HOURS, SLOTS_PER_DAY
from lvmc.errors import ConstraintViolationError, InvalidInputError
from lvmc.hem.battery import (
    BatterySpec,
    DispatchSchedule,
    Tariff,
    build_schedule,
    grid_power,
    inverter_power,
    power_for_delta,
    stage_cost,
)

DEFAULT_LEVELS = 101
_SNAP = 1e-9
# moves whose cost-to-go is within this relative margin of the best count as tied
TIE_RTOL = 1e-9


def soc_grid(spec: BatterySpec, n_levels: int) -> np.ndarray:
    if n_levels < 2:
        raise InvalidInputError("SOC grid needs at least 2 levels")
    return np.linspace(spec.soc_min_kwh, spec.capacity_kwh, n_levels)


def _offsets(spec, step, dt):
    """Admissible grid moves, ordered idle first then by growing magnitude."""
    eta = spec.charge_efficiency
    k_up = math.floor(dt * eta * spec.max_charge_kw / step + _SNAP)
    k_down = math.floor(dt * spec.max_discharge_kw / (eta * step) + _SNAP)
    return -k_down, k_up


def _costs(demand, pv, prices, feed_in, power, spec, dt):
    x_i = inverter_power(pv[:, None], power[None, :])
    g = grid_power(demand[:, None], x_i, spec.inverter_efficiency)
    return stage_cost(g, prices[:, None], feed_in, dt)


def solve_dp(
    demand,
    pv,
    spec: BatterySpec,
    tariff: Tariff,
    initial_soc: float,
    n_levels: int = DEFAULT_LEVELS,
    dt: float = DT_HOURS,
    terminal_price: float | None = None,
    balance_action: bool = True,
    explore: int = 0,
    rng=None,
) -> DispatchSchedule:
    """Cost-minimising schedule for one horizon by backward induction.

    The horizon length must match ``tariff.n_slots`` (48 for a day). Energy
    left in the battery at the end is credited at ``terminal_price`` per kWh,
    by default the horizon's cheapest buy price times the charge efficiency,
    which is below the cost of refilling from the grid, so the recursion has
    no incentive to buy energy just to hold it overnight nor to dump it.

    Admissible actions are every grid-to-grid move within the rate limits.
    With ``balance_action`` the move that exactly absorbs the PV surplus (or
    covers the deficit) is added; it generally lands between grid points, so
    its continuation value is interpolated linearly. With it disabled the
    recursion is exact on the grid.

    Equally good moves are common (e.g. any split of a fixed amount of
    discharge across the peak window). Ties, up to ``TIE_RTOL``, go to the
    move landing closest to the net-load-following state, then to the
    smallest move, so the schedule only departs from following the net load
    when that strictly pays.

    With ``explore > 0``, that many grid states per step are drawn from
    ``rng`` and stored with their optimal successor in
    ``meta["explore"]`` as rows ``(step, soc_kwh, next_soc_kwh)``; these
    off-trajectory decisions are useful as extra policy training data.

    Returns a schedule whose ``objective`` is the energy cost minus the
    terminal credit, i.e. the quantity the recursion minimises.
    """
    demand = np.asarray(demand, dtype=float)
    pv = np.asarray(pv, dtype=float)
    T = demand.size
    if pv.size != T or T == 0:
        raise InvalidInputError("demand and pv must be non-empty and of equal length")
    if T != tariff.n_slots:
        raise InvalidInputError(f"horizon of {T} steps does not match a {tariff.n_slots}-slot tariff")
    prices = tariff.buy_price
    feed_in = tariff.feed_in
    lo, hi = spec.soc_min_kwh, spec.capacity_kwh
    if not lo - _SNAP <= initial_soc <= hi + _SNAP:
        raise ConstraintViolationError(f"initial SOC {initial_soc} outside [{lo}, {hi}]")
    initial_soc = min(max(float(initial_soc), lo), hi)
    eta = spec.charge_efficiency

    levels = soc_grid(spec, n_levels)
    step = levels[1] - levels[0]
    k_min, k_max = _offsets(spec, step, dt)
    offsets = np.arange(k_min, k_max + 1)
    # among equally close candidates the smallest move comes first
    order = np.argsort(np.abs(offsets), kind="stable")
    offsets = offsets[order]
    power = np.clip(power_for_delta(offsets * step, eta, dt), -spec.max_discharge_kw, spec.max_charge_kw)
    cost = _costs(demand, pv, prices, feed_in, power, spec, dt)
    balance = np.clip(pv - demand / spec.inverter_efficiency, -spec.max_discharge_kw, spec.max_charge_kw)

    if terminal_price is None:
        terminal_price = float(np.min(prices)) * eta
    values = np.empty((T + 1, n_levels))
    values[T] = -terminal_price * levels
    # gather index into the value vector padded with +inf on both sides
    gather = np.arange(n_levels)[:, None] + (offsets - k_min)[None, :]
    padded = np.full(n_levels + k_max - k_min, np.inf)
    s_bal, p_bal = _balance_move(levels[None, :], balance[:, None], spec, dt)
    if balance_action:
        c_bal = _step_cost(demand[:, None], pv[:, None], prices[:, None], feed_in, p_bal,
                           spec.inverter_efficiency, dt)
    rows = []
    if explore:
        rng = np.random.default_rng(rng)
    for t in range(T - 1, -1 if explore else 0, -1):
        padded[-k_min:n_levels - k_min] = values[t + 1]
        q = padded[gather] + cost[t]
        if balance_action:
            q = np.column_stack([q, c_bal[t] + np.interp(s_bal[t], levels, values[t + 1])])
        values[t] = q.min(axis=1)
        if explore:
            j = rng.integers(n_levels, size=explore)
            nxt = levels[j, None] + offsets[None, :] * step
            if balance_action:
                nxt = np.column_stack([nxt, s_bal[t, j]])
            pick = _pick(q[j], nxt, s_bal[t, j])
            rows.append(np.column_stack([np.full(explore, t), levels[j], nxt[np.arange(explore), pick]]))

    soc = np.empty(T + 1)
    soc[0] = initial_soc
    s = initial_soc
    for t in range(T):
        s = _greedy_step(s, t, levels, values[t + 1], demand, pv, prices, feed_in, spec, dt,
                         balance[t], balance_action)
        soc[t + 1] = s
    sched = build_schedule(demand, pv, soc, spec, prices, feed_in, dt)
    sched.objective = sched.total_cost - terminal_price * soc[-1]
    sched.meta["terminal_price"] = terminal_price
    if explore:
        sched.meta["explore"] = np.concatenate(rows[::-1])
    return sched


def _balance_move(soc, p_balance, spec, dt):
    """Landing state and power of the net-load-matching move, clipped to capacity."""
    eta = spec.charge_efficiency
    target = np.clip(soc + dt * (eta * np.maximum(p_balance, 0.0) - np.maximum(-p_balance, 0.0) / eta),
                     spec.soc_min_kwh, spec.capacity_kwh)
    p = np.clip(power_for_delta(target - soc, eta, dt), -spec.max_discharge_kw, spec.max_charge_kw)
    return target, p


def _step_cost(d, pv, price, feed_in, p, eta_i, dt):
    x = pv - p
    g = d - np.where(x >= 0, eta_i * x, x / eta_i)
    return np.where(g > 0, price * g * dt, feed_in * g * dt)


def _pick(q, nxt, target):
    """Index of the chosen move along the last axis: near-ties go to the landing closest to ``target``."""
    q_min = q.min(axis=-1, keepdims=True)
    near = q <= q_min + TIE_RTOL * (1.0 + np.abs(q_min))
    return np.where(near, np.abs(nxt - np.asarray(target)[..., None]), np.inf).argmin(axis=-1)


def _greedy_step(s, t, levels, next_value, demand, pv, prices, feed_in, spec, dt, p_balance, use_balance=True):
    """Best move from the (possibly off-grid) state ``s`` given the value of the next step."""
    eta = spec.charge_efficiency
    j0 = np.searchsorted(levels, s - dt * spec.max_discharge_kw / eta - _SNAP)
    j1 = np.searchsorted(levels, s + dt * eta * spec.max_charge_kw + _SNAP, side="right")
    cand = levels[j0:j1]
    # candidates in order of growing move size, so exact ties prefer small moves
    order = np.argsort(np.abs(cand - s), kind="stable")
    cand = cand[order]
    p = np.clip(power_for_delta(cand - s, eta, dt), -spec.max_discharge_kw, spec.max_charge_kw)
    q = _step_cost(demand[t], pv[t], prices[t], feed_in, p, spec.inverter_efficiency, dt) + next_value[j0:j1][order]
    sb, pb = _balance_move(s, p_balance, spec, dt)
    if use_balance:
        qb = _step_cost(demand[t], pv[t], prices[t], feed_in, pb, spec.inverter_efficiency, dt)
        qb = qb + np.interp(sb, levels, next_value)
        cand = np.append(cand, sb)
        q = np.append(q, qb)
    if cand.size == 0:
        raise ConstraintViolationError(f"no admissible move from SOC {s} at step {t}")
    return float(cand[_pick(q, cand, sb)])


def solve_year(
    demand,
    pv,
    spec: BatterySpec,
    tariff: Tariff,
    initial_soc: float | None = None,
    n_levels: int = DEFAULT_LEVELS,
    dt: float = DT_HOURS,
    balance_action: bool = True,
    explore: int = 0,
    seed=None,
) -> DispatchSchedule:
    """Chain daily solves, carrying each day's final SOC into the next day.

    ``explore``/``seed`` are passed to :func:`solve_dp`; the off-trajectory
    rows of all days are gathered with year-relative step indices.
    """
    demand = np.asarray(demand, dtype=float)
    pv = np.asarray(pv, dtype=float)
    n = tariff.n_slots
    if demand.size % n or demand.size != pv.size or demand.size == 0:
        raise InvalidInputError(f"trace length {demand.size} is not a positive multiple of {n}")
    soc0 = spec.soc_min_kwh if initial_soc is None else initial_soc
    days = []
    rng = np.random.default_rng(seed) if explore else None
    for d in range(demand.size // n):
        sl = slice(d * n, (d + 1) * n)
        day = solve_dp(demand[sl], pv[sl], spec, tariff, soc0, n_levels, dt,
                       balance_action=balance_action, explore=explore, rng=rng)
        days.append(day)
        soc0 = day.soc[-1]
    return concat_schedules(days)


def concat_schedules(days) -> DispatchSchedule:
    first = days[0]
    soc = np.concatenate([first.soc[:1]] + [d.soc[1:] for d in days])
    out = DispatchSchedule(
        demand=np.concatenate([d.demand for d in days]),
        pv=np.concatenate([d.pv for d in days]),
        battery_power=np.concatenate([d.battery_power for d in days]),
        soc=soc,
        inverter_power=np.concatenate([d.inverter_power for d in days]),
        grid_power=np.concatenate([d.grid_power for d in days]),
        step_cost=np.concatenate([d.step_cost for d in days]),
        spec=first.spec,
        dt=first.dt,
    )
    out.meta["daily_cost"] = np.array([d.total_cost for d in days])
    if all("explore" in d.meta for d in days):
        offset = np.cumsum([0] + [len(d) for d in days[:-1]])
        out.meta["explore"] = np.concatenate(
            [d.meta["explore"] + [o, 0.0, 0.0] for d, o in zip(days, offset)])
    if all(d.objective is not None for d in days):
        out.objective = out.total_cost - days[-1].meta.get("terminal_price", 0.0) * soc[-1]
    return out
