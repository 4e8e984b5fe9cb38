"""Self-consumption maximisation: a price-blind greedy battery heuristic.

PV first serves the load, surplus charges the battery, and only what the
battery cannot absorb is exported. Deficits are covered from the battery
until it reaches ``soc_min``. Surplus is measured on the DC side of the
inverter (``pv - demand / eta_i``) so that a fully-absorbed surplus leaves
exactly zero exchange at the meter.
"""

from __future__ import annotations

import numpy as np

from lvmc import DT_HOURS
from lvmc.errors import InvalidInputError
from lvmc.hem.battery import BatterySpec, DispatchSchedule, build_schedule


def scm_schedule(
    demand,
    pv,
    spec: BatterySpec,
    initial_soc: float | None = None,
    prices=None,
    feed_in: float = 0.0,
    dt: float = DT_HOURS,
) -> DispatchSchedule:
    """Greedy schedule. ``prices``/``feed_in`` only price the result."""
    demand = np.asarray(demand, dtype=float)
    pv = np.asarray(pv, dtype=float)
    if demand.size != pv.size or demand.size == 0:
        raise InvalidInputError("demand and pv must be non-empty and of equal length")
    eta = spec.charge_efficiency
    lo, hi = spec.soc_min_kwh, spec.capacity_kwh
    soc = np.empty(demand.size + 1)
    soc[0] = lo if initial_soc is None else min(max(initial_soc, lo), hi)
    surplus = pv - demand / spec.inverter_efficiency
    s = soc[0]
    for t, x in enumerate(surplus.tolist()):
        if x > 0:
            p = min(x, spec.max_charge_kw, (hi - s) / (dt * eta))
            s = min(s + dt * eta * p, hi)
        elif x < 0:
            p = min(-x, spec.max_discharge_kw, (s - lo) * eta / dt)
            s = max(s - dt * p / eta, lo)
        soc[t + 1] = s
    if prices is None:
        prices = np.zeros(demand.size)
    return build_schedule(demand, pv, soc, spec, prices, feed_in, dt)
