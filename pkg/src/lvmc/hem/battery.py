"""Battery, tariff and schedule types plus the per-step energy equations."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from lvmc import DT_HOURS, SLOTS_PER_DAY
from lvmc.errors import ConstraintViolationError, InvalidInputError

_RATE_TOL = 1e-9


@dataclass(frozen=True)
class BatterySpec:
    capacity_kwh: float
    soc_min_kwh: float
    max_charge_kw: float
    max_discharge_kw: float
    charge_efficiency: float = 0.95
    inverter_efficiency: float = 0.96

    def __post_init__(self):
        if not 0.0 <= self.soc_min_kwh < self.capacity_kwh:
            raise InvalidInputError(
                f"soc_min_kwh must satisfy 0 <= soc_min < capacity, got "
                f"{self.soc_min_kwh} / {self.capacity_kwh}"
            )
        if self.max_charge_kw <= 0 or self.max_discharge_kw <= 0:
            raise InvalidInputError("max_charge_kw and max_discharge_kw must be positive")
        for name in ("charge_efficiency", "inverter_efficiency"):
            eta = getattr(self, name)
            if not 0.0 < eta <= 1.0:
                raise InvalidInputError(f"{name} must lie in (0, 1], got {eta}")

    @classmethod
    def sized(cls, capacity_kwh, power_kw, soc_min_fraction=0.1, **kw):
        return cls(capacity_kwh, soc_min_fraction * capacity_kwh, power_kw, power_kw, **kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# (upper PV bound kW, capacity kWh, power kW); bands from the product table,
# gaps between bands resolved to the nearer band.
BATTERY_TABLE = (
    (4.5, 6.5, 4.2),
    (6.5, 9.8, 5.0),
    (float("inf"), 14.0, 5.0),
)


def battery_for_pv(pv_kw: float, table=BATTERY_TABLE, **kw) -> BatterySpec:
    """Battery sized to the attached PV system."""
    if pv_kw < 0:
        raise InvalidInputError(f"PV size must be non-negative, got {pv_kw}")
    for upper, cap, power in table:
        if pv_kw <= upper:
            return BatterySpec.sized(cap, power, **kw)
    raise InvalidInputError(f"no battery band covers PV size {pv_kw}")


@dataclass(frozen=True)
class Tariff:
    buy_price: np.ndarray
    feed_in: float
    peak_slots: tuple = (28, 40)

    def __post_init__(self):
        buy = np.asarray(self.buy_price, dtype=float)
        object.__setattr__(self, "buy_price", buy)
        if buy.ndim != 1 or buy.size == 0:
            raise InvalidInputError("buy_price must be a non-empty vector")
        if np.any(buy < 0) or self.feed_in < 0:
            raise InvalidInputError("prices must be non-negative")
        lo, hi = self.peak_slots
        if not 0 <= lo < hi <= buy.size:
            raise InvalidInputError(f"peak window {self.peak_slots} outside 0..{buy.size}")
        if self.feed_in >= buy[lo:hi].min():
            raise InvalidInputError("feed_in must be below every peak buy price")

    @property
    def n_slots(self):
        return self.buy_price.size

    @property
    def peak_price(self):
        return float(self.buy_price[self.peak_slots[0]:self.peak_slots[1]].max())

    def prices_for(self, n_steps):
        """Buy price per step for a horizon starting at slot 0."""
        reps = -(-n_steps // self.n_slots)
        return np.tile(self.buy_price, reps)[:n_steps]

    def to_dict(self):
        return {
            "buy_price": self.buy_price.tolist(),
            "feed_in": self.feed_in,
            "peak_slots": list(self.peak_slots),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["buy_price"], float), float(d["feed_in"]), tuple(d.get("peak_slots", (28, 40))))

    @classmethod
    def time_of_use(cls, peak=0.55, shoulder=0.25, off_peak=0.15, feed_in=0.08):
        """Peak 14:00-20:00, shoulder 07:00-14:00 and 20:00-22:00, off-peak otherwise."""
        buy = np.full(SLOTS_PER_DAY, off_peak)
        buy[14:28] = shoulder
        buy[28:40] = peak
        buy[40:44] = shoulder
        return cls(buy, feed_in, (28, 40))

    @classmethod
    def flat(cls, price=0.25, feed_in=0.08):
        return cls(np.full(SLOTS_PER_DAY, price), feed_in, (28, 40))


def transition(soc, charge_kw, dt, spec: BatterySpec):
    """Next state of charge after applying ``charge_kw`` (+ charge, - discharge) for ``dt`` hours."""
    if charge_kw > spec.max_charge_kw + _RATE_TOL or -charge_kw > spec.max_discharge_kw + _RATE_TOL:
        raise ConstraintViolationError(
            f"battery power {charge_kw} kW outside [-{spec.max_discharge_kw}, {spec.max_charge_kw}]"
        )
    eta = spec.charge_efficiency
    return soc + dt * (eta * max(0.0, charge_kw) - max(0.0, -charge_kw) / eta)


def soc_delta(charge_kw, eta, dt):
    """Vectorised state-of-charge change for signed battery power."""
    p = np.asarray(charge_kw, dtype=float)
    return dt * (eta * np.maximum(p, 0.0) - np.maximum(-p, 0.0) / eta)


def power_for_delta(delta_kwh, eta, dt):
    """Exact inverse of :func:`soc_delta`."""
    d = np.asarray(delta_kwh, dtype=float)
    return np.where(d > 0, d / (dt * eta), d * eta / dt)


def inverter_power(pv_kw, battery_kw):
    return np.asarray(pv_kw, dtype=float) - np.asarray(battery_kw, dtype=float)


def grid_power(demand_kw, inverter_kw, eta_i):
    """Grid import (+) or export (-) closing the energy balance at the meter."""
    x = np.asarray(inverter_kw, dtype=float)
    return np.asarray(demand_kw, dtype=float) - np.where(x >= 0, eta_i * x, x / eta_i)


def stage_cost(grid_kw, buy_price, feed_in, dt=DT_HOURS):
    g = np.asarray(grid_kw, dtype=float)
    return buy_price * np.maximum(g, 0.0) * dt - feed_in * np.maximum(-g, 0.0) * dt


@dataclass
class DispatchSchedule:
    """Battery schedule over ``T`` steps.

    ``soc`` has ``T + 1`` entries; ``soc[0]`` is the initial state and
    ``soc[t + 1]`` the state after step ``t``.
    """

    demand: np.ndarray
    pv: np.ndarray
    battery_power: np.ndarray
    soc: np.ndarray
    inverter_power: np.ndarray
    grid_power: np.ndarray
    step_cost: np.ndarray
    spec: BatterySpec | None = None
    dt: float = DT_HOURS
    objective: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def total_cost(self):
        return float(np.sum(self.step_cost))

    @property
    def charge(self):
        return np.maximum(self.battery_power, 0.0)

    @property
    def discharge(self):
        return np.maximum(-self.battery_power, 0.0)

    def __len__(self):
        return len(self.battery_power)

    def to_csv(self, path):
        from lvmc.io.atomic import atomic_write

        lines = ["t,demand_kw,pv_kw,battery_kw,soc_kwh,grid_kw,cost"]
        for t in range(len(self)):
            lines.append(
                f"{t},{self.demand[t]!r},{self.pv[t]!r},{self.battery_power[t]!r},"
                f"{self.soc[t + 1]!r},{self.grid_power[t]!r},{self.step_cost[t]!r}"
            )
        atomic_write(path, "\n".join(lines) + "\n")


def build_schedule(demand, pv, soc, spec: BatterySpec, prices, feed_in, dt=DT_HOURS, objective=None):
    """Derive powers and costs from an SOC trajectory.

    Battery power is the exact inverse of the SOC update, clipped onto the
    rate limits to absorb rounding, so all schedulers share one accounting.
    """
    soc = np.asarray(soc, dtype=float)
    eta = spec.charge_efficiency
    p = power_for_delta(np.diff(soc), eta, dt)
    p = np.clip(p, -spec.max_discharge_kw, spec.max_charge_kw)
    x_i = inverter_power(pv, p)
    g = grid_power(demand, x_i, spec.inverter_efficiency)
    return DispatchSchedule(
        demand=np.asarray(demand, dtype=float),
        pv=np.asarray(pv, dtype=float),
        battery_power=p,
        soc=soc,
        inverter_power=x_i,
        grid_power=g,
        step_cost=stage_cost(g, prices, feed_in, dt),
        spec=spec,
        dt=dt,
        objective=objective,
    )


def idle_schedule(demand, pv, prices, feed_in, eta_i=0.96, dt=DT_HOURS):
    """Grid exchange for a customer without a battery (PV passes through the inverter)."""
    demand = np.asarray(demand, dtype=float)
    pv = np.asarray(pv, dtype=float)
    zero = np.zeros_like(demand)
    x_i = inverter_power(pv, zero)
    g = grid_power(demand, x_i, eta_i)
    return DispatchSchedule(demand, pv, zero, np.zeros(len(demand) + 1), x_i, g, stage_cost(g, prices, feed_in, dt), None, dt)


def schedule_residuals(s: DispatchSchedule) -> dict:
    """Largest violation of each battery/energy-balance constraint (0 means satisfied)."""
    spec = s.spec
    eta = spec.charge_efficiency
    eta_i = spec.inverter_efficiency
    p = s.battery_power
    xp, xm = np.maximum(p, 0.0), np.maximum(-p, 0.0)
    soc_next = s.soc[:-1] + s.dt * (eta * xp - xm / eta)
    x_i = s.pv - p
    delivered = np.where(x_i >= 0, eta_i * x_i, x_i / eta_i)

    def worst(a):
        return float(np.max(a, initial=0.0))

    return {
        "energy_balance": worst(np.abs(s.demand - delivered - s.grid_power)),
        "inverter": worst(np.abs(s.inverter_power - x_i)),
        "soc_transition": worst(np.abs(s.soc[1:] - soc_next)),
        "charge_rate": worst(np.concatenate([-xp, xp - spec.max_charge_kw])),
        "discharge_rate": worst(np.concatenate([-xm, xm - spec.max_discharge_kw])),
        "soc_bounds": worst(np.concatenate([spec.soc_min_kwh - s.soc, s.soc - spec.capacity_kwh])),
        "complementarity": worst(xp * xm),
    }


def save_json(obj, path):
    from lvmc.io.atomic import atomic_write

    atomic_write(path, json.dumps(obj.to_dict(), indent=2))
