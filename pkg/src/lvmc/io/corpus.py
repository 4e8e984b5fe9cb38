"""Synthetic stand-in for a metered residential PV corpus.

Households differ in size, weekend behaviour, PV size and panel
orientation. Demand combines a base load, morning and evening peaks,
summer afternoon cooling that is strong on hot days, winter evening
heating, and multiplicative noise. PV follows a clear-sky shape scaled by
a day-to-day cloudiness factor shared across the corpus.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.synthesis.profiles import CustomerProfile
from lvmc.timebase import DEFAULT_LATITUDE, DEFAULT_START, day_dates, daytype_of, season_of, clear_sky_shape

PV_SIZES = (1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0)
_ORIENT_SHIFT = (0.0, -1.5, 1.5)  # north, east, west (hours)


def _bump(hours, centre, width):
    return np.exp(-0.5 * ((hours - centre) / width) ** 2)


def generate_corpus(
    n_customers: int = 150,
    days: int = 365,
    seed: int = 0,
    start: dt.date = DEFAULT_START,
    latitude: float = DEFAULT_LATITUDE,
) -> list[CustomerProfile]:
    rng = np.random.default_rng(seed)
    hours = (np.arange(SLOTS_PER_DAY) + 0.5) / 2.0
    dates = day_dates(start, days)
    season = np.array([season_of(d) for d in dates])
    weekend = np.array([daytype_of(d) for d in dates], dtype=bool)
    # shared weather: daily temperature anomaly (AR(1)) and cloudiness
    temp = np.empty(days)
    temp[0] = rng.normal()
    for d in range(1, days):
        temp[d] = 0.7 * temp[d - 1] + np.sqrt(1 - 0.49) * rng.normal()
    hot = np.clip(temp - 0.5, 0.0, 1.2) * (season == 0)
    cold = np.clip(-temp + 0.3, 0.0, None) * (season == 2) + 0.5 * (season == 2)
    clear = np.clip(rng.beta(4.0, 1.3, size=days) + 0.15 * (temp > 0.5), 0.05, 1.0)
    shapes = {s: clear_sky_shape(start, days, latitude, s).reshape(days, SLOTS_PER_DAY) for s in _ORIENT_SHIFT}

    out = []
    for c in range(n_customers):
        residents = int(rng.integers(1, 6))
        orient = int(rng.choice(3, p=[0.6, 0.2, 0.2]))
        pv_kw = float(rng.choice(PV_SIZES))
        home_midday = rng.random() < 0.35
        aircon = rng.random() < 0.75

        # always-on load varies a lot between homes (fridges, pumps, standby)
        base = (0.1 + 0.05 * residents) * rng.lognormal(0.0, 0.7)
        morning = (0.25 + 0.12 * residents) * _bump(hours, 7.5 + rng.normal(0, 0.5), 0.9)
        evening = (0.45 + 0.2 * residents) * _bump(hours, 18.5 + rng.normal(0, 0.5), 1.6)
        midday = (0.15 + 0.1 * residents) * _bump(hours, 13.0, 2.5)
        cool = (1.2 + 0.4 * residents) * aircon * _bump(hours, 16.0, 2.2)
        heat = (0.3 + 0.12 * residents) * _bump(hours, 19.5, 2.0)

        day_level = np.exp(0.15 * rng.standard_normal(days))
        mid = np.where(weekend | home_midday, 1.0, 0.25)
        demand = (
            base
            + morning[None, :] * np.where(weekend, 0.8, 1.0)[:, None]
            + evening[None, :]
            + midday[None, :] * mid[:, None]
            + cool[None, :] * hot[:, None]
            + heat[None, :] * cold[:, None]
        ) * day_level[:, None]
        demand *= np.exp(0.3 * rng.standard_normal(demand.shape) - 0.045)
        # appliance events (kettle, oven, laundry, pumps): sparse kW-sized spikes
        activity = 0.06 + 0.25 * (morning + evening + midday) / (morning + evening + midday).max()
        events = rng.random(demand.shape) < activity[None, :] * (0.6 + 0.2 * residents / 5)
        demand += events * np.minimum(rng.exponential(0.8, size=demand.shape), 3.0)

        own_cloud = np.clip(clear * np.exp(0.08 * rng.standard_normal(days)), 0.0, 1.0)
        pv = 0.85 * pv_kw * shapes[_ORIENT_SHIFT[orient]] * own_cloud[:, None]
        pv *= np.clip(1.0 - 0.1 * rng.random(pv.shape) * (1.0 - own_cloud[:, None]) * 4, 0.0, 1.0)

        out.append(CustomerProfile(f"C{c:04d}", demand.ravel(), pv.ravel(), start=start))
    return out
