"""Customer profiles and the feature vector used for clustering."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.errors import InvalidInputError
from lvmc.timebase import DEFAULT_START, day_dates, daytype_of

# feature vector layout
FEATURE_NAMES = ("weekend_ratio", "residents", "pv_kw", "orientation")
# typical daily consumption per resident (kWh) used to estimate household size
_KWH_PER_RESIDENT = 5.0


@dataclass
class CustomerProfile:
    """One customer's half-hourly demand and PV (kW) plus its feature vector."""

    id: str
    demand: np.ndarray
    pv: np.ndarray
    features: np.ndarray = field(default=None)
    start: dt.date = DEFAULT_START

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        self.pv = np.asarray(self.pv, dtype=float)
        if self.demand.shape != self.pv.shape or self.demand.ndim != 1:
            raise InvalidInputError(f"customer {self.id}: demand and pv must be 1-D and equally long")
        if self.demand.size == 0 or self.demand.size % SLOTS_PER_DAY:
            raise InvalidInputError(
                f"customer {self.id}: series length {self.demand.size} is not a positive multiple of {SLOTS_PER_DAY}"
            )
        if not (np.all(np.isfinite(self.demand)) and np.all(np.isfinite(self.pv))):
            raise InvalidInputError(f"customer {self.id}: non-finite values")
        if np.any(self.demand < 0) or np.any(self.pv < 0):
            raise InvalidInputError(f"customer {self.id}: demand and pv must be non-negative")
        if self.features is None:
            self.features = extract_features(self.demand, self.pv, self.start)
        else:
            self.features = np.asarray(self.features, dtype=float)

    @property
    def days(self):
        return self.demand.size // SLOTS_PER_DAY

    @property
    def net(self):
        return self.demand - self.pv

    @property
    def pv_kw(self):
        return float(self.features[2])


def extract_features(demand, pv, start: dt.date = DEFAULT_START) -> np.ndarray:
    """Feature vector estimated from metered data.

    * weekend_ratio: mean weekend demand over mean weekday demand
    * residents: household size guessed from daily consumption (1-6)
    * pv_kw: system size, taken as the 99.5th percentile of output / 0.85
    * orientation: 0 north, 1 east, 2 west, from the PV-weighted mean hour
    """
    demand = np.asarray(demand, dtype=float).reshape(-1, SLOTS_PER_DAY)
    pv = np.asarray(pv, dtype=float).reshape(-1, SLOTS_PER_DAY)
    weekend = np.array([daytype_of(d) for d in day_dates(start, demand.shape[0])], dtype=bool)
    wd = demand[~weekend].mean() if (~weekend).any() else demand.mean()
    we = demand[weekend].mean() if weekend.any() else wd
    ratio = we / wd if wd > 0 else 1.0
    daily_kwh = demand.sum(axis=1).mean() * 24.0 / SLOTS_PER_DAY
    residents = float(np.clip(np.round(daily_kwh / _KWH_PER_RESIDENT), 1, 6))
    pv_kw = float(np.percentile(pv, 99.5) / 0.85)
    hours = (np.arange(SLOTS_PER_DAY) + 0.5) / 2.0
    total = pv.sum()
    orientation = 0.0
    if total > 0:
        centre = float((pv.sum(axis=0) * hours).sum() / total)
        if centre < 11.5:
            orientation = 1.0
        elif centre > 12.5:
            orientation = 2.0
    return np.array([ratio, residents, pv_kw, orientation])
