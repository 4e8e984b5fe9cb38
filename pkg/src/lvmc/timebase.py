"""Calendar helpers: seasons, day types and a clear-sky irradiance shape.

Seasons follow the southern hemisphere (December-February is summer).
Timestamps are local standard time with no daylight-saving shifts.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from lvmc import SLOTS_PER_DAY

N_SEASONS = 4
N_DAYTYPES = 2
N_LAYERS = N_SEASONS * N_DAYTYPES

# month (1-12) -> season index: 0 summer, 1 autumn, 2 winter, 3 spring
_SEASON_OF_MONTH = np.array([0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])

DEFAULT_START = dt.date(2013, 1, 1)
DEFAULT_LATITUDE = -33.9


def day_dates(start: dt.date, days: int) -> list[dt.date]:
    return [start + dt.timedelta(days=d) for d in range(days)]


def season_of(date: dt.date) -> int:
    return int(_SEASON_OF_MONTH[date.month - 1])


def daytype_of(date: dt.date) -> int:
    """0 for weekdays, 1 for weekends."""
    return int(date.weekday() >= 5)


def layer_of(date: dt.date) -> int:
    return season_of(date) * N_DAYTYPES + daytype_of(date)


def day_layers(start: dt.date, days: int) -> np.ndarray:
    return np.array([layer_of(d) for d in day_dates(start, days)], dtype=np.int64)


def clear_sky_shape(
    start: dt.date, days: int, latitude: float = DEFAULT_LATITUDE, hour_shift: float = 0.0
) -> np.ndarray:
    """Cosine of the solar zenith angle at each half-hour midpoint, floored at 0.

    Returns an array of length ``days * 48`` with peak close to 1 at solar
    noon in summer. Good enough as a clear-sky PV shape; no atmosphere model.
    ``hour_shift`` moves the curve later (positive) or earlier (negative),
    a crude stand-in for west- or east-facing panels.
    """
    lat = np.radians(latitude)
    doy = np.array([d.timetuple().tm_yday for d in day_dates(start, days)], dtype=float)
    decl = np.radians(23.44) * np.sin(2.0 * np.pi * (284.0 + doy) / 365.0)
    hours = (np.arange(SLOTS_PER_DAY) + 0.5) * 24.0 / SLOTS_PER_DAY
    omega = np.radians(15.0 * (hours - 12.0 - hour_shift))
    cosz = (
        np.sin(lat) * np.sin(decl)[:, None]
        + np.cos(lat) * np.cos(decl)[:, None] * np.cos(omega)[None, :]
    )
    return np.clip(cosz, 0.0, None).ravel()
