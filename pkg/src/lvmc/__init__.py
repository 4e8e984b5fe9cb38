"""Probabilistic impact assessment of PV-battery systems on LV feeders."""

__version__ = "0.1.0"

SLOTS_PER_DAY = 48
DT_HOURS = 0.5
