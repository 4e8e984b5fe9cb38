"""Voltage compliance, thermal loading and voltage unbalance."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.errors import InvalidInputError, UndefinedMeasureError
from lvmc.io.atomic import atomic_write

BAND = (0.95, 1.05)
HARD = (0.9, 1.1)
MAX_OUTSIDE_FRACTION = 0.05

_A = np.exp(2j * np.pi / 3)
# relative size below which a negative-sequence component is rounding noise
_VUF_SNAP = 1e-13


def daily_compliance(v_pu, band=BAND, hard=HARD, max_outside=MAX_OUTSIDE_FRACTION, steps_per_day=SLOTS_PER_DAY):
    """Per-day pass flags for voltage series with time on the last axis.

    A day fails when more than ``max_outside`` of its steps leave ``band`` or
    any step leaves ``hard``. A trailing partial day is judged on its own
    steps. Returns booleans of shape ``(..., days)``.
    """
    v = np.asarray(v_pu, dtype=float)
    if v.shape[-1] == 0:
        raise InvalidInputError("voltage series is empty")
    n = v.shape[-1]
    days = -(-n // steps_per_day)
    pad = days * steps_per_day - n
    outside = (v < band[0]) | (v > band[1])
    violent = (v < hard[0]) | (v > hard[1])
    valid = np.ones(n, dtype=bool)
    if pad:
        widths = [(0, 0)] * (v.ndim - 1) + [(0, pad)]
        outside = np.pad(outside, widths)
        violent = np.pad(violent, widths)
        valid = np.pad(valid, (0, pad))
    shape = v.shape[:-1] + (days, steps_per_day)
    frac = outside.reshape(shape).sum(axis=-1) / valid.reshape(days, steps_per_day).sum(axis=-1)
    return ~((frac > max_outside) | violent.reshape(shape).any(axis=-1))


def voltage_compliance(v_pu, **kw) -> bool:
    """True when every day of the series passes (a single failing day is a problem)."""
    return bool(daily_compliance(v_pu, **kw).all())


def thermal_loading(head_current_a, capacity_a):
    """Ratio of the largest phase current to ``capacity_a`` per step, and the problem flag.

    ``head_current_a`` is (T,) magnitudes or (T, 3) phase currents (complex ok).
    """
    if not capacity_a > 0:
        raise InvalidInputError("capacity must be positive")
    i = np.abs(np.asarray(head_current_a))
    if i.ndim == 2:
        i = i.max(axis=1)
    ratio = i / capacity_a
    return ratio, bool(np.any(ratio > 1.0))


def sequence_components(va, vb, vc):
    """Zero, positive and negative sequence phasors (a-b-c, b lagging a)."""
    va, vb, vc = (np.asarray(x, dtype=complex) for x in (va, vb, vc))
    v0 = (va + vb + vc) / 3.0
    v1 = (va + _A * vb + _A ** 2 * vc) / 3.0
    v2 = (va + _A ** 2 * vb + _A * vc) / 3.0
    return v0, v1, v2


def vuf(va, vb=None, vc=None):
    """Voltage unbalance factor |V-| / |V+| in percent.

    Accepts three phasors (scalars or arrays) or one array whose last axis
    holds the three phases. Raises when the positive sequence vanishes.
    """
    if vb is None:
        v = np.asarray(va, dtype=complex)
        va, vb, vc = v[..., 0], v[..., 1], v[..., 2]
    _, v1, v2 = sequence_components(va, vb, vc)
    m1, m2 = np.abs(v1), np.abs(v2)
    scale = np.maximum.reduce([np.abs(va), np.abs(vb), np.abs(vc)])
    if np.any(m1 <= _VUF_SNAP * scale) or not np.all(np.isfinite(m1)):
        raise UndefinedMeasureError("positive-sequence voltage is zero; VUF undefined")
    m2 = np.where(m2 <= _VUF_SNAP * scale, 0.0, m2)
    out = 100.0 * m2 / m1
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MetricReport:
    pct_customers_voltage_problem: float
    transformer_loading_peak: float
    vuf_max: float
    customer_ok: list = field(default_factory=list)
    failing_days: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        atomic_write(path, json.dumps(self.to_dict(), indent=2))

    def csv_row(self, run, p_pv, p_b):
        return [run, p_pv, p_b, self.pct_customers_voltage_problem, self.transformer_loading_peak, self.vuf_max]


def evaluate(feeder, solution) -> MetricReport:
    """All three metrics from a time-series power-flow solution."""
    v_pu = solution.customer_voltage_pu(feeder)           # (T, n_customers)
    days_ok = daily_compliance(v_pu.T)                    # (n_customers, days)
    ok = days_ok.all(axis=1)
    n = max(1, ok.size)
    ratio, _ = thermal_loading(solution.head_current, feeder.head_ampacity)
    buses = np.unique(np.concatenate([[feeder.head_bus], feeder.load_bus]))
    u = vuf(solution.voltages[:, buses, :])
    return MetricReport(
        pct_customers_voltage_problem=100.0 * float((~ok).sum()) / n,
        transformer_loading_peak=float(ratio.max(initial=0.0)),
        vuf_max=float(np.max(u, initial=0.0)),
        customer_ok=ok.tolist(),
        failing_days=(~days_ok).sum(axis=1).tolist(),
    )
