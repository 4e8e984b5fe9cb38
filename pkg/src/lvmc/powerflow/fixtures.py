"""Representative radial feeders with prescribed macro parameters.

A fixture has one transformer feeding ``n_laterals`` cable runs from the LV
busbar. Customers are spread evenly over the lateral buses (a few per bus)
and assigned to phases round-robin. Span lengths are jittered under the
seed and rescaled so the cable length totals exactly ``length_m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lvmc.errors import InvalidInputError
from lvmc.powerflow.feeder import V_BASE, FeederModel, four_wire_matrix, kron_reduce, scale_feeder


@dataclass(frozen=True)
class FeederParams:
    name: str
    length_m: float
    customers: int
    head_ampacity: float
    transformer_kva: float = 750.0
    n_laterals: int = 4
    customers_per_bus: int = 3
    # four-wire cable, ohm/km (phase and neutral conductors alike)
    r_ohm_km: float = 0.164
    x_self_ohm_km: float = 0.074
    x_mutual_ohm_km: float = 0.02
    transformer_z_pu: float = 0.045
    transformer_xr: float = 3.0
    # off-load tap: LV busbar held above nominal so peak-load voltages stay in band
    source_pu: float = 1.04


UK = FeederParams("UK", 5656.0, 223, 400.0, transformer_kva=750.0)
AUS1 = FeederParams("AUS1", 10235.0, 302, 1155.0, transformer_kva=2250.0, n_laterals=6,
                    r_ohm_km=0.164 / 3.0)
FIXTURES = {"UK": UK, "AUS1": AUS1}


def generate_fixture_feeder(params: FeederParams, seed: int = 0) -> FeederModel:
    """Radial feeder whose cable length, customer count and head ampacity match ``params``."""
    if params.length_m <= 0 or params.customers < 1 or params.head_ampacity <= 0:
        raise InvalidInputError("length, customer count and head ampacity must be positive")
    rng = np.random.default_rng(seed)
    n_cust = params.customers
    n_lat = max(1, min(params.n_laterals, n_cust))
    per_bus = max(1, params.customers_per_bus)
    # customers per lateral, as even as possible
    lat_cust = np.full(n_lat, n_cust // n_lat)
    lat_cust[: n_cust % n_lat] += 1
    lat_buses = np.maximum(1, -(-lat_cust // per_bus))

    spans = rng.uniform(0.7, 1.3, size=int(lat_buses.sum()))
    spans *= params.length_m / spans.sum()

    names = ["source", "lv_busbar"]
    fb, tb, lengths = [0], [1], [0.0]
    z_tx = _transformer_z(params)
    zs = [z_tx]
    amp = [params.head_ampacity]
    z_km = kron_reduce(four_wire_matrix(params.r_ohm_km, params.x_self_ohm_km, params.x_mutual_ohm_km))
    load_bus, load_phase, ids = [], [], []
    k = 0
    c = 0
    for lat in range(n_lat):
        parent = 1
        # lateral conductors sized for an even share of the head current
        lat_amp = params.head_ampacity / n_lat * 1.5
        slots = np.array_split(np.arange(lat_cust[lat]), lat_buses[lat])
        for j, members in enumerate(slots):
            bus = len(names)
            names.append(f"L{lat + 1}_{j + 1}")
            fb.append(parent)
            tb.append(bus)
            lengths.append(float(spans[k]))
            zs.append(z_km * spans[k] / 1000.0)
            amp.append(lat_amp)
            k += 1
            for _ in members:
                load_bus.append(bus)
                load_phase.append(c % 3)
                ids.append(f"{params.name}_c{c + 1:03d}")
                c += 1
            parent = bus
    # make the lengths sum exactly despite float rounding
    lengths = np.array(lengths)
    lengths[-1] += params.length_m - lengths.sum()
    return FeederModel(
        name=params.name,
        bus_names=names,
        from_bus=fb,
        to_bus=tb,
        z=np.array(zs),
        ampacity=amp,
        length_m=lengths,
        load_bus=load_bus,
        load_phase=load_phase,
        customer_ids=ids,
        head_ampacity=params.head_ampacity,
        transformer_kva=params.transformer_kva,
        v_base=V_BASE,
        source_pu=params.source_pu,
    )


def _transformer_z(params: FeederParams) -> np.ndarray:
    z_base = 3.0 * V_BASE ** 2 / (params.transformer_kva * 1e3)
    mag = params.transformer_z_pu * z_base
    r = mag / np.hypot(1.0, params.transformer_xr)
    return np.eye(3) * (r + 1j * r * params.transformer_xr)


def fixture(name: str, seed: int = 0) -> FeederModel:
    """Named fixture: ``UK``, ``AUS1`` or ``AUS2`` (the UK feeder at three times the capacity)."""
    key = name.upper().replace(" ", "").replace("-", "")
    if key == "AUS2":
        return scale_feeder(generate_fixture_feeder(UK, seed), 3.0, name="AUS2")
    if key not in FIXTURES:
        raise InvalidInputError(f"unknown feeder fixture {name!r}; choose UK, AUS1 or AUS2")
    return generate_fixture_feeder(FIXTURES[key], seed)
