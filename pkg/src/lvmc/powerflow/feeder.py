"""Radial three-phase LV feeder description.

Bus 0 is the source (the transformer's primary side referred to the LV
base); line 0 is the transformer, modelled as a series impedance from bus 0
to the LV busbar. All impedances are 3x3 phase matrices in ohms after
eliminating the neutral. Loads attach to a bus and one phase (0, 1, 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from lvmc.errors import InvalidInputError, InvalidTopologyError
from lvmc.io.atomic import atomic_write

V_BASE = 230.0
SCHEMA_VERSION = 1


def kron_reduce(z4) -> np.ndarray:
    """Eliminate the neutral (last row/column) of a 4x4 impedance matrix."""
    z4 = np.asarray(z4, dtype=complex)
    if z4.shape != (4, 4):
        raise InvalidInputError(f"expected a 4x4 impedance matrix, got {z4.shape}")
    return z4[:3, :3] - np.outer(z4[:3, 3], z4[3, :3]) / z4[3, 3]


def four_wire_matrix(r_phase, x_self, x_mutual, r_neutral=None) -> np.ndarray:
    """Symmetric (transposed) four-wire impedance matrix per unit length."""
    r_neutral = r_phase if r_neutral is None else r_neutral
    z = np.full((4, 4), 1j * x_mutual, dtype=complex)
    np.fill_diagonal(z, [r_phase + 1j * x_self] * 3 + [r_neutral + 1j * x_self])
    return z


@dataclass(frozen=True)
class FeederModel:
    name: str
    bus_names: tuple
    from_bus: np.ndarray          # (n_lines,) parent bus of each line
    to_bus: np.ndarray            # (n_lines,) child bus of each line
    z: np.ndarray                 # (n_lines, 3, 3) complex ohms
    ampacity: np.ndarray          # (n_lines,) A
    length_m: np.ndarray          # (n_lines,) m; 0 for the transformer
    load_bus: np.ndarray          # (n_customers,)
    load_phase: np.ndarray        # (n_customers,)
    customer_ids: tuple
    head_ampacity: float
    transformer_kva: float
    v_base: float = V_BASE
    source_pu: float = 1.0
    _order: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "from_bus", np.asarray(self.from_bus, dtype=np.int64))
        object.__setattr__(self, "to_bus", np.asarray(self.to_bus, dtype=np.int64))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=complex).reshape(-1, 3, 3))
        object.__setattr__(self, "ampacity", np.asarray(self.ampacity, dtype=float))
        object.__setattr__(self, "length_m", np.asarray(self.length_m, dtype=float))
        object.__setattr__(self, "load_bus", np.asarray(self.load_bus, dtype=np.int64))
        object.__setattr__(self, "load_phase", np.asarray(self.load_phase, dtype=np.int64))
        object.__setattr__(self, "bus_names", tuple(self.bus_names))
        object.__setattr__(self, "customer_ids", tuple(self.customer_ids))
        self._validate()
        object.__setattr__(self, "_order", _levels(self.n_buses, self.from_bus, self.to_bus))

    def _validate(self):
        nb, nl = self.n_buses, self.n_lines
        if nl != nb - 1:
            raise InvalidTopologyError(f"a radial feeder with {nb} buses needs {nb - 1} lines, got {nl}")
        for arr in (self.from_bus, self.to_bus):
            if arr.size and (arr.min() < 0 or arr.max() >= nb):
                raise InvalidTopologyError("line endpoint refers to a missing bus")
        if nl and self.from_bus[0] != 0:
            raise InvalidTopologyError("line 0 must be the transformer leaving the source bus")
        if np.any(self.z.real < -0.0) or self.z.shape[0] != nl:
            raise InvalidInputError("line impedances must have R >= 0, one 3x3 matrix per line")
        if np.any(self.ampacity <= 0) or self.head_ampacity <= 0:
            raise InvalidInputError("ampacities must be positive")
        if self.load_bus.size != len(self.customer_ids) or self.load_phase.size != self.load_bus.size:
            raise InvalidInputError("every customer needs exactly one bus and phase")
        if self.load_bus.size and (self.load_bus.min() < 1 or self.load_bus.max() >= nb):
            raise InvalidInputError("customers must attach to an existing non-source bus")
        if self.load_phase.size and (self.load_phase.min() < 0 or self.load_phase.max() > 2):
            raise InvalidInputError("customer phase must be 0, 1 or 2")

    @property
    def n_buses(self):
        return len(self.bus_names)

    @property
    def n_lines(self):
        return self.from_bus.size

    @property
    def n_customers(self):
        return self.load_bus.size

    @property
    def total_length_m(self):
        return float(self.length_m.sum())

    @property
    def head_bus(self):
        """LV busbar fed by the transformer (line 0)."""
        return int(self.to_bus[0])

    @property
    def levels(self):
        return self._order

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "v_base": self.v_base,
            "source_pu": self.source_pu,
            "head_ampacity": self.head_ampacity,
            "transformer_kva": self.transformer_kva,
            "buses": list(self.bus_names),
            "lines": [
                {
                    "from": self.bus_names[f],
                    "to": self.bus_names[t],
                    "r_ohm": z.real.tolist(),
                    "x_ohm": z.imag.tolist(),
                    "ampacity_a": float(a),
                    "length_m": float(ln),
                }
                for f, t, z, a, ln in zip(self.from_bus, self.to_bus, self.z, self.ampacity, self.length_m)
            ],
            "loads": [
                {"customer": c, "bus": self.bus_names[b], "phase": int(p)}
                for c, b, p in zip(self.customer_ids, self.load_bus, self.load_phase)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported feeder schema version {d.get('schema_version')}")
        buses = list(d["buses"])
        index = {b: i for i, b in enumerate(buses)}
        if len(index) != len(buses):
            raise InvalidTopologyError("duplicate bus names")
        try:
            fb = [index[ln["from"]] for ln in d["lines"]]
            tb = [index[ln["to"]] for ln in d["lines"]]
            lb = [index[ld["bus"]] for ld in d["loads"]]
        except KeyError as exc:
            raise InvalidTopologyError(f"unknown bus {exc}") from None
        z = []
        for ln in d["lines"]:
            m = np.asarray(ln["r_ohm"], float) + 1j * np.asarray(ln["x_ohm"], float)
            z.append(kron_reduce(m) if m.shape == (4, 4) else m)
        return cls(
            name=d["name"],
            bus_names=buses,
            from_bus=fb,
            to_bus=tb,
            z=np.array(z),
            ampacity=[ln["ampacity_a"] for ln in d["lines"]],
            length_m=[ln.get("length_m", 0.0) for ln in d["lines"]],
            load_bus=lb,
            load_phase=[ld["phase"] for ld in d["loads"]],
            customer_ids=[ld["customer"] for ld in d["loads"]],
            head_ampacity=float(d["head_ampacity"]),
            transformer_kva=float(d["transformer_kva"]),
            v_base=float(d.get("v_base", V_BASE)),
            source_pu=float(d.get("source_pu", 1.0)),
        )

    def save(self, path):
        atomic_write(path, json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _levels(n_buses, from_bus, to_bus):
    """Group lines by depth of their child bus; checks the tree is rooted at bus 0."""
    parent_line = np.full(n_buses, -1, dtype=np.int64)
    for i, t in enumerate(to_bus):
        if t == 0:
            raise InvalidTopologyError("the source bus cannot be fed by a line")
        if parent_line[t] >= 0:
            raise InvalidTopologyError(f"bus {t} is fed by more than one line (meshed network)")
        parent_line[t] = i
    depth = np.full(n_buses, -1, dtype=np.int64)
    depth[0] = 0
    children = [[] for _ in range(n_buses)]
    for i, f in enumerate(from_bus):
        children[f].append(i)
    stack = [0]
    while stack:
        b = stack.pop()
        for i in children[b]:
            t = to_bus[i]
            if depth[t] >= 0:
                raise InvalidTopologyError("feeder contains a loop")
            depth[t] = depth[b] + 1
            stack.append(t)
    if np.any(depth < 0):
        missing = int(np.flatnonzero(depth < 0)[0])
        raise InvalidTopologyError(f"bus {missing} is not connected to the source")
    line_depth = depth[to_bus]
    return tuple(np.flatnonzero(line_depth == d) for d in range(1, int(line_depth.max(initial=0)) + 1))


def scale_feeder(feeder: FeederModel, capacity_factor: float, name: str | None = None) -> FeederModel:
    """Stronger (or weaker) variant of a feeder.

    The transformer impedance (line 0) is divided by the factor; lines keep
    their reactance and only their resistance is divided. All ampacities,
    the head ampacity and the transformer rating scale with the factor.
    """
    if not capacity_factor > 0:
        raise InvalidInputError("capacity_factor must be positive")
    z = feeder.z.copy()
    z[0] = z[0] / capacity_factor
    z[1:] = z[1:].real / capacity_factor + 1j * z[1:].imag
    return replace(
        feeder,
        name=name or feeder.name,
        z=z,
        ampacity=feeder.ampacity * capacity_factor,
        head_ampacity=feeder.head_ampacity * capacity_factor,
        transformer_kva=feeder.transformer_kva * capacity_factor,
        _order=None,
    )
