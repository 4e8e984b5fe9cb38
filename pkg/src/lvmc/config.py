"""Experiment configuration: one JSON file, validated before any computation.

Example::

    {
      "seed": 7,
      "traces": "corpus.csv",          # optional; a fixture corpus is generated if absent
      "pool": "out/synth",             # optional; directory written by ``lvmc synth``
      "feeder": "AUS2",                # fixture name or path to a feeder JSON
      "mc": {"runs": 100, "pv_levels": [0, 10, ..., 100], "battery_levels": [0, 50, 100],
             "scheduler": "pfa", "days": 365},
      "tariff": {"buy_price": [...48 values...], "feed_in": 0.08, "peak_slots": [28, 40]},
      "battery_table": [[4.5, 6.5, 4.2], [6.5, 9.8, 5.0], [1e9, 14.0, 5.0]],
      "synthesis": {"n_states": 40, "concentration": 1.0, "restarts": 10,
                    "pool_size": 3000, "days": 365},
      "pfa": {"policy": "policy.json", "train_customers": 150, "epochs": 300}
    }

All randomness derives from ``seed`` (it overrides ``mc.seed``).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from lvmc import SLOTS_PER_DAY
from lvmc.errors import InvalidInputError
from lvmc.hem.battery import BATTERY_TABLE, Tariff
from lvmc.mc import McConfig

_TOP_KEYS = {"seed", "traces", "pool", "feeder", "mc", "tariff", "battery_table", "synthesis", "pfa", "corpus"}


@dataclass
class SynthesisConfig:
    n_states: int = 40
    concentration: float = 1.0
    restarts: int = 10
    pool_size: int = 3000
    days: int = 365

    def validate(self):
        _int_at_least("synthesis.n_states", self.n_states, 1)
        _int_at_least("synthesis.restarts", self.restarts, 1)
        _int_at_least("synthesis.pool_size", self.pool_size, 1)
        _int_at_least("synthesis.days", self.days, 1)
        if not self.concentration > 0:
            raise InvalidInputError(f"synthesis.concentration: must be positive, got {self.concentration}")


@dataclass
class PfaConfig:
    policy: str | None = None
    train_customers: int = 150
    epochs: int = 300
    hidden: int = 32

    def validate(self):
        _int_at_least("pfa.train_customers", self.train_customers, 1)
        _int_at_least("pfa.epochs", self.epochs, 1)
        _int_at_least("pfa.hidden", self.hidden, 1)


@dataclass
class CorpusConfig:
    """Fixture corpus used when no trace file is given."""

    customers: int = 150
    days: int = 365

    def validate(self):
        _int_at_least("corpus.customers", self.customers, 2)
        _int_at_least("corpus.days", self.days, 1)


@dataclass
class ExperimentConfig:
    seed: int = 0
    traces: str | None = None
    pool: str | None = None
    feeder: str = "AUS2"
    mc: McConfig = field(default_factory=McConfig)
    tariff: Tariff = field(default_factory=Tariff.time_of_use)
    battery_table: tuple = BATTERY_TABLE
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    pfa: PfaConfig = field(default_factory=PfaConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    base_dir: str = "."

    def path(self, p):
        return p if p is None or os.path.isabs(p) else os.path.join(self.base_dir, p)

    def validate(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidInputError(f"seed: must be a non-negative integer, got {self.seed!r}")
        self.mc.validate()
        self.synthesis.validate()
        self.pfa.validate()
        self.corpus.validate()
        if self.traces is not None and not os.path.isfile(self.path(self.traces)):
            raise InvalidInputError(f"traces: file not found: {self.traces}")
        if self.pool is not None and not os.path.isdir(self.path(self.pool)):
            raise InvalidInputError(f"pool: directory not found: {self.pool}")
        if self.feeder.lower().endswith(".json") and not os.path.isfile(self.path(self.feeder)):
            raise InvalidInputError(f"feeder: file not found: {self.feeder}")
        if self.pfa.policy is not None and not os.path.isfile(self.path(self.pfa.policy)):
            raise InvalidInputError(f"pfa.policy: file not found: {self.pfa.policy}")
        if self.tariff.n_slots != SLOTS_PER_DAY:
            raise InvalidInputError(f"tariff: buy_price needs {SLOTS_PER_DAY} half-hourly values, got {self.tariff.n_slots}")
        prev = 0.0
        for row in self.battery_table:
            if len(row) != 3 or any(not float(v) > 0 for v in row):
                raise InvalidInputError(f"battery_table: rows must be three positive numbers, got {row}")
            if row[0] <= prev:
                raise InvalidInputError("battery_table: PV upper bounds must increase")
            prev = row[0]
        return self

    @classmethod
    def from_dict(cls, d, base_dir="."):
        if not isinstance(d, dict):
            raise InvalidInputError("config: top level must be a JSON object")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise InvalidInputError(f"config: unknown key(s) {sorted(unknown)}")
        seed = d.get("seed", 0)
        mc = dict(d.get("mc", {}))
        mc["seed"] = seed
        try:
            tariff = Tariff.from_dict(d["tariff"]) if "tariff" in d else Tariff.time_of_use()
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"tariff: {exc}") from None
        cfg = cls(
            seed=seed,
            traces=d.get("traces"),
            pool=d.get("pool"),
            feeder=str(d.get("feeder", "AUS2")),
            mc=_build(McConfig, mc, "mc"),
            tariff=tariff,
            battery_table=tuple(tuple(float(v) for v in r) for r in d.get("battery_table", BATTERY_TABLE)),
            synthesis=_build(SynthesisConfig, d.get("synthesis", {}), "synthesis"),
            pfa=_build(PfaConfig, d.get("pfa", {}), "pfa"),
            corpus=_build(CorpusConfig, d.get("corpus", {}), "corpus"),
            base_dir=base_dir,
        )
        cfg.mc.feeder = cfg.feeder
        return cfg.validate()

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except FileNotFoundError:
            raise InvalidInputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))


def _build(cls, d, section):
    if not isinstance(d, dict):
        raise InvalidInputError(f"{section}: must be a JSON object")
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise InvalidInputError(f"{section}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**d)
    except InvalidInputError as exc:
        msg = str(exc)
        raise InvalidInputError(msg if msg.startswith(section) else f"{section}.{msg}") from None
    except TypeError as exc:
        raise InvalidInputError(f"{section}: {exc}") from None


def _int_at_least(name, value, lo):
    if not isinstance(value, int) or isinstance(value, bool) or value < lo:
        raise InvalidInputError(f"{name}: must be an integer >= {lo}, got {value!r}")
