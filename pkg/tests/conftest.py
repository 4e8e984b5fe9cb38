import numpy as np
import pytest

from lvmc.hem import BatterySpec, Tariff


@pytest.fixture
def spec():
    return BatterySpec.sized(6.5, 4.2)


@pytest.fixture
def tou():
    return Tariff.time_of_use()


@pytest.fixture
def day_trace():
    """A sunny weekday: evening-heavy demand, midday PV peaking at 4 kW."""
    t = np.arange(48) / 2.0
    demand = 0.4 + 0.8 * np.exp(-0.5 * ((t - 19.0) / 2.0) ** 2) + 0.3 * np.exp(-0.5 * ((t - 7.5) / 1.0) ** 2)
    pv = np.clip(4.0 * np.sin(np.pi * (t - 6.0) / 12.0), 0.0, None)
    return demand, pv


def toy_tariff(prices, feed_in=0.0):
    prices = np.asarray(prices, dtype=float)
    return Tariff(prices, feed_in, (0, prices.size))


def two_bus_feeder(z, source_pu=1.0, phases=(0,)):
    """Source bus and one load bus joined by a line with impedance ``z`` on each phase only."""
    from lvmc.powerflow import FeederModel

    return FeederModel(
        name="two-bus",
        bus_names=("source", "load"),
        from_bus=[0],
        to_bus=[1],
        z=np.eye(3) * z,
        ampacity=[100.0],
        length_m=[10.0],
        load_bus=[1] * len(phases),
        load_phase=list(phases),
        customer_ids=[f"c{i}" for i in range(len(phases))],
        head_ampacity=100.0,
        transformer_kva=100.0,
        source_pu=source_pu,
    )


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Record the PASS/FAIL line of an acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, ok, detail):
        lines[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(lines[number])

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
