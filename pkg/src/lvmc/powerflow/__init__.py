"""Radial unbalanced three-phase power flow."""

from lvmc.powerflow.feeder import V_BASE, FeederModel, four_wire_matrix, kron_reduce, scale_feeder
from lvmc.powerflow.fixtures import AUS1, UK, FeederParams, fixture, generate_fixture_feeder
from lvmc.powerflow.solver import (
    MAX_ITER,
    TOL_PU,
    PowerFlowSolution,
    TimeSeriesSolution,
    solve_batch,
    solve_snapshot,
    solve_timeseries,
    source_voltage,
)
