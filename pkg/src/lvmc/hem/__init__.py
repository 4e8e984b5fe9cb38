from lvmc.hem.battery import (
    BATTERY_TABLE,
    BatterySpec,
    DispatchSchedule,
    Tariff,
    battery_for_pv,
    build_schedule,
    grid_power,
    idle_schedule,
    inverter_power,
    schedule_residuals,
    stage_cost,
    transition,
)
from lvmc.hem.dp import solve_dp, solve_year

__all__ = [
    "BATTERY_TABLE",
    "BatterySpec",
    "DispatchSchedule",
    "Tariff",
    "battery_for_pv",
    "build_schedule",
    "grid_power",
    "idle_schedule",
    "inverter_power",
    "schedule_residuals",
    "solve_dp",
    "solve_year",
    "stage_cost",
    "transition",
]
