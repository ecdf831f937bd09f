"""Power-grid application: case parsing, day series and the scheduling model."""
from importlib import resources

from .builder import (BetaBounds, PowerBuildParams, PowerLayout, beta_bounds_power,
                      build_omega_power, build_power_instance, demand, forecast,
                      power_solution_report)
from .case import GridCase, parse_case
from .timeseries import TimeSeries, load_timeseries


def data_path(name):
    """Path of a bundled fixture file such as ``"case5.json"`` or ``"day24.csv"``."""
    return resources.files(__package__).joinpath("data", name)


__all__ = ["BetaBounds", "GridCase", "PowerBuildParams", "PowerLayout", "TimeSeries",
           "beta_bounds_power", "build_omega_power", "build_power_instance", "data_path",
           "demand", "forecast", "load_timeseries", "parse_case", "power_solution_report"]
