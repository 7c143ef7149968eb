from .figures import FIGURES, Budget, reproduce, write_csv
from .scenario import Scenario, ScenarioError, load_scenario, loads_scenario
from .simulate import (CrosspointSpec, ScenarioSpec, SimulationReport,
                       simulate, simulate_crosspoint, stream_seed)
from .cli import run_cli

__all__ = ["FIGURES", "Budget", "CrosspointSpec", "Scenario", "ScenarioError", "ScenarioSpec",
           "SimulationReport", "load_scenario", "loads_scenario", "reproduce", "run_cli",
           "simulate", "simulate_crosspoint", "stream_seed", "write_csv"]
