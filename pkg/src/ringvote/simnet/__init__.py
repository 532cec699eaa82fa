from .core import BudgetExceeded, ConfigInvalid, SimConfig, Simulator, derive_rng
from .properties import PropertyReport, assert_properties
from .scenarios import RunResult, Scenario, Setup, build_setup, load_scenario, run_scenario

__all__ = [
    "BudgetExceeded",
    "ConfigInvalid",
    "SimConfig",
    "Simulator",
    "derive_rng",
    "PropertyReport",
    "assert_properties",
    "RunResult",
    "Scenario",
    "Setup",
    "build_setup",
    "load_scenario",
    "run_scenario",
]
