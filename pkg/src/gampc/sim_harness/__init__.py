"""Closed-loop simulation: scenario files, the receding-horizon loop, outputs and CLI."""
from .config import ScenarioConfig, ScenarioError, load_scenario, parse_scenario
from .loop import OffMapError, PlannerContext, SimLog, mpc_step, run_scenario
from .outputs import emit_outputs, summarize

__all__ = ["OffMapError", "PlannerContext", "ScenarioConfig", "ScenarioError", "SimLog", "emit_outputs",
           "load_scenario", "mpc_step", "parse_scenario", "run_scenario", "summarize"]
