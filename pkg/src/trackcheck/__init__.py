"""Compositional runtime verification of track-based traffic scenarios."""

from .compositional import (
    AnalysisReport,
    check_compatibility,
    compose_components,
    run_compositional,
    run_monolithic,
)
from .engine import AnalysisContext, Diagnosis, ModelState, TransP
from .mesh import Topology, build_mesh, cached_mesh
from .planner import FlightPlan, PlanBatch, generate_flight_plans, reroute
from .scenario import ScenarioConfig, parse_scenario, run_experiment
from .statespace import Verdict, generate_state_space

__all__ = [
    "AnalysisContext",
    "AnalysisReport",
    "Diagnosis",
    "FlightPlan",
    "ModelState",
    "PlanBatch",
    "ScenarioConfig",
    "Topology",
    "TransP",
    "Verdict",
    "build_mesh",
    "cached_mesh",
    "check_compatibility",
    "compose_components",
    "generate_flight_plans",
    "generate_state_space",
    "parse_scenario",
    "reroute",
    "run_compositional",
    "run_experiment",
    "run_monolithic",
]

__version__ = "0.1.0"
