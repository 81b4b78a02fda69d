"""Model predictive path planning solved by a real-coded genetic algorithm.

Modules: ``road_map`` (Hermite-spline centerline), ``vehicle_dynamics``
(single-track model with Pacejka tyres), ``obstacles`` (ellipse distance),
``cost_constraints`` (horizon objective), ``ga_solver`` (the optimizer) and
``sim_harness`` (closed-loop runner and CLI).
"""
from .cost_constraints import Bounds, HorizonSpec, MpcProblem, Weights, total_cost
from .ga_solver import Candidate, GaConfig, GaSolution, decode, solve
from .obstacles import EllipsePose, Obstacle, relative_distance
from .road_map import RoadMap, fit_waypoints, load_map_file
from .vehicle_dynamics import ControlInput, VehicleParams, VehicleState

__all__ = [
    "Bounds", "Candidate", "ControlInput", "EllipsePose", "GaConfig", "GaSolution", "HorizonSpec",
    "MpcProblem", "Obstacle", "RoadMap", "VehicleParams", "VehicleState", "Weights", "decode",
    "fit_waypoints", "load_map_file", "relative_distance", "solve", "total_cost",
]
