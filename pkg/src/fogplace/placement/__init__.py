"""Capacitated facility-location placement: instances, exact and heuristic solvers."""
from .exact import solve_exact
from .flow import transport
from .heuristic import solve, solve_heuristic
from .model import (HEURISTIC, INFEASIBLE, OPTIMAL, Demand, NodeState, PlacementInstance, PlacementSolution,
                    VerifyReport, build_instance, objective, verify)

__all__ = [
    "solve", "solve_exact", "solve_heuristic", "transport", "build_instance", "objective", "verify",
    "Demand", "NodeState", "PlacementInstance", "PlacementSolution", "VerifyReport",
    "OPTIMAL", "HEURISTIC", "INFEASIBLE",
]
