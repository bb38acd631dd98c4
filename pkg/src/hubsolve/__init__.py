"""Exact hub location solver: aggregated-flow model, cut separation, Branch & Solve."""

from .driver import SolveConfig, SolveReport, Status, Variant, solve
from .instance import (Instance, InstanceError, ModelKind, ParseError, Policy, SetupMode,
                       cut_demand, derive_setup_costs, parse_ap, parse_cab, read_instance,
                       write_instance)
from .model import CutFamily, CutRecord, DesignSolution, FlowSolution, build_model, evaluate
from .subproblem import flow_lp, r_flow

__all__ = [
    "Instance", "InstanceError", "ParseError", "Policy", "ModelKind", "SetupMode",
    "parse_cab", "parse_ap", "read_instance", "write_instance", "derive_setup_costs",
    "cut_demand", "DesignSolution", "FlowSolution", "CutRecord", "CutFamily", "build_model",
    "evaluate", "r_flow", "flow_lp", "SolveConfig", "SolveReport", "Status", "Variant", "solve",
]
__version__ = "0.1.0"
