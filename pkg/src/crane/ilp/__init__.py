from crane.ilp.exact import ExactLimits, LimitsExceededError, enumerate_plans, solve_exact_tiny
from crane.ilp.lpformat import ParsedLP, export_text, parse_text
from crane.ilp.model import ILPModel, ModelError, build_model, constraint_counts, variable_counts
from crane.ilp.validate import TraceMismatchError, Violation, families, validate, violation_report

__all__ = [
    "ExactLimits", "LimitsExceededError", "enumerate_plans", "solve_exact_tiny",
    "ParsedLP", "export_text", "parse_text",
    "ILPModel", "ModelError", "build_model", "constraint_counts", "variable_counts",
    "TraceMismatchError", "Violation", "families", "validate", "violation_report",
]
