"""Exact stationary distributions of level-skip-free, phase-unidirectional QBDs."""

from .clearing import (ClearingParams, busy_period_transform, clearing_limiting_distribution,
                       derive, expected_clearing_busy_period, occupancy_time, reach_probability)
from .core import (BaseTerms, Case, CaseTag, SolutionTerm, StationaryDistribution,
                   classify_case, compute_base_terms, evaluate, solve)
from .errors import (CapError, DomainError, NonConvergence, ResidualTooLarge, SingularMatrix,
                     SingularSystem, SpecError, StateCapExceeded, UnsupportedCase,
                     ValidationError)
from .model import (BoundarySpec, ChainSpec, PhaseJump, PhaseRates, load_spec, parse_spec,
                    serialize_spec, validate_spec)

__version__ = "0.1.0"

__all__ = [
    "BaseTerms", "BoundarySpec", "CapError", "Case", "CaseTag", "ChainSpec", "ClearingParams",
    "DomainError", "NonConvergence", "PhaseJump", "PhaseRates", "ResidualTooLarge",
    "SingularMatrix", "SingularSystem", "SolutionTerm", "SpecError", "StateCapExceeded",
    "StationaryDistribution", "UnsupportedCase", "ValidationError", "busy_period_transform",
    "classify_case", "clearing_limiting_distribution", "compute_base_terms", "derive",
    "evaluate", "expected_clearing_busy_period", "load_spec", "occupancy_time", "parse_spec",
    "reach_probability", "serialize_spec", "solve", "validate_spec",
]
