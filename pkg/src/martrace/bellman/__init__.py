"""Configuration space, supersolution candidates and their sampled certification."""

from .candidates import SupersolutionCandidate, lp_candidate, potential_candidate, trace_candidate
from .certify import (CertificationReport, ConfigurationError, SearchReport, certify_main_inequality,
                      check_boundary, check_estimate_from_above, default_ladders,
                      discrepancy_lower_bound_near_extremal, make_candidate, search_constants)
from .config import ConfigBatch, ConfigPoint, DomainError, discrepancy, discrepancy_batch
from .process import ProcessTrace, TraceBoundReport, supermartingale_trace, trace_bound_from_supersolution
from .sampler import STRATA, Parametrization, RankOneLibrary, Sampler, pattern_search, rank_one_library

__all__ = [
    "CertificationReport", "ConfigBatch", "ConfigPoint", "ConfigurationError", "DomainError",
    "Parametrization", "ProcessTrace", "RankOneLibrary", "STRATA", "Sampler", "SearchReport",
    "SupersolutionCandidate", "TraceBoundReport", "certify_main_inequality", "check_boundary",
    "check_estimate_from_above", "default_ladders", "discrepancy", "discrepancy_batch",
    "discrepancy_lower_bound_near_extremal", "lp_candidate", "make_candidate", "pattern_search",
    "potential_candidate", "rank_one_library", "search_constants", "supermartingale_trace",
    "trace_bound_from_supersolution", "trace_candidate",
]
