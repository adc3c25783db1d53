"""Bayesian position and orientation error bounds for RIS-aided far-field localization."""

from .fim_core import FACTOR_TABLE, assemble_bayesian_fim, build_context, data_fim
from .labels import LabeledMatrix, ParamLabel
from .localization import bounds, jacobian, location_bayesian_efim, speb_soeb
from .scenario import Scenario, desk_scenario, load_scenario, random_placement
from .validation import run_validation

__all__ = ["FACTOR_TABLE", "assemble_bayesian_fim", "build_context", "data_fim", "LabeledMatrix",
           "ParamLabel", "bounds", "jacobian", "location_bayesian_efim", "speb_soeb", "Scenario",
           "desk_scenario", "load_scenario", "random_placement", "run_validation"]
