"""Conditional Poisson / Negative Binomial models for hourly count series.

Grouped structural model selection picks seasonal, growth and lag covariates;
forecasts are simulated with hour-of-week damping bounds derived from
tail-variability outlier limits.
"""

__version__ = "0.1.0"

from .bounds import DampingBounds, TailParams, outlier_bounds, tail_variability, time_varying_bounds, tukey_bounds
from .calendar import CalendarFields, calendar_fields, hour_of_week_index
from .design import DesignMatrix, FeatureConfig, assemble_design
from .glm import FamilySpec, FittedModel, fit_glm, information_criteria, log_likelihood, predict_mean, sample_response
from .metrics import EvaluationReport, evaluate, hour_of_week_profile, periodic_averages
from .select import GroupSpec, SelectionDiagram, SelectionTrace, optimal_merge, run_diagram, scenario
from .series import CountSeries
from .simulate import SimulationConfig, SimulatedPath, simulate_ensemble, simulate_path

__all__ = [
    "CalendarFields", "CountSeries", "DampingBounds", "DesignMatrix", "EvaluationReport",
    "FamilySpec", "FeatureConfig", "FittedModel", "GroupSpec", "SelectionDiagram",
    "SelectionTrace", "SimulatedPath", "SimulationConfig", "TailParams",
    "assemble_design", "calendar_fields", "evaluate", "fit_glm", "hour_of_week_index",
    "hour_of_week_profile", "information_criteria", "log_likelihood", "optimal_merge",
    "outlier_bounds", "periodic_averages", "predict_mean", "run_diagram", "sample_response",
    "scenario", "simulate_ensemble", "simulate_path", "tail_variability", "time_varying_bounds",
    "tukey_bounds",
]
