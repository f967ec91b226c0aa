"""Difference-in-differences estimation with detrending and permutation inference."""

from pddid.errors import PdDidError
from pddid.experiments import ExperimentReport, ScenarioGrid, power_curve, run_grid
from pddid.glm import DesignMatrix, FitSummary, fit_logistic, solve_least_squares, tail_p_value
from pddid.panel import (
    DidEstimate,
    ModelSpec,
    ObservationRecord,
    PanelDataset,
    build_design,
    estimate_did,
    gamma_identity_check,
)
from pddid.permutation import (
    EmpiricalNull,
    PdDidResult,
    PermutationConfig,
    empirical_quantile,
    pd_did,
    permute_within_arms,
    rank_p_value,
)
from pddid.simulate import DgpConfig, ar1_path, correlated_effects, simulate_panel

__version__ = "0.1.0"
