"""Rank tests of "no regression" in linear models with autoregressive errors.

The autoregression enters only as a nuisance: the test is built from the
autoregression rank scores of the lagged design and needs no estimate of
the AR coefficients, the intercept or the innovation law.
"""

from __future__ import annotations

from arrank.arscores import SCORE_KINDS, ScoreFunction, ScoreVector, generate_scores
from arrank.asymptotics import (
    InnovationDistribution,
    PowerPrediction,
    chi2_quantile,
    chi2_sf,
    gamma_jf,
    noncentrality,
    predict_power,
    predicted_power,
)
from arrank.cli_io import load_config, main, parse_cli, read_table, write_report
from arrank.errors import (
    ArrankError,
    BreakpointCapError,
    CollinearityError,
    ConfigError,
    DataError,
    DomainError,
    IterationLimitError,
    SingularDesignError,
    StudyAbortedError,
    TableParseError,
)
from arrank.model_data import (
    AutoregressionDesign,
    Dataset,
    RegressionDesign,
    build_ar_design,
    build_regression_design,
    design_diagnostics,
    load_dataset,
)
from arrank.qr_lp import (
    QuantileFit,
    RankScorePath,
    RankScoreVector,
    solve_quantile_fit,
    solve_rank_score_grid,
    solve_rank_score_path,
    solve_rank_scores_at,
)
from arrank.simulation import SimulationConfig, StudyReport, gen_dataset, run_study
from arrank.test_engine import TestReport, compute_statistic, project_design, run_test

__all__ = [
    "SCORE_KINDS", "ScoreFunction", "ScoreVector", "generate_scores",
    "InnovationDistribution", "PowerPrediction", "chi2_quantile", "chi2_sf", "gamma_jf",
    "noncentrality", "predict_power", "predicted_power",
    "load_config", "main", "parse_cli", "read_table", "write_report",
    "ArrankError", "BreakpointCapError", "CollinearityError", "ConfigError", "DataError",
    "DomainError", "IterationLimitError", "SingularDesignError", "StudyAbortedError",
    "TableParseError",
    "AutoregressionDesign", "Dataset", "RegressionDesign", "build_ar_design",
    "build_regression_design", "design_diagnostics", "load_dataset",
    "QuantileFit", "RankScorePath", "RankScoreVector", "solve_quantile_fit",
    "solve_rank_score_grid", "solve_rank_score_path", "solve_rank_scores_at",
    "SimulationConfig", "StudyReport", "gen_dataset", "run_study",
    "TestReport", "compute_statistic", "project_design", "run_test",
]
