"""Gaussian blurring mean-shift clustering in hyperbolic space (Poincare ball)."""

from .clustering import ClusterResult, RunConfig, StopReason, run_gbms, run_hypegbms
from .data import Dataset, load_csv, make_hierarchical, save_csv
from .errors import ConvergenceFailure, InvalidArgument, InvalidData, NumericDegenerate, ParseError
from .geometry import (
    dist,
    exp_map,
    frechet_mean,
    log_map,
    mobius_add,
    mobius_scalar_mul,
    mobius_weighted_mean,
    project_to_ball,
)
from .metrics import ari, nmi

__all__ = [
    "ClusterResult", "RunConfig", "StopReason", "run_gbms", "run_hypegbms",
    "Dataset", "load_csv", "make_hierarchical", "save_csv",
    "ConvergenceFailure", "InvalidArgument", "InvalidData", "NumericDegenerate", "ParseError",
    "dist", "exp_map", "frechet_mean", "log_map", "mobius_add", "mobius_scalar_mul",
    "mobius_weighted_mean", "project_to_ball", "ari", "nmi",
]
