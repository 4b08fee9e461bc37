"""Predictive linear-Gaussian modeling toolkit.

Filtering and prediction for scalar-observation stochastic processes whose
state is the joint Gaussian of the next n observations; an exact closed-form
bridge from classical linear dynamical systems; moment-based parameter
estimation from trace corpora; random test-system generation; and a
reproducible, config-driven experiment harness with a CLI.

Hot filtering loops run on a compiled extension when available and on a
pure-NumPy fallback otherwise (``plg.kernel_backend`` names the active one;
``plg bench`` compares them).
"""

from . import convert, experiment, fileio, gaussian, lds, learn, model, sysgen
from ._kernels import BACKEND as kernel_backend
from .errors import (AsymmetryDetected, DegenerateVariance,
                     DimensionMismatch, NegativeSigma2, NoSolution, PlgError,
                     SingularCovariance)
from .experiment import ExperimentConfig, ExperimentReport, param_l1_error
from .gaussian import GaussianDist
from .lds import KalmanState, LdsParams
from .learn import CeDiagnostics, TraceSet, ce_learn
from .model import PlgParams, PlgState
from .sysgen import GenConfig

__version__ = "0.1.0"

__all__ = [
    "AsymmetryDetected", "CeDiagnostics", "DegenerateVariance",
    "DimensionMismatch", "ExperimentConfig", "ExperimentReport",
    "GaussianDist", "GenConfig", "KalmanState", "LdsParams",
    "NegativeSigma2", "NoSolution", "PlgError", "PlgParams", "PlgState",
    "SingularCovariance", "TraceSet", "ce_learn", "convert", "experiment",
    "fileio", "gaussian", "kernel_backend", "lds", "learn", "model",
    "param_l1_error", "sysgen",
]
