"""Multiview PAC-Bayesian late fusion: hierarchical priors/posteriors over per-view stumps."""

from .bounds import BoundInputs, BoundReport, full_report
from .dataio import SynthConfig, load_multiview, save_multiview, synth_population
from .estimators import KlBudget, RiskProfile, kl_budget, risk_profile
from .fusion import FusionModel, TrainConfig, evaluate, load_model, save_model, train
from .hierarchy import (
    Categorical,
    HierarchicalDistribution,
    MultiviewExample,
    MultiviewSample,
    SparseVector,
    Stump,
    VoterPool,
)

__all__ = [
    "BoundInputs", "BoundReport", "Categorical", "FusionModel", "HierarchicalDistribution", "KlBudget",
    "MultiviewExample", "MultiviewSample", "RiskProfile", "SparseVector", "Stump", "SynthConfig",
    "TrainConfig", "VoterPool", "evaluate", "full_report", "kl_budget", "load_model", "load_multiview",
    "risk_profile", "save_model", "save_multiview", "synth_population", "train",
]
