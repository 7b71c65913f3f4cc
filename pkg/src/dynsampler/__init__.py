"""Dynamic perfect sampling for discrete graphical models under update streams."""
from .engine import (
    BudgetExceeded,
    ResampleState,
    TraceStats,
    bootstrap_sample,
    compute_kappa,
    dynamic_sample,
    gen_resample,
    local_resample,
    run_update_stream,
)
from .factor_graph import GraphicalModel, UpdateRequest, apply_update, normalize, vbl, weight
from .oracle import conditional_marginal, exact_gibbs, tvd
from .rng import RngStream

__all__ = [
    "BudgetExceeded",
    "GraphicalModel",
    "ResampleState",
    "RngStream",
    "TraceStats",
    "UpdateRequest",
    "apply_update",
    "bootstrap_sample",
    "compute_kappa",
    "conditional_marginal",
    "dynamic_sample",
    "exact_gibbs",
    "gen_resample",
    "local_resample",
    "normalize",
    "run_update_stream",
    "tvd",
    "vbl",
    "weight",
]

__version__ = "0.1.0"
