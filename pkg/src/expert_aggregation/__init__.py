"""Online aggregation of competing point forecasts with convex expert-aggregation strategies."""

from .core import ForecastPanel, Prediction, RegretLedger, StreamKey, predict, update_ledger
from .losses import (LossSpec, decompose_square_loss, excess_losses, expert_losses,
                     linearized_losses, loss, loss_subgradient)
from .oracles import best_compound, best_convex, best_expert, project_simplex
from .strategies import StrategyConfig, init, run
from .evaluation import pooled_and_grouped_rmse, regret_curve, rmse, run_stream, window_sweep
from .synthetic import SyntheticStreamSpec, generate_panels, generate_synthetic

__all__ = [
    "ForecastPanel", "Prediction", "RegretLedger", "StreamKey", "predict", "update_ledger",
    "LossSpec", "decompose_square_loss", "excess_losses", "expert_losses", "linearized_losses",
    "loss", "loss_subgradient", "best_compound", "best_convex", "best_expert", "project_simplex",
    "StrategyConfig", "init", "run", "pooled_and_grouped_rmse", "regret_curve", "rmse",
    "run_stream", "window_sweep", "SyntheticStreamSpec", "generate_panels", "generate_synthetic",
]
