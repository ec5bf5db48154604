from .model import GdtConfig, GdtModel, HimEncoder, action_regression_loss
from .trainer import (
    AgentTrajectories,
    GdtPolicy,
    GdtTrainResult,
    maigdt_rollout,
    sample_windows,
    train,
    train_step,
)
