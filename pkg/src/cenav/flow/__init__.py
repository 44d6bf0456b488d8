from .model import (
    ACT_DIM,
    EMBED_DIM,
    FLOW_HIDDEN,
    FLOW_LAYERS,
    CouplingLayer,
    FlowModel,
    RegressorBaseline,
    StateEncoder,
)
from .train import (
    ExpertTrainConfig,
    RegressorTrainConfig,
    action_stats,
    train_expert,
    train_regressor,
)

__all__ = [
    "ACT_DIM", "EMBED_DIM", "FLOW_HIDDEN", "FLOW_LAYERS", "CouplingLayer",
    "FlowModel", "RegressorBaseline", "StateEncoder", "ExpertTrainConfig",
    "RegressorTrainConfig", "action_stats", "train_expert", "train_regressor",
]
