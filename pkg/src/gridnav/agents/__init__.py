from .io import BadModelFile, KindMismatch, load_model, save_model
from .mlp import LAYER_SIZES, EmptyBatch, MlpParams, dqn_update, grid_normalizer, loss_and_grad, mlp_forward, td_targets
from .policy import (
    BadDistribution,
    EpsilonSchedule,
    argmax_action,
    epsilon_at,
    epsilon_greedy_probs,
    expected_value,
    select_action,
)
from .replay import InsufficientSamples, ReplayBuffer, TransitionBatch, buffer_push, buffer_sample
from .tabular import QTable, TdQuantities, qlearning_batch_update, qlearning_update, sarsa_update


def action_values(model, cfg, s):
    """The model's 8 action values at lattice state ``s``."""
    if isinstance(model, QTable):
        if model.d is None:
            model.bind(cfg)
        return model.row(s)
    return mlp_forward(model, grid_normalizer(cfg)(s))


def greedy_action(model, cfg, s):
    return argmax_action(action_values(model, cfg, s))


def state_value(table: QTable, s, policy_probs) -> float:
    return expected_value(table.row(s), policy_probs)
