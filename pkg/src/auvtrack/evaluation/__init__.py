from .baseline import CtdeConfig, CtdeSac, sac_ctde_baseline
from .markov_games import (
    MarkovGame,
    gap_value_sensitivity,
    policy_value_gap,
    q_values,
    random_game,
    random_policies,
    solve_values,
)
from .metrics import (
    CSV_COLUMNS,
    DANGER_RADIUS,
    MetricsReport,
    compute_metrics,
    episode_metric_return,
    normalized_reward,
    recompute_rewards,
)
