"""Meaning-level clustering, semantic-entropy rewards, and a tabular trainer."""

from .answers import ExtractedAnswer, are_equivalent, canonicalize, extract_final_answer
from .clustering import (
    ClusterPartition,
    EquivalenceJudge,
    ExternalJudge,
    JudgeError,
    RolloutGroup,
    RuleBasedJudge,
    cluster_group,
    partition_signature,
)
from .rewards import (
    AdvantageConfig,
    GateConfig,
    OracleLabel,
    RewardedGroup,
    apply_gate,
    empo_rewards,
    grpo_rewards,
    normalize_advantages,
    reward_group,
    semantic_entropy,
)
from .banks import SyntheticQuestion, generate_bank, load_bank, render_output, save_bank
from .simulator import (
    MetricsTrace,
    PolicyTable,
    TrainConfig,
    empo_step,
    greedy_accuracy,
    sample_rollouts,
    train,
)
from .metrics import (
    CorrelationReport,
    SampleOutcomeSet,
    entropy_accuracy_correlation,
    pass_at_k,
    pass_at_k_curve,
    smooth_ema,
)

__version__ = "0.1.0"
