"""Semantic entropy, unsupervised and oracle rewards, advantages, and the gate.

The unsupervised reward of an output is the empirical probability of its
meaning cluster, so pushing up high-reward outputs is the policy-gradient
face of minimizing semantic entropy.  The oracle reward is the supervised
baseline: 1 for a correct final answer, 0 for a wrong one, -0.5 when no
answer can be extracted.  Advantages standardize rewards within the group
(population std, floored); the dual entropy gate excludes groups whose
uncertainty is too low to be worth optimizing or too high to be reliable.

All cluster probabilities and reward sums stay exact rationals until the
single conversion to float inside the entropy and advantage formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .answers import canonicalize, extract_final_answer
from .clustering import ClusterPartition, EquivalenceJudge, RolloutGroup, cluster_group

__all__ = [
    "GateConfig",
    "AdvantageConfig",
    "OracleLabel",
    "RewardedGroup",
    "semantic_entropy",
    "empo_rewards",
    "grpo_rewards",
    "normalize_advantages",
    "apply_gate",
    "reward_group",
]

UNPARSEABLE_REWARD = -0.5


@dataclass(frozen=True)
class GateConfig:
    """Dual entropy thresholds, in nats (or fractions of ln G when normalized).

    A group is kept for optimization only when low < H' < high, with
    H' = H / ln(G) if ``normalized`` else H.
    """

    low: float = 0.05
    high: float = 0.90
    normalized: bool = True

    def __post_init__(self) -> None:
        if self.low < 0:
            raise ValueError("gate lower threshold must be >= 0")
        if not self.high > self.low:
            raise ValueError("gate upper threshold must exceed the lower one")


@dataclass(frozen=True)
class AdvantageConfig:
    """Group-normalization knobs.

    Zero-variance groups (population std below ``std_floor``) get all-zero
    advantages; ``clip_eps`` is carried here for the simulator's surrogate
    objective and does not touch raw advantages.
    """

    clip_eps: float = 0.2
    std_floor: float = 1e-6

    def __post_init__(self) -> None:
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be > 0")
        if self.std_floor <= 0:
            raise ValueError("std_floor must be > 0")


@dataclass(frozen=True)
class OracleLabel:
    """Golden answer for one question, held in canonical form."""

    question_id: str
    golden_answer: str

    def __post_init__(self) -> None:
        if not self.golden_answer:
            raise ValueError("golden answer must be non-empty")


@dataclass(frozen=True)
class RewardedGroup:
    """Per-output rewards, advantages, entropy and gate verdict for one group.

    Gated groups keep their computed entropy and rewards (the metrics need
    them) but carry all-zero advantages so they contribute no update.
    ``oracle_rewards`` is present exactly when a golden answer was supplied.
    """

    question_id: str
    entropy_nats: float
    rewards: tuple[Fraction, ...]
    advantages: tuple[float, ...]
    gated: bool
    cluster_of: tuple[int, ...]
    oracle_rewards: tuple[float, ...] | None = None

    @property
    def size(self) -> int:
        return len(self.rewards)

    @property
    def mean_reward(self) -> float:
        return float(sum(self.rewards) / len(self.rewards))

    @property
    def mean_oracle_reward(self) -> float | None:
        if self.oracle_rewards is None:
            return None
        return sum(self.oracle_rewards) / len(self.oracle_rewards)


def semantic_entropy(partition: ClusterPartition) -> float:
    """Shannon entropy over the meaning distribution, in nats.

    H = -sum_j p_j ln p_j with p_j the exact cluster probabilities; the lone
    float conversion happens per term.  Always within [0, ln G].
    """
    h = 0.0
    for p in partition.probabilities:
        pf = float(p)
        if pf > 0.0:
            h -= pf * math.log(pf)
    return max(h, 0.0)


def empo_rewards(partition: ClusterPartition) -> tuple[Fraction, ...]:
    """Reward each output with the exact probability of its meaning cluster."""
    probs = partition.probabilities
    owner = partition.cluster_of
    return tuple(probs[owner[i]] for i in range(partition.group_size))


def grpo_rewards(group: RolloutGroup, label: OracleLabel) -> tuple[float, ...]:
    """Rule-based oracle rewards: 1 correct, 0 wrong, -0.5 unparseable."""
    golden = canonicalize(label.golden_answer)
    out = []
    for text in group.outputs:
        ans = extract_final_answer(text)
        if not ans.parsed:
            out.append(UNPARSEABLE_REWARD)
        elif ans.canonical == golden:
            out.append(1.0)
        else:
            out.append(0.0)
    return tuple(out)


def normalize_advantages(
    rewards, cfg: AdvantageConfig = AdvantageConfig()
) -> tuple[float, ...]:
    """Standardize rewards within the group: (r - mean) / population std.

    Computed in exact rational arithmetic up to the square root.  When the
    population std falls below ``cfg.std_floor`` the group is treated as
    zero-variance and every advantage is 0.
    """
    exact = [r if isinstance(r, Fraction) else Fraction(r) for r in rewards]
    n = len(exact)
    if n == 0:
        raise ValueError("cannot normalize an empty reward vector")
    mean = sum(exact) / n
    variance = sum((r - mean) ** 2 for r in exact) / n
    std = math.sqrt(float(variance))
    if std < cfg.std_floor:
        return tuple(0.0 for _ in exact)
    return tuple(float(r - mean) / std for r in exact)


def apply_gate(entropy_nats: float, group_size: int, cfg: GateConfig) -> bool:
    """True when the group is excluded from optimization.

    Compares H (or H / ln G when normalized) against the open interval
    (low, high).  A group of one output has zero entropy by construction and
    its normalized value is taken as 0.
    """
    if cfg.normalized:
        log_g = math.log(group_size) if group_size > 1 else 0.0
        value = entropy_nats / log_g if log_g > 0.0 else 0.0
    else:
        value = entropy_nats
    return not (cfg.low < value < cfg.high)


def reward_group(
    group: RolloutGroup,
    judge: EquivalenceJudge,
    gate_cfg: GateConfig | None = GateConfig(),
    adv_cfg: AdvantageConfig = AdvantageConfig(),
    label: OracleLabel | None = None,
) -> RewardedGroup:
    """Run the whole per-group pipeline: cluster, entropy, rewards, gate.

    Advantages are computed from the unsupervised rewards and zeroed when the
    group is gated; a None gate config disables gating entirely.  Oracle
    rewards ride along whenever a label is supplied.  Judge failures
    propagate to the caller.
    """
    partition = cluster_group(group, judge)
    entropy = semantic_entropy(partition)
    rewards = empo_rewards(partition)
    oracle = grpo_rewards(group, label) if label is not None else None
    gated = apply_gate(entropy, group.size, gate_cfg) if gate_cfg is not None else False
    if gated:
        advantages = tuple(0.0 for _ in rewards)
    else:
        advantages = normalize_advantages(rewards, adv_cfg)
    return RewardedGroup(
        question_id=group.question_id,
        entropy_nats=entropy,
        rewards=rewards,
        advantages=advantages,
        gated=gated,
        cluster_of=partition.cluster_of,
        oracle_rewards=oracle,
    )
