"""Desk-scale policy-optimization simulator.

The policy is a table of per-question softmax logits over that question's
surface outcomes.  Each training step makes one shuffled pass over the bank:
sample a group of completions per question, render them as text, recover the
meaning structure through the extraction + clustering pipeline (never
bypassed), reward, and take clipped-surrogate gradient-ascent steps on the
question's logits.  Everything is seeded and single-threaded, so a config
plus seed pins the whole trace.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .banks import SyntheticQuestion
from .clustering import RolloutGroup, RuleBasedJudge, cluster_group
from .rewards import (
    AdvantageConfig,
    GateConfig,
    OracleLabel,
    RewardedGroup,
    apply_gate,
    empo_rewards,
    grpo_rewards,
    normalize_advantages,
    semantic_entropy,
)

__all__ = [
    "OBJECTIVE_EMPO",
    "OBJECTIVE_GRPO_ORACLE",
    "TrainConfig",
    "PolicyTable",
    "StepMetrics",
    "MetricsTrace",
    "sample_rollouts",
    "surrogate_objective",
    "surrogate_gradient",
    "empo_step",
    "train",
    "greedy_accuracy",
]

OBJECTIVE_EMPO = "empo"
OBJECTIVE_GRPO_ORACLE = "grpo-oracle"


@dataclass(frozen=True)
class TrainConfig:
    """Trainer hyperparameters; defaults match the standard experiment setup."""

    group_size: int = 8
    learning_rate: float = 0.5
    steps: int = 300
    inner_epochs: int = 1
    clip_eps: float = 0.2
    gate: GateConfig | None = field(default_factory=GateConfig)
    std_floor: float = 1e-6
    objective: str = OBJECTIVE_EMPO
    rng_seed: int = 0
    check_gate_noop: bool = False

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.inner_epochs < 1:
            raise ValueError("inner_epochs must be >= 1")
        if self.objective not in (OBJECTIVE_EMPO, OBJECTIVE_GRPO_ORACLE):
            raise ValueError(f"unknown objective {self.objective!r}")

    @property
    def advantage_config(self) -> AdvantageConfig:
        return AdvantageConfig(clip_eps=self.clip_eps, std_floor=self.std_floor)


class PolicyTable:
    """Per-question softmax logits over surface outcomes, temperature 1."""

    def __init__(self, logits: dict[str, np.ndarray]):
        self.logits = {qid: np.asarray(v, dtype=float).copy() for qid, v in logits.items()}

    @classmethod
    def from_bank(cls, bank: Iterable[SyntheticQuestion]) -> "PolicyTable":
        return cls({q.question_id: np.asarray(q.init_logits, dtype=float) for q in bank})

    def probs(self, question_id: str) -> np.ndarray:
        return _softmax(self.logits[question_id])

    def sample_indices(self, question_id: str, size: int, rng: np.random.Generator) -> np.ndarray:
        p = self.probs(question_id)
        return rng.choice(len(p), size=size, p=p / p.sum())

    def copy(self) -> "PolicyTable":
        return PolicyTable(self.logits)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for qid in self.logits:
                fh.write(json.dumps({"question_id": qid, "logits": list(self.logits[qid])}) + "\n")

    @classmethod
    def load(cls, path) -> "PolicyTable":
        logits = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                logits[str(rec["question_id"])] = np.asarray(rec["logits"], dtype=float)
        return cls(logits)


@dataclass(frozen=True)
class StepMetrics:
    step: int
    mean_entropy: float
    mean_reward: float
    accuracy: float | None
    frac_gated: float


@dataclass
class MetricsTrace:
    """Per-step running aggregates; row 0 is the pre-training snapshot."""

    rows: list[StepMetrics] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "mean_entropy", "mean_reward", "accuracy", "frac_gated"])
            for r in self.rows:
                acc = "" if r.accuracy is None else repr(r.accuracy)
                writer.writerow([r.step, repr(r.mean_entropy), repr(r.mean_reward), acc, repr(r.frac_gated)])

    @classmethod
    def from_csv(cls, path) -> "MetricsTrace":
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(
                    StepMetrics(
                        step=int(rec["step"]),
                        mean_entropy=float(rec["mean_entropy"]),
                        mean_reward=float(rec["mean_reward"]),
                        accuracy=float(rec["accuracy"]) if rec["accuracy"] else None,
                        frac_gated=float(rec["frac_gated"]),
                    )
                )
        return cls(rows=rows)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - math.log(np.exp(z).sum())


def sample_rollouts(
    policy: PolicyTable,
    question: SyntheticQuestion,
    group_size: int,
    rng: np.random.Generator,
) -> RolloutGroup:
    """Draw a group of completions i.i.d. from the question's softmax."""
    idx = policy.sample_indices(question.question_id, group_size, rng)
    return RolloutGroup(
        question_id=question.question_id,
        prompt=question.prompt,
        outputs=tuple(question.rollout_texts[i] for i in idx),
    )


def _sampled_indices(group: RolloutGroup, question: SyntheticQuestion) -> np.ndarray:
    """Recover flat surface indices from rendered completion texts."""
    return np.asarray([question.text_index[t] for t in group.outputs], dtype=int)


def surrogate_objective(
    logits: np.ndarray,
    sampled: np.ndarray,
    advantages: np.ndarray,
    old_logp_sampled: np.ndarray,
    clip_eps: float,
) -> float:
    """Clipped surrogate: mean_i min(ratio_i * A_i, clip(ratio_i) * A_i)."""
    logp = _log_softmax(logits)
    ratios = np.exp(logp[sampled] - old_logp_sampled)
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    return float(np.minimum(ratios * advantages, clipped * advantages).mean())


def surrogate_gradient(
    logits: np.ndarray,
    sampled: np.ndarray,
    advantages: np.ndarray,
    old_logp_sampled: np.ndarray,
    clip_eps: float,
) -> np.ndarray:
    """Analytic gradient of the clipped surrogate w.r.t. the logits.

    A sample contributes A_i * ratio_i * (e_{s_i} - softmax) unless the clip
    has flattened its branch of the min (positive advantage past 1+eps, or
    negative advantage below 1-eps).  On-policy (ratio 1) this reduces to the
    plain REINFORCE direction with group-normalized advantages.
    """
    logp = _log_softmax(logits)
    probs = np.exp(logp)
    ratios = np.exp(logp[sampled] - old_logp_sampled)
    active = np.where(advantages >= 0, ratios <= 1.0 + clip_eps, ratios >= 1.0 - clip_eps)
    coef = np.where(active, advantages * ratios, 0.0) / len(sampled)
    grad = np.zeros_like(logits)
    np.add.at(grad, sampled, coef)
    grad -= coef.sum() * probs
    return grad


def empo_step(
    policy: PolicyTable,
    question: SyntheticQuestion,
    sampled: np.ndarray,
    rewarded: RewardedGroup,
    cfg: TrainConfig,
) -> None:
    """Ascend the clipped surrogate on one question's logits, in place.

    Gated groups leave the logits untouched, bit for bit.  The pre-update
    logits are snapshotted so inner epochs beyond the first see real
    probability ratios.
    """
    if rewarded.gated:
        return
    theta = policy.logits[question.question_id]
    old_logp_sampled = _log_softmax(theta)[sampled].copy()
    advantages = np.asarray(rewarded.advantages, dtype=float)
    for _ in range(cfg.inner_epochs):
        grad = surrogate_gradient(theta, sampled, advantages, old_logp_sampled, cfg.clip_eps)
        theta = theta + cfg.learning_rate * grad
    policy.logits[question.question_id] = theta


def _reward_for_objective(
    group: RolloutGroup,
    question: SyntheticQuestion,
    judge: RuleBasedJudge,
    cfg: TrainConfig,
) -> RewardedGroup:
    partition = cluster_group(group, judge)
    entropy = semantic_entropy(partition)
    if cfg.objective == OBJECTIVE_GRPO_ORACLE:
        label = OracleLabel(question.question_id, question.meanings[question.correct_meaning])
        oracle = grpo_rewards(group, label)
        return RewardedGroup(
            question_id=group.question_id,
            entropy_nats=entropy,
            rewards=empo_rewards(partition),
            advantages=normalize_advantages(oracle, cfg.advantage_config),
            gated=False,
            cluster_of=partition.cluster_of,
            oracle_rewards=oracle,
        )
    rewards = empo_rewards(partition)
    gated = apply_gate(entropy, group.size, cfg.gate) if cfg.gate is not None else False
    advantages = (
        tuple(0.0 for _ in rewards)
        if gated
        else normalize_advantages(rewards, cfg.advantage_config)
    )
    return RewardedGroup(
        question_id=group.question_id,
        entropy_nats=entropy,
        rewards=rewards,
        advantages=advantages,
        gated=gated,
        cluster_of=partition.cluster_of,
    )


def _objective_mean_reward(rewarded: RewardedGroup, cfg: TrainConfig) -> float:
    if cfg.objective == OBJECTIVE_GRPO_ORACLE:
        return rewarded.mean_oracle_reward
    return rewarded.mean_reward


def train(
    bank: list[SyntheticQuestion],
    cfg: TrainConfig,
) -> tuple[PolicyTable, MetricsTrace]:
    """Train a tabular policy on the bank; returns final policy and trace.

    Row 0 of the trace is a no-update snapshot of the initial policy; each
    later row aggregates one shuffled full pass over the bank.  The oracle
    objective requires a fully labeled bank and runs with the gate disabled.
    """
    if not bank:
        raise ValueError("empty bank")
    if cfg.objective == OBJECTIVE_GRPO_ORACLE and any(q.correct_meaning is None for q in bank):
        raise ValueError("oracle objective needs correct_meaning on every question")
    rng = np.random.default_rng(cfg.rng_seed)
    policy = PolicyTable.from_bank(bank)
    judge = RuleBasedJudge()
    trace = MetricsTrace()

    def snapshot_row(step: int) -> StepMetrics:
        entropies, mean_rewards, gated_flags = [], [], []
        for question in bank:
            group = sample_rollouts(policy, question, cfg.group_size, rng)
            rewarded = _reward_for_objective(group, question, judge, cfg)
            entropies.append(rewarded.entropy_nats)
            mean_rewards.append(_objective_mean_reward(rewarded, cfg))
            gated_flags.append(rewarded.gated)
        return StepMetrics(
            step=step,
            mean_entropy=float(np.mean(entropies)),
            mean_reward=float(np.mean(mean_rewards)),
            accuracy=greedy_accuracy(policy, bank),
            frac_gated=float(np.mean(gated_flags)),
        )

    trace.rows.append(snapshot_row(0))
    for step in range(1, cfg.steps + 1):
        entropies, mean_rewards, gated_flags = [], [], []
        for qi in rng.permutation(len(bank)):
            question = bank[qi]
            group = sample_rollouts(policy, question, cfg.group_size, rng)
            rewarded = _reward_for_objective(group, question, judge, cfg)
            sampled = _sampled_indices(group, question)
            if rewarded.gated and cfg.check_gate_noop:
                before = policy.logits[question.question_id].copy()
                empo_step(policy, question, sampled, rewarded, cfg)
                after = policy.logits[question.question_id]
                if not (before.tobytes() == after.tobytes()):
                    raise AssertionError(f"gated update touched logits of {question.question_id}")
            else:
                empo_step(policy, question, sampled, rewarded, cfg)
            entropies.append(rewarded.entropy_nats)
            mean_rewards.append(_objective_mean_reward(rewarded, cfg))
            gated_flags.append(rewarded.gated)
        trace.rows.append(
            StepMetrics(
                step=step,
                mean_entropy=float(np.mean(entropies)),
                mean_reward=float(np.mean(mean_rewards)),
                accuracy=greedy_accuracy(policy, bank),
                frac_gated=float(np.mean(gated_flags)),
            )
        )
    return policy, trace


def greedy_accuracy(policy: PolicyTable, bank: list[SyntheticQuestion]) -> float | None:
    """Fraction of questions whose argmax surface carries the correct meaning.

    Ties break toward the lowest surface index; None when the bank carries no
    labels at all.
    """
    labeled = [q for q in bank if q.correct_meaning is not None]
    if not labeled:
        return None
    hits = 0
    for q in labeled:
        top = int(np.argmax(policy.logits[q.question_id]))
        hits += q.surface_meanings[top] == q.correct_meaning
    return hits / len(labeled)
