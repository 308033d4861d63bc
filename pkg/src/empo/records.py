"""Line-delimited record schemas for the batch reward pipeline.

Input: one JSON object per line with a question's id, prompt, sampled
completions, and optionally a golden answer.  Output: one JSON object per
(question, sample) with cluster assignment, reward, advantage, group entropy
and gate verdict; the oracle reward appears exactly when a golden answer was
supplied.  Serialization is field-lossless: a group's records reconstruct
the rewarded group, including the exact rational rewards (recovered from the
cluster multiset).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .rewards import RewardedGroup

__all__ = [
    "BatchRecord",
    "RewardRecord",
    "RecordFormatError",
    "parse_batch_record",
    "reward_records_for_group",
    "serialize_reward_record",
    "parse_reward_record",
    "group_from_records",
]


class RecordFormatError(ValueError):
    """A record line does not satisfy the batch schema."""


@dataclass(frozen=True)
class BatchRecord:
    """One question with its externally sampled completions."""

    question_id: str
    prompt: str
    samples: tuple[str, ...]
    golden_answer: str | None = None


@dataclass(frozen=True)
class RewardRecord:
    """Reward pipeline output for a single sample of a group."""

    question_id: str
    sample_index: int
    cluster_id: int
    reward: float
    advantage: float
    entropy_nats: float
    gated: bool
    reward_oracle: float | None = None


def parse_batch_record(line: str) -> BatchRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise RecordFormatError("record must be a JSON object")
    try:
        question_id = obj["question_id"]
        prompt = obj["prompt"]
        samples = obj["samples"]
    except KeyError as exc:
        raise RecordFormatError(f"missing field {exc.args[0]!r}") from exc
    if not isinstance(question_id, str) or not isinstance(prompt, str):
        raise RecordFormatError("question_id and prompt must be strings")
    if (
        not isinstance(samples, list)
        or not samples
        or not all(isinstance(s, str) for s in samples)
    ):
        raise RecordFormatError("samples must be a non-empty array of strings")
    golden = obj.get("golden_answer")
    if golden is not None and (not isinstance(golden, str) or not golden):
        raise RecordFormatError("golden_answer must be a non-empty string when present")
    return BatchRecord(
        question_id=question_id,
        prompt=prompt,
        samples=tuple(samples),
        golden_answer=golden,
    )


def reward_records_for_group(rewarded: RewardedGroup) -> list[RewardRecord]:
    records = []
    for i in range(rewarded.size):
        records.append(
            RewardRecord(
                question_id=rewarded.question_id,
                sample_index=i,
                cluster_id=rewarded.cluster_of[i],
                reward=float(rewarded.rewards[i]),
                advantage=rewarded.advantages[i],
                entropy_nats=rewarded.entropy_nats,
                gated=rewarded.gated,
                reward_oracle=(
                    None if rewarded.oracle_rewards is None else rewarded.oracle_rewards[i]
                ),
            )
        )
    return records


def serialize_reward_record(record: RewardRecord) -> str:
    obj = {
        "question_id": record.question_id,
        "sample_index": record.sample_index,
        "cluster_id": record.cluster_id,
        "reward": record.reward,
        "advantage": record.advantage,
        "entropy_nats": record.entropy_nats,
        "gated": record.gated,
    }
    if record.reward_oracle is not None:
        obj["reward_oracle"] = record.reward_oracle
    return json.dumps(obj)


def parse_reward_record(line: str) -> RewardRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordFormatError(f"not valid JSON: {exc}") from exc
    try:
        return RewardRecord(
            question_id=str(obj["question_id"]),
            sample_index=int(obj["sample_index"]),
            cluster_id=int(obj["cluster_id"]),
            reward=float(obj["reward"]),
            advantage=float(obj["advantage"]),
            entropy_nats=float(obj["entropy_nats"]),
            gated=bool(obj["gated"]),
            reward_oracle=(
                float(obj["reward_oracle"]) if "reward_oracle" in obj else None
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordFormatError(f"bad reward record: {exc}") from exc


def group_from_records(records: list[RewardRecord]) -> RewardedGroup:
    """Rebuild a RewardedGroup from one group's records.

    Rewards come back as exact rationals |cluster| / G recomputed from the
    cluster multiset, so the reconstruction matches the original group
    field for field.
    """
    if not records:
        raise RecordFormatError("empty record group")
    records = sorted(records, key=lambda r: r.sample_index)
    if [r.sample_index for r in records] != list(range(len(records))):
        raise RecordFormatError("sample indices must cover 0..G-1")
    if len({r.question_id for r in records}) != 1:
        raise RecordFormatError("records of one group must share question_id")
    g = len(records)
    sizes: dict[int, int] = {}
    for r in records:
        sizes[r.cluster_id] = sizes.get(r.cluster_id, 0) + 1
    has_oracle = [r.reward_oracle is not None for r in records]
    if any(has_oracle) and not all(has_oracle):
        raise RecordFormatError("reward_oracle must be present on all samples or none")
    return RewardedGroup(
        question_id=records[0].question_id,
        entropy_nats=records[0].entropy_nats,
        rewards=tuple(Fraction(sizes[r.cluster_id], g) for r in records),
        advantages=tuple(r.advantage for r in records),
        gated=records[0].gated,
        cluster_of=tuple(r.cluster_id for r in records),
        oracle_rewards=(
            tuple(r.reward_oracle for r in records) if all(has_oracle) else None
        ),
    )
