"""Meaning clustering of rollout groups.

Clusters the sampled outputs of one question by final-answer equivalence:
greedy single pass, comparing each new output against the first-inserted
representative of every existing cluster and opening a fresh cluster when
none matches.  With a transitive judge (the rule-based one) the result
equals the connected components of the pairwise equivalence graph for any
output order.  Unparseable outputs never join anything: each one is its own
singleton, so garbage cannot masquerade as a high-mass meaning.
"""

from __future__ import annotations

import subprocess
import threading
from dataclasses import dataclass, field
from fractions import Fraction

from .answers import ExtractedAnswer, are_equivalent, extract_final_answer

__all__ = [
    "RolloutGroup",
    "ClusterPartition",
    "EquivalenceJudge",
    "RuleBasedJudge",
    "ExternalJudge",
    "JudgeError",
    "cluster_group",
    "partition_signature",
]


class JudgeError(RuntimeError):
    """An external judge became unreachable or replied out of protocol."""


@dataclass(frozen=True)
class RolloutGroup:
    """One question plus the G completions sampled for it."""

    question_id: str
    prompt: str
    outputs: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.outputs) < 1:
            raise ValueError("a rollout group needs at least one output")

    @property
    def size(self) -> int:
        return len(self.outputs)


@dataclass(frozen=True)
class ClusterPartition:
    """Meaning clusters over a group, with exact empirical probabilities.

    ``clusters`` holds 0-based output indices, disjoint and complete over the
    group; ``probabilities[j]`` is the exact rational |c_j| / G.
    """

    group_size: int
    clusters: tuple[tuple[int, ...], ...]
    answers: tuple[ExtractedAnswer, ...]

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    @property
    def probabilities(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(len(c), self.group_size) for c in self.clusters)

    @property
    def cluster_of(self) -> tuple[int, ...]:
        """Cluster index for each output index."""
        owner = [0] * self.group_size
        for j, members in enumerate(self.clusters):
            for i in members:
                owner[i] = j
        return tuple(owner)


class EquivalenceJudge:
    """Decides whether two parsed answers carry the same meaning."""

    def equivalent(self, question: str, a: ExtractedAnswer, b: ExtractedAnswer) -> bool:
        raise NotImplementedError


class RuleBasedJudge(EquivalenceJudge):
    """Canonical-form equality; ignores the question text."""

    def equivalent(self, question: str, a: ExtractedAnswer, b: ExtractedAnswer) -> bool:
        return are_equivalent(a, b)


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


class ExternalJudge(EquivalenceJudge):
    """Line-protocol bridge to an external verifier process.

    Speaks one request per line, ``question\\tanswer_a\\tanswer_b`` (tabs,
    newlines and backslashes escaped), and expects one ``YES`` or ``NO``
    reply line per request.  Verdicts are cached per unordered canonical
    pair, so re-queries across groups of the same question are free and a
    deterministic verifier stays deterministic under any interleaving.
    """

    def __init__(self, command: list[str] | str, question_id: str = ""):
        self._command = command
        self._proc: subprocess.Popen[str] | None = None
        self._lock = threading.Lock()
        self._cache: dict[tuple[str, str, str], bool] = {}
        self._question_id = question_id

    def _ensure_proc(self) -> subprocess.Popen[str]:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self._command,
                    shell=isinstance(self._command, str),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise JudgeError(f"cannot start judge process: {exc}") from exc
        return self._proc

    def equivalent(self, question: str, a: ExtractedAnswer, b: ExtractedAnswer) -> bool:
        lo, hi = sorted((a.canonical, b.canonical))
        key = (self._question_id, lo, hi)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
            verdict = self._query(question, a.surface, b.surface)
            self._cache[key] = verdict
            return verdict

    def _query(self, question: str, answer_a: str, answer_b: str) -> bool:
        proc = self._ensure_proc()
        line = f"{_escape(question)}\t{_escape(answer_a)}\t{_escape(answer_b)}\n"
        try:
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(line)
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise JudgeError(f"judge transport failed: {exc}") from exc
        if reply == "":
            raise JudgeError("judge process closed its output stream")
        reply = reply.strip()
        if reply == "YES":
            return True
        if reply == "NO":
            return False
        raise JudgeError(f"judge replied {reply!r}, expected YES or NO")

    def for_question(self, question_id: str) -> "ExternalJudge":
        """View of this judge whose cache keys carry `question_id`."""
        view = ExternalJudge.__new__(ExternalJudge)
        view._command = self._command
        view._proc = self._proc
        view._lock = self._lock
        view._cache = self._cache
        view._question_id = question_id
        return view

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)

    def __enter__(self) -> "ExternalJudge":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def cluster_group(group: RolloutGroup, judge: EquivalenceJudge) -> ClusterPartition:
    """Partition a group's outputs into meaning clusters.

    Outputs are visited in sampling order; each is compared against one
    representative per existing cluster (the first-inserted member) and joins
    the first match, else opens a new cluster.  At most G*M judge calls.
    """
    answers = tuple(extract_final_answer(text) for text in group.outputs)
    clusters: list[list[int]] = []
    representatives: list[ExtractedAnswer] = []
    for i, ans in enumerate(answers):
        placed = False
        if ans.parsed:
            for j, rep in enumerate(representatives):
                if rep.parsed and judge.equivalent(group.prompt, rep, ans):
                    clusters[j].append(i)
                    placed = True
                    break
        if not placed:
            clusters.append([i])
            representatives.append(ans)
    return ClusterPartition(
        group_size=group.size,
        clusters=tuple(tuple(c) for c in clusters),
        answers=answers,
    )


def partition_signature(partition: ClusterPartition) -> tuple[int, ...]:
    """Cluster sizes sorted descending: the entropy-determining key."""
    return tuple(sorted((len(c) for c in partition.clusters), reverse=True))
