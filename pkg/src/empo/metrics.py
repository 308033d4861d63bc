"""Pass@k estimation and entropy-accuracy correlation analysis.

Pass@k uses the standard unbiased combination estimator
1 - C(n-c, k) / C(n, k), evaluated with exact integer binomials.
Correlation is Spearman rank correlation between semantic entropy and
accuracy, computed either per question or per training step.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy import stats

__all__ = [
    "SampleOutcomeSet",
    "CorrelationReport",
    "pass_at_k",
    "pass_at_k_exact",
    "pass_at_k_curve",
    "entropy_accuracy_correlation",
    "smooth_ema",
]


@dataclass(frozen=True)
class SampleOutcomeSet:
    """Correct-count summary of n sampled solutions for one question."""

    question_id: str
    n: int
    c: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one sample")
        if not 0 <= self.c <= self.n:
            raise ValueError("correct count must lie in [0, n]")


def pass_at_k_exact(n: int, c: int, k: int) -> Fraction:
    """Exact rational pass@k: 1 - C(n-c, k) / C(n, k)."""
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, n]; got k={k}, n={n}")
    if not 0 <= c <= n:
        raise ValueError("correct count must lie in [0, n]")
    if n - c < k:
        return Fraction(1)
    return 1 - Fraction(comb(n - c, k), comb(n, k))


def pass_at_k(outcomes: SampleOutcomeSet, k: int) -> float:
    """Probability that at least one of k drawn samples is correct.

    Equals c/n at k=1 (accuracy) and is nondecreasing in k.
    """
    return float(pass_at_k_exact(outcomes.n, outcomes.c, k))


def pass_at_k_curve(policy, bank, n: int, ks, rng) -> list[tuple[int, float]]:
    """Mean pass@k over a question bank, for each k, sorted ascending by k.

    Draws n outcomes per question from the policy at temperature 1 and feeds
    the per-question correct counts through the unbiased estimator.
    Questions without a known correct meaning count as never-correct.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        raise ValueError("need at least one k")
    if ks[0] < 1 or ks[-1] > n:
        raise ValueError(f"every k must lie in [1, n={n}]")
    sums = {k: 0.0 for k in ks}
    for question in bank:
        idx = policy.sample_indices(question.question_id, n, rng)
        if question.correct_meaning is None:
            c = 0
        else:
            meanings = np.asarray(question.surface_meanings)
            c = int(np.count_nonzero(meanings[idx] == question.correct_meaning))
        for k in ks:
            sums[k] += float(pass_at_k_exact(n, c, k))
    return [(k, sums[k] / len(bank)) for k in ks]


@dataclass(frozen=True)
class CorrelationReport:
    """Spearman rank correlation between entropy and an accuracy signal.

    ``coefficient`` is None when the correlation is undefined (a constant
    input), flagged by ``degenerate`` rather than smuggled in as a number.
    """

    coefficient: float | None
    n_pairs: int
    degenerate: bool

    def __post_init__(self) -> None:
        if self.coefficient is not None and not -1.0 <= self.coefficient <= 1.0 + 1e-12:
            raise ValueError("correlation coefficient out of [-1, 1]")


def entropy_accuracy_correlation(pairs) -> CorrelationReport:
    """Spearman correlation over (entropy, accuracy-or-reward) pairs.

    Needs at least 3 pairs.  Either margin being constant makes the rank
    correlation undefined; that case is reported as degenerate.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 records for a rank correlation")
    xs = np.asarray([p[0] for p in pairs], dtype=float)
    ys = np.asarray([p[1] for p in pairs], dtype=float)
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        return CorrelationReport(coefficient=None, n_pairs=len(pairs), degenerate=True)
    rho = stats.spearmanr(xs, ys).statistic
    return CorrelationReport(coefficient=float(rho), n_pairs=len(pairs), degenerate=False)


def smooth_ema(values, alpha: float = 0.2) -> np.ndarray:
    """Exponential moving average with s_0 = v_0."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    if len(values) == 0:
        return out
    out[0] = values[0]
    for i in range(1, len(values)):
        out[i] = alpha * values[i] + (1 - alpha) * out[i - 1]
    return out
