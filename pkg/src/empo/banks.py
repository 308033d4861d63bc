"""Synthetic question banks for the desk-scale trainer.

A synthetic question is a discrete answer space: M meanings, each spelled by
S surface strings that canonicalize to the meaning's label, plus initial
logits over all M*S surfaces.  Different meanings never share a canonical
form (checked at construction), so the rule-based clustering path recovers
the meaning structure exactly while still running over rendered text.

Three seedable profiles cover the standard experiment banks:

* ``modal-correct-70``: for 70% of questions the highest-total-mass meaning
  is the correct one (but its mass is split across surfaces, so the argmax
  surface often belongs to a sharper distractor); the remaining 30% start
  with essentially zero mass on the correct meaning.
* ``modal-correct-100``: every question is modal-correct, with a wide margin.
* ``modal-wrong-100``: adversarial bank; every question starts greedy-correct
  through one sharp correct surface, yet the modal meaning is wrong and the
  meaning distribution is wide.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .answers import canonicalize

__all__ = [
    "SyntheticQuestion",
    "BankFormatError",
    "render_output",
    "generate_bank",
    "save_bank",
    "load_bank",
    "PROFILES",
]

_OUTPUT_TEMPLATE = "Working through it step by step, the final answer is \\boxed{%s}."


def render_output(surface: str) -> str:
    """Completion text carrying `surface` as its boxed final answer."""
    return _OUTPUT_TEMPLATE % surface


class BankFormatError(ValueError):
    """A bank file or record violates the bank schema or its invariants."""


@dataclass(frozen=True)
class SyntheticQuestion:
    """One discrete question: meanings, their surface spellings, and logits.

    ``correct_meaning`` is hidden from the unsupervised objective and only
    read by evaluation and the oracle baseline; None marks an unlabeled
    question.
    """

    question_id: str
    prompt: str
    meanings: tuple[str, ...]
    surfaces: tuple[tuple[str, ...], ...]
    correct_meaning: int | None
    init_logits: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.meanings) < 2:
            raise BankFormatError(f"{self.question_id}: need at least 2 meanings")
        if len(set(self.meanings)) != len(self.meanings):
            raise BankFormatError(f"{self.question_id}: meaning labels must be distinct")
        if len(self.surfaces) != len(self.meanings):
            raise BankFormatError(f"{self.question_id}: one surface list per meaning")
        for label, spellings in zip(self.meanings, self.surfaces):
            if not spellings:
                raise BankFormatError(f"{self.question_id}: every meaning needs a surface")
            for s in spellings:
                if canonicalize(s) != label:
                    raise BankFormatError(
                        f"{self.question_id}: surface {s!r} does not canonicalize to {label!r}"
                    )
        if self.correct_meaning is not None and not 0 <= self.correct_meaning < len(self.meanings):
            raise BankFormatError(f"{self.question_id}: correct_meaning out of range")
        if len(self.init_logits) != self.num_surfaces:
            raise BankFormatError(f"{self.question_id}: init_logits length mismatch")

    @cached_property
    def num_surfaces(self) -> int:
        return sum(len(s) for s in self.surfaces)

    @cached_property
    def flat_surfaces(self) -> tuple[str, ...]:
        return tuple(s for spellings in self.surfaces for s in spellings)

    @cached_property
    def surface_meanings(self) -> tuple[int, ...]:
        """Meaning index of each flat surface index."""
        return tuple(m for m, spellings in enumerate(self.surfaces) for _ in spellings)

    @cached_property
    def rollout_texts(self) -> tuple[str, ...]:
        return tuple(render_output(s) for s in self.flat_surfaces)

    @cached_property
    def text_index(self) -> dict[str, int]:
        """Rendered completion text back to its flat surface index."""
        return {text: i for i, text in enumerate(self.rollout_texts)}


# Spellings of an integer value that all canonicalize to str(value).
def _surface_variants(value: int, count: int) -> tuple[str, ...]:
    variants = [
        str(value),
        f"{2 * value}/2",
        f"{value}.0",
        f"+{value}",
        f"{3 * value}/3",
        f"{value}.00",
        f"{4 * value}/4",
        f"{5 * value}/5",
    ]
    if count > len(variants):
        raise ValueError(f"at most {len(variants)} surface spellings per meaning")
    return tuple(variants[:count])


def _split_even(mass: float, count: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.uniform(0.85, 1.15, size=count)
    return mass * w / w.sum()


def _split_concentrated(mass: float, count: int, rng: np.random.Generator, peak: float) -> np.ndarray:
    if count == 1:
        return np.array([mass])
    rest = _split_even(mass * (1.0 - peak), count - 1, rng)
    return np.concatenate(([mass * peak], rest))


def _question_from_masses(
    qid: str,
    values: np.ndarray,
    per_surface: list[np.ndarray],
    correct: int,
    num_spellings: int,
) -> SyntheticQuestion:
    probs = np.concatenate(per_surface)
    probs = probs / probs.sum()
    return SyntheticQuestion(
        question_id=qid,
        prompt=f"Evaluate synthetic expression {qid}.",
        meanings=tuple(str(v) for v in values),
        surfaces=tuple(_surface_variants(int(v), num_spellings) for v in values),
        correct_meaning=correct,
        init_logits=tuple(float(x) for x in np.log(probs)),
    )


def _solvable_question(
    qid: str,
    rng: np.random.Generator,
    num_meanings: int,
    num_spellings: int,
    modal_range: tuple[float, float],
    distractor_range: tuple[float, float],
) -> SyntheticQuestion:
    """Modal meaning correct; one sharper distractor competes at the argmax."""
    values = rng.choice(1000, size=num_meanings, replace=False)
    correct = int(rng.integers(num_meanings))
    modal_mass = rng.uniform(*modal_range)
    d_hi = min(distractor_range[1], modal_mass - 0.04)
    distractor_mass = rng.uniform(distractor_range[0], d_hi)
    others = [m for m in range(num_meanings) if m != correct]
    distractor = int(others[rng.integers(len(others))])
    rest = [m for m in others if m != distractor]
    rest_mass = _split_even(1.0 - modal_mass - distractor_mass, len(rest), rng)

    per_surface: list[np.ndarray] = [np.empty(0)] * num_meanings
    per_surface[correct] = _split_even(modal_mass, num_spellings, rng)
    per_surface[distractor] = _split_concentrated(
        distractor_mass, num_spellings, rng, peak=rng.uniform(0.86, 0.94)
    )
    for m, mass in zip(rest, rest_mass):
        per_surface[m] = _split_even(mass, num_spellings, rng)
    return _question_from_masses(qid, values, per_surface, correct, num_spellings)


def _unsolvable_question(
    qid: str,
    rng: np.random.Generator,
    num_meanings: int,
    num_spellings: int,
) -> SyntheticQuestion:
    """Correct meaning present but with vanishing initial mass."""
    values = rng.choice(1000, size=num_meanings, replace=False)
    correct = int(rng.integers(num_meanings))
    wrong = [m for m in range(num_meanings) if m != correct]
    modal = int(wrong[rng.integers(len(wrong))])
    modal_mass = rng.uniform(0.34, 0.46)
    rest = [m for m in wrong if m != modal]
    rest_mass = _split_even(1.0 - modal_mass, len(rest), rng)

    per_surface: list[np.ndarray] = [np.empty(0)] * num_meanings
    per_surface[correct] = np.full(num_spellings, 1e-10 / num_spellings)
    per_surface[modal] = _split_even(modal_mass, num_spellings, rng)
    for m, mass in zip(rest, rest_mass):
        per_surface[m] = _split_even(mass, num_spellings, rng)
    return _question_from_masses(qid, values, per_surface, correct, num_spellings)


def _adversarial_question(
    qid: str,
    rng: np.random.Generator,
    num_meanings: int,
    num_spellings: int,
) -> SyntheticQuestion:
    """Greedy-correct start, wrong modal meaning, wide meaning distribution."""
    values = rng.choice(1000, size=num_meanings, replace=False)
    correct = int(rng.integers(num_meanings))
    wrong = [m for m in range(num_meanings) if m != correct]
    modal = int(wrong[rng.integers(len(wrong))])
    correct_mass = rng.uniform(0.16, 0.24)
    modal_mass = correct_mass + rng.uniform(0.03, 0.08)
    rest = [m for m in wrong if m != modal]
    rest_mass = _split_even(1.0 - correct_mass - modal_mass, len(rest), rng)

    per_surface: list[np.ndarray] = [np.empty(0)] * num_meanings
    per_surface[correct] = _split_concentrated(correct_mass, num_spellings, rng, peak=0.94)
    per_surface[modal] = _split_even(modal_mass, num_spellings, rng)
    for m, mass in zip(rest, rest_mass):
        per_surface[m] = _split_even(mass, num_spellings, rng)
    return _question_from_masses(qid, values, per_surface, correct, num_spellings)


def _modal_correct_bank(
    rng: np.random.Generator,
    size: int,
    correct_fraction: float,
    num_meanings: int = 5,
    num_spellings: int = 2,
    modal_range: tuple[float, float] = (0.34, 0.46),
    distractor_range: tuple[float, float] = (0.16, 0.30),
) -> list[SyntheticQuestion]:
    n_solvable = round(size * correct_fraction)
    solvable = np.zeros(size, dtype=bool)
    solvable[rng.permutation(size)[:n_solvable]] = True
    bank = []
    for i in range(size):
        qid = f"q{i:04d}"
        if solvable[i]:
            bank.append(
                _solvable_question(qid, rng, num_meanings, num_spellings, modal_range, distractor_range)
            )
        else:
            bank.append(_unsolvable_question(qid, rng, num_meanings, num_spellings))
    return bank


PROFILES = {
    "modal-correct-70": lambda rng: _modal_correct_bank(rng, size=200, correct_fraction=0.70),
    "modal-correct-100": lambda rng: _modal_correct_bank(
        rng,
        size=150,
        correct_fraction=1.0,
        modal_range=(0.42, 0.55),
        distractor_range=(0.12, 0.22),
    ),
    "modal-wrong-100": lambda rng: [
        _adversarial_question(f"q{i:04d}", rng, num_meanings=12, num_spellings=2)
        for i in range(150)
    ],
}


def generate_bank(profile: str, seed: int) -> list[SyntheticQuestion]:
    """Build one of the standard banks from a seed."""
    if profile not in PROFILES:
        raise BankFormatError(f"unknown bank profile {profile!r}; have {sorted(PROFILES)}")
    return PROFILES[profile](np.random.default_rng(seed))


def save_bank(bank, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in bank:
            fh.write(
                json.dumps(
                    {
                        "question_id": q.question_id,
                        "prompt": q.prompt,
                        "meanings": list(q.meanings),
                        "surfaces": [list(s) for s in q.surfaces],
                        "correct_meaning": q.correct_meaning,
                        "init_logits": list(q.init_logits),
                    }
                )
                + "\n"
            )


def load_bank(path) -> list[SyntheticQuestion]:
    bank = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                bank.append(
                    SyntheticQuestion(
                        question_id=str(rec["question_id"]),
                        prompt=str(rec.get("prompt", "")),
                        meanings=tuple(str(m) for m in rec["meanings"]),
                        surfaces=tuple(tuple(str(s) for s in group) for group in rec["surfaces"]),
                        correct_meaning=(
                            None if rec.get("correct_meaning") is None else int(rec["correct_meaning"])
                        ),
                        init_logits=tuple(float(x) for x in rec["init_logits"]),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise BankFormatError(f"{path}:{lineno}: bad bank record: {exc}") from exc
    if not bank:
        raise BankFormatError(f"{path}: empty bank")
    return bank
