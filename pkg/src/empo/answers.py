"""Final-answer extraction and canonicalization.

A sampled completion carries its final answer inside the last ``\\boxed{...}``
marker.  Extraction pulls that span out (brace-balanced, so nested fractions
survive); canonicalization reduces it to a normal form so that answer
equivalence becomes plain string equality.  Both are pure functions and safe
to call from any number of workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = ["ExtractedAnswer", "extract_final_answer", "canonicalize", "are_equivalent"]

_BOXED = "\\boxed"

_WS_RE = re.compile(r"\s+")
_MATH_DELIMS = (("$", "$"), ("\\(", "\\)"), ("\\[", "\\]"))
# Sizing / spacing macros that never change an answer's meaning.
_SIZING_RE = re.compile(r"\\left|\\right|\\[bB]igg?[lrm]?|\\middle|\\[,;!:]|\\quad|\\qquad")
_TEXT_WRAPPER_RE = re.compile(r"^\\(?:text|textbf|textit|mathrm|mathbf|operatorname)\{(.*)\}$", re.DOTALL)
_FRAC_RE = re.compile(r"\\[dtc]?frac\s*\{([^{}]*)\}\s*\{([^{}]*)\}")
_INT_RE = re.compile(r"^[+-]?\d+$")
_DECIMAL_RE = re.compile(r"^[+-]?(?:\d+\.\d*|\.\d+|\d+)$")
_RATIO_RE = re.compile(r"^([+-]?\d+)\s*/\s*([+-]?\d+)$")
_THOUSANDS_RE = re.compile(r"^[+-]?\d{1,3}(?:,\d{3})+$")


@dataclass(frozen=True)
class ExtractedAnswer:
    """Final answer of one output: raw boxed span plus its canonical form.

    ``canonical`` is non-empty exactly when the answer parsed; an unparseable
    output (no balanced boxed span, or an empty one) carries empty strings.
    """

    surface: str
    canonical: str

    @property
    def parsed(self) -> bool:
        return self.canonical != ""

    @classmethod
    def unparseable(cls) -> "ExtractedAnswer":
        return cls(surface="", canonical="")


def _boxed_span(text: str, start: int) -> str | None:
    """Balanced contents of a ``\\boxed{...}`` starting at `start`, or None."""
    i = start + len(_BOXED)
    while i < len(text) and text[i].isspace():
        i += 1
    if i >= len(text) or text[i] != "{":
        return None
    depth = 1
    i += 1
    begin = i
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[begin:i]
        i += 1
    return None


def extract_final_answer(text: str) -> ExtractedAnswer:
    """Extract the last balanced boxed span of `text` in canonical form.

    Everything before the marker (the reasoning trace) is ignored.  Earlier
    boxed spans only matter when the later occurrences are brace-unbalanced.
    A balanced but empty box counts as unparseable.
    """
    pos = len(text)
    while True:
        pos = text.rfind(_BOXED, 0, pos)
        if pos < 0:
            return ExtractedAnswer.unparseable()
        span = _boxed_span(text, pos)
        if span is not None:
            canonical = canonicalize(span)
            if canonical == "":
                return ExtractedAnswer.unparseable()
            return ExtractedAnswer(surface=span, canonical=canonical)
        # Unbalanced occurrence: keep scanning backwards.


def _strip_outer(s: str) -> str:
    """Peel math delimiters, outer braces, and text wrappers until stable."""
    while True:
        before = s
        s = s.strip()
        for open_, close in _MATH_DELIMS:
            if len(s) > len(open_) + len(close) and s.startswith(open_) and s.endswith(close):
                inner = s[len(open_):-len(close)]
                # "$x$" strips; a lone "$" or unpaired delimiter does not.
                if open_ != "$" or "$" not in inner:
                    s = inner
                    break
        if s.startswith("{") and s.endswith("}") and _balanced_outer_brace(s):
            s = s[1:-1]
        m = _TEXT_WRAPPER_RE.match(s)
        if m and _balanced_outer_brace("{" + m.group(1) + "}"):
            s = m.group(1)
        if s == before:
            return s


def _balanced_outer_brace(s: str) -> bool:
    depth = 0
    for i, ch in enumerate(s):
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0 and i != len(s) - 1:
                return False
            if depth < 0:
                return False
    return depth == 0


def _rational_of(s: str) -> Fraction | None:
    """Parse `s` as an exact rational (integer, decimal, or a/b), else None."""
    if _THOUSANDS_RE.match(s):
        s = s.replace(",", "")
    m = _RATIO_RE.match(s)
    if m:
        den = int(m.group(2))
        if den == 0:
            return None
        return Fraction(int(m.group(1)), den)
    if _DECIMAL_RE.match(s) and s not in ("+", "-", "."):
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError):
            return None
    return None


def _canonical_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _split_top_level(s: str, sep: str = ",") -> list[str]:
    parts: list[str] = []
    depth = 0
    cur: list[str] = []
    for ch in s:
        if ch in "({[":
            depth += 1
        elif ch in ")}]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


@lru_cache(maxsize=1 << 16)
def canonicalize(surface: str) -> str:
    """Deterministic normal form of an answer span.

    Covers whitespace collapse, removal of sizing/formatting wrappers,
    numeric normalization (leading zeros, trailing decimal zeros, '+' signs),
    reduction of rationals to lowest terms with the sign on the numerator,
    case-folding of single-letter choice answers, and element-wise
    normalization of ordered tuples.  Equal rational values always map to
    the same string; anything that matches no rule collapses to its
    whitespace-normalized self.  Idempotent.
    """
    s = _SIZING_RE.sub(" ", surface)
    s = _FRAC_RE.sub(lambda m: f"{m.group(1).strip()}/{m.group(2).strip()}", s)
    s = _WS_RE.sub(" ", s).strip()
    s = _strip_outer(s)
    s = _WS_RE.sub(" ", s).strip()
    if s == "":
        return ""

    if s.startswith("(") and s.endswith(")") and _balanced_parens(s):
        inner = s[1:-1]
        parts = _split_top_level(inner)
        if len(parts) > 1:
            return "(" + ", ".join(canonicalize(p) for p in parts) + ")"
        # Single-element parens are formatting, not a tuple.
        return canonicalize(inner) if inner.strip() else "()"

    q = _rational_of(s)
    if q is not None:
        return _canonical_rational(q)

    if len(s) == 1 and s.isalpha():
        return s.upper()

    return s


def _balanced_parens(s: str) -> bool:
    depth = 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0 and i != len(s) - 1:
                return False
            if depth < 0:
                return False
    return depth == 0


def are_equivalent(a: ExtractedAnswer, b: ExtractedAnswer) -> bool:
    """True iff both answers parsed and share one canonical form.

    Two unparseable answers are never equivalent: each is meaningless rather
    than same-meaning, so downstream each stays a singleton cluster.
    """
    return a.parsed and b.parsed and a.canonical == b.canonical
