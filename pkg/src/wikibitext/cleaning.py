"""Post-mining cleanup: length-ratio filtering and duplicate removal."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .mining import AlignedTuple, format_ref

LENGTH_UNITS = ("characters", "tokens")

KEEP = "keep"
DROP_LENGTH_RATIO = "length_ratio"
DROP_EMPTY_MEMBER = "empty_member"
DROP_DUPLICATE = "duplicate"


@dataclass(frozen=True)
class CleaningConfig:
    max_length_ratio: float = 0.20
    length_unit: str = "characters"
    # drop at exactly (1 + ratio) x shortest as well
    inclusive_bound: bool = False

    def __post_init__(self):
        if not 0 < self.max_length_ratio < 10:
            raise ValueError("max_length_ratio must lie in (0, 10)")
        if self.length_unit not in LENGTH_UNITS:
            raise ValueError(f"unknown length unit {self.length_unit!r}")

    @property
    def bound(self) -> Fraction:
        # exact decimal so 100 vs 120 characters sits exactly on the bound
        return 1 + Fraction(repr(self.max_length_ratio))


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: str = KEEP

    def __bool__(self):
        return self.keep


def measure(text: str, unit: str) -> int:
    text = text.strip()
    return len(text.split()) if unit == "tokens" else len(text)


def length_ratio_filter(tuple_texts: Sequence[str], config: CleaningConfig = CleaningConfig()) -> FilterDecision:
    """Drop when the longest member exceeds (1 + ratio) times the shortest."""
    if len(tuple_texts) < 2:
        raise ValueError("need at least two texts to compare")
    lengths = [measure(t, config.length_unit) for t in tuple_texts]
    shortest, longest = min(lengths), max(lengths)
    if shortest == 0:
        return FilterDecision(False, DROP_EMPTY_MEMBER)
    limit = config.bound * shortest
    too_long = longest >= limit if config.inclusive_bound else longest > limit
    return FilterDecision(False, DROP_LENGTH_RATIO) if too_long else FilterDecision(True)


@dataclass(frozen=True)
class TextTuple:
    """An aligned tuple together with the sentence text in each language."""

    aligned: AlignedTuple
    texts: Mapping[str, str]   # language -> text, pivot included

    def content_key(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(self.texts.items()))

    def refs(self) -> list:
        return [self.aligned.pivot_ref] + [r for r, _ in self.aligned.per_language.values()]


def dedupe_tuples(tuples: Iterable[TextTuple], rejected: list | None = None) -> list[TextTuple]:
    """Drop tuples whose full multilingual content repeats an earlier one."""
    seen = set()
    out = []
    for t in tuples:
        key = t.content_key()
        if key in seen:
            if rejected is not None:
                rejected.append((DROP_DUPLICATE, t))
            continue
        seen.add(key)
        out.append(t)
    return out


def clean_tuples(tuples: Iterable[TextTuple], config: CleaningConfig,
                 rejected: list | None = None) -> list[TextTuple]:
    """Length-ratio filter followed by dedupe; rejects are appended to `rejected`."""
    kept = []
    for t in tuples:
        decision = length_ratio_filter([t.texts[lang] for lang in sorted(t.texts)], config)
        if decision.keep:
            kept.append(t)
        elif rejected is not None:
            rejected.append((decision.reason, t))
    return dedupe_tuples(kept, rejected)


def audit_lines(rejected: Iterable[tuple[str, TextTuple]]) -> str:
    """Rejected-tuple log: reason code followed by the tuple's sentence refs."""
    return "".join(reason + "\t" + "\t".join(format_ref(r) for r in t.refs()) + "\n"
                   for reason, t in rejected)
