"""Biography gender classification and gender balancing of the mined corpus."""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import resources
from .ingest.pages import ArticleText

_WORD = re.compile(r"[^\W\d_]+")

BALANCE_MODES = ("sentence-level", "document-level", "off")


class GenderLabel(str, enum.Enum):
    FEMALE = "Female"
    MALE = "Male"
    UNKNOWN = "Unknown"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class PronounLexicon:
    language: str
    feminine: frozenset
    masculine: frozenset

    def __post_init__(self):
        object.__setattr__(self, "feminine", frozenset(t.lower() for t in self.feminine))
        object.__setattr__(self, "masculine", frozenset(t.lower() for t in self.masculine))
        if not self.feminine or not self.masculine:
            raise ValueError(f"{self.language}: pronoun sets must be non-empty")
        if self.feminine & self.masculine:
            raise ValueError(f"{self.language}: pronoun sets overlap: "
                             f"{sorted(self.feminine & self.masculine)}")


def parse_lexicons(lines: Iterable[str]) -> dict[str, PronounLexicon]:
    """Parse "language<TAB>F|M<TAB>token" lines into one lexicon per language."""
    fem: dict[str, set] = {}
    masc: dict[str, set] = {}
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[1] not in ("F", "M"):
            raise ValueError(f"pronoun lexicon line {n}: expected 'lang<TAB>F|M<TAB>token'")
        lang, side, token = parts
        (fem if side == "F" else masc).setdefault(lang, set()).add(token)
        (masc if side == "F" else fem).setdefault(lang, set())
    return {lang: PronounLexicon(lang, frozenset(fem[lang]), frozenset(masc[lang]))
            for lang in sorted(fem)}


def load_lexicons(path=None) -> dict[str, PronounLexicon]:
    if path is None:
        return parse_lexicons(resources.default_pronoun_lines())
    with open(path, encoding="utf-8") as fh:
        return parse_lexicons(fh)


def pronoun_counts(text: str, lexicon: PronounLexicon) -> tuple[int, int]:
    counts = Counter(w.lower() for w in _WORD.findall(text))
    return (sum(counts[t] for t in lexicon.feminine),
            sum(counts[t] for t in lexicon.masculine))


def classify_gender(article: ArticleText, lexicon: PronounLexicon) -> GenderLabel:
    """Label by whichever gendered pronoun set occurs more often; ties are Unknown."""
    if article.language != lexicon.language:
        raise ValueError(f"lexicon for {lexicon.language} used on {article.language} article")
    fem, masc = pronoun_counts(article.plain_text, lexicon)
    if fem > masc:
        return GenderLabel.FEMALE
    if masc > fem:
        return GenderLabel.MALE
    return GenderLabel.UNKNOWN


@dataclass(frozen=True)
class BalanceConfig:
    mode: str = "sentence-level"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in BALANCE_MODES:
            raise ValueError(f"unknown balance mode {self.mode!r}")
        if not -(2 ** 63) <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed % (2 ** 64))


def balance_plan(documents: Sequence, config: BalanceConfig) -> dict[str, tuple[int, ...]]:
    """Which segment positions (0-based) survive in each document, keyed by docid.

    Only docid, gender and segment count are consulted, so the same plan can
    be applied to every language version of a corpus. Documents absent from
    the result are dropped.
    """
    docs = sorted(documents, key=lambda d: d.docid)
    plan = {d.docid: tuple(range(len(d.segments))) for d in docs}
    if config.mode == "off":
        return plan
    female = [d for d in docs if d.gender == GenderLabel.FEMALE]
    male = [d for d in docs if d.gender == GenderLabel.MALE]
    rng = _rng(config.seed)

    if config.mode == "document-level":
        major, minor = (male, female) if len(male) > len(female) else (female, male)
        excess = len(major) - len(minor)
        if excess > 1:
            drop = rng.choice(len(major), size=excess, replace=False)
            for i in drop:
                del plan[major[int(i)].docid]
        return plan

    f_count = sum(len(d.segments) for d in female)
    m_count = sum(len(d.segments) for d in male)
    major = male if m_count > f_count else female
    excess = abs(m_count - f_count)
    if excess == 0:
        return plan
    slots = [(d.docid, pos) for d in major for pos in range(len(d.segments))]
    # uniform over segments, so removal is proportional to document size
    removed = {slots[int(i)] for i in rng.choice(len(slots), size=excess, replace=False)}
    for d in major:
        kept = tuple(p for p in range(len(d.segments)) if (d.docid, p) not in removed)
        if kept:
            plan[d.docid] = kept
        else:
            del plan[d.docid]
    return plan


def apply_plan(documents: Sequence, plan: dict[str, tuple[int, ...]]) -> list:
    """Keep the planned segments of each document, renumbering ids from 1.

    Input order is preserved.
    """
    out = []
    for d in documents:
        if d.docid not in plan:
            continue
        keep = plan[d.docid]
        if len(keep) == len(d.segments):
            out.append(d)
            continue
        segs = tuple(replace(d.segments[p], id=n) for n, p in enumerate(keep, 1))
        out.append(replace(d, segments=segs))
    return out


def balance_corpus(documents: Sequence, config: BalanceConfig) -> list:
    """Balance Female and Male content by segments or by documents.

    Unknown-gender documents pass through and do not count toward either side.
    """
    return apply_plan(documents, balance_plan(documents, config))
