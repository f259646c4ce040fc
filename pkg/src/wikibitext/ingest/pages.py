"""Record types for a Wikipedia page at successive stages of extraction."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

_TITLE_SPACE = re.compile(r"[ _]+")
_LANG_CODE = re.compile(r"^[a-z]{2,3}(-[a-z0-9]+)*$")


def normalize_title(title: str) -> str:
    """MediaWiki-style title normalization.

    Surrounding whitespace is trimmed, runs of spaces and underscores become a
    single space and the first character is upper-cased.
    """
    title = _TITLE_SPACE.sub(" ", title.strip()).strip()
    if not title:
        return title
    first = title[0].upper()
    # 'ß'.upper() == 'SS'; MediaWiki leaves such characters alone
    if len(first) != 1:
        first = title[0]
    return first + title[1:]


def is_language_code(code: str) -> bool:
    return bool(_LANG_CODE.match(code))


class SentenceRef(NamedTuple):
    """Stable reference to one sentence; tuple ordering is the tie-break order."""

    language: str
    title: str
    index: int

    def key(self) -> str:
        return f"{self.language}\t{self.title}\t{self.index}"


@dataclass(frozen=True)
class RawPage:
    title: str
    wpid: int
    language: str
    wikitext: str
    categories: tuple[str, ...] = ()
    langlinks: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("page title is empty")
        if self.wpid < 0:
            raise ValueError(f"negative page id {self.wpid}")
        if not is_language_code(self.language):
            raise ValueError(f"bad language code {self.language!r}")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"duplicate categories on {self.title!r}")
        if len(set(self.langlinks)) != len(self.langlinks):
            raise ValueError(f"duplicate langlinks on {self.title!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.language, self.title)


@dataclass(frozen=True)
class ArticleText:
    key: tuple[str, str]
    wpid: int
    plain_text: str
    # non-fatal problems met while stripping markup, e.g. unbalanced braces
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def language(self) -> str:
        return self.key[0]

    @property
    def title(self) -> str:
        return self.key[1]


@dataclass(frozen=True)
class Sentence:
    article_key: tuple[str, str]
    index: int
    text: str

    def __post_init__(self):
        if not self.text or "\n" in self.text or "\r" in self.text:
            raise ValueError(f"invalid sentence text {self.text!r}")
        if self.index < 0:
            raise ValueError("negative sentence index")

    @property
    def ref(self) -> SentenceRef:
        return SentenceRef(self.article_key[0], self.article_key[1], self.index)
