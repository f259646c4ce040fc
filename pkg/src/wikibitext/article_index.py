"""Multilingual title mapping built from pivot-language interlanguage links."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .ingest.pages import ArticleText, RawPage


@dataclass
class IndexSummary:
    input_titles: int = 0
    linked_titles: int = 0
    missing_links: dict = field(default_factory=dict)   # language -> count
    complete_entries: int = 0
    retrieved: dict = field(default_factory=dict)       # language -> count

    def report(self) -> str:
        lines = [f"input_titles\t{self.input_titles}",
                 f"linked_titles\t{self.linked_titles}"]
        for lang in sorted(self.missing_links):
            lines.append(f"missing_link[{lang}]\t{self.missing_links[lang]}")
        for lang in sorted(self.retrieved):
            lines.append(f"retrieved[{lang}]\t{self.retrieved[lang]}")
        lines.append(f"complete_entries\t{self.complete_entries}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TitleMapping:
    """pivot title -> ((language, title), ...) for every non-pivot language."""

    pivot: str
    entries: Mapping[str, tuple[tuple[str, str], ...]]

    def __post_init__(self):
        for title, pairs in self.entries.items():
            langs = [lang for lang, _ in pairs]
            if len(set(langs)) != len(langs):
                raise ValueError(f"language listed twice for {title!r}")
            if self.pivot in langs:
                raise ValueError(f"pivot language inside entry {title!r}")

    def __len__(self):
        return len(self.entries)

    def titles_for(self, language: str) -> frozenset:
        return frozenset(t for pairs in self.entries.values()
                         for lang, t in pairs if lang == language)


@dataclass(frozen=True)
class CompleteEntry:
    pivot_title: str
    titles: Mapping[str, str]   # language -> local title, pivot included
    wpids: Mapping[str, int]    # language -> page id, pivot included


@dataclass(frozen=True)
class CompleteEntrySet:
    pivot: str
    languages: tuple[str, ...]
    entries: tuple[CompleteEntry, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def resolve_interlanguage(pivot_pages: Iterable[RawPage], target_languages,
                          summary: IndexSummary | None = None) -> TitleMapping:
    """Keep pivot pages whose langlinks cover every target language."""
    targets = list(dict.fromkeys(target_languages))
    entries = {}
    pivot = None
    for page in pivot_pages:
        if pivot is None:
            pivot = page.language
        elif page.language != pivot:
            raise ValueError(f"mixed pivot languages: {pivot} and {page.language}")
        if summary is not None:
            summary.input_titles += 1
        links = {}
        for lang, title in page.langlinks:
            links.setdefault(lang, title)
        missing = [lang for lang in targets if lang not in links]
        if missing:
            if summary is not None:
                for lang in missing:
                    summary.missing_links[lang] = summary.missing_links.get(lang, 0) + 1
            continue
        entries[page.title] = tuple((lang, links[lang]) for lang in targets)
    if pivot is not None and pivot in targets:
        raise ValueError("pivot language listed among targets")
    if summary is not None:
        summary.linked_titles = len(entries)
    return TitleMapping(pivot=pivot or "", entries=entries)


def select_complete_entries(mapping: TitleMapping, retrieved: Mapping[tuple[str, str], ArticleText],
                            summary: IndexSummary | None = None) -> CompleteEntrySet:
    """Entries whose pivot and every linked article were actually retrieved.

    The result is sorted by pivot title, so it does not depend on the order
    of `retrieved`.
    """
    kept = []
    languages: tuple[str, ...] = ()
    for pivot_title in sorted(mapping.entries):
        pairs = mapping.entries[pivot_title]
        wanted = ((mapping.pivot, pivot_title),) + tuple(pairs)
        languages = tuple(lang for lang, _ in wanted)
        if all(key in retrieved for key in wanted):
            kept.append(CompleteEntry(
                pivot_title=pivot_title,
                titles={lang: title for lang, title in wanted},
                wpids={lang: retrieved[(lang, title)].wpid for lang, title in wanted},
            ))
    if summary is not None:
        summary.complete_entries = len(kept)
        for lang, _ in retrieved:
            summary.retrieved[lang] = summary.retrieved.get(lang, 0) + 1
    return CompleteEntrySet(pivot=mapping.pivot, languages=languages, entries=tuple(kept))
