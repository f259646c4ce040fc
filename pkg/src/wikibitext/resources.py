"""Loaders for the data files shipped inside the package."""

from __future__ import annotations

import functools
from importlib import resources


def _read_lines(*parts: str) -> list[str]:
    node = resources.files("wikibitext").joinpath("data")
    for part in parts:
        node = node.joinpath(part)
    if not node.is_file():
        return []
    lines = node.read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]


@functools.lru_cache(maxsize=None)
def wiki_languages() -> frozenset[str]:
    """Language codes recognised as interlanguage link prefixes."""
    return frozenset(_read_lines("languages.txt"))


@functools.lru_cache(maxsize=None)
def abbreviations(language: str) -> frozenset[str]:
    return frozenset(_read_lines("abbreviations", f"{language}.txt"))


@functools.lru_cache(maxsize=None)
def namespace_aliases(language: str, ns_key: int) -> frozenset[str]:
    """Localised names of a namespace (6 = File, 14 = Category).

    English canonical names are accepted by every wiki, so they are always
    included.
    """
    names = set()
    for line in _read_lines("namespaces.tsv"):
        lang, key, name = line.split("\t")
        if int(key) == ns_key and lang in (language, "en"):
            names.add(name)
    return frozenset(names)


def default_pronoun_lines() -> list[str]:
    return _read_lines("pronouns.tsv")
