"""Rule-based sentence splitting with per-language abbreviation lists."""

from __future__ import annotations

import re

from .. import resources
from .pages import ArticleText, Sentence

MIN_SENTENCE_CHARS = 3

# terminal punctuation, optional closing quotes/brackets, then whitespace
_CANDIDATE = re.compile(r"[.?!]+[\"'”’»)\]]*\s+")
_OPENERS = "\"'“‘«([¿¡"
_WS = re.compile(r"\s+")


def _starts_sentence(text: str, pos: int) -> bool:
    while pos < len(text) and text[pos] in _OPENERS:
        pos += 1
    if pos >= len(text):
        return False
    ch = text[pos]
    return ch.isupper() or ch.isdigit()


def preceding_token(text: str, end: int) -> str:
    """The whitespace-delimited token ending just before `end`, minus leading brackets."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end].lstrip(_OPENERS)


def is_suppressed(token: str, abbreviations) -> bool:
    """True when a period after `token` does not end a sentence."""
    if token in abbreviations:
        return True
    # a single capital is an initial ("J. Smith")
    return len(token) == 1 and token.isupper()


def split_text(text: str, abbreviations=frozenset()) -> list[str]:
    """Split plain text into sentence strings (whitespace collapsed, short ones kept)."""
    pieces = []
    for paragraph in text.splitlines():
        start = 0
        for m in _CANDIDATE.finditer(paragraph):
            if not _starts_sentence(paragraph, m.end()):
                continue
            punct = m.group().rstrip().rstrip("\"'”’»)]")
            if punct == "." and is_suppressed(preceding_token(paragraph, m.start()),
                                              abbreviations):
                continue
            pieces.append(paragraph[start:m.end()])
            start = m.end()
        pieces.append(paragraph[start:])
    out = []
    for piece in pieces:
        piece = _WS.sub(" ", piece).strip()
        if piece:
            out.append(piece)
    return out


def segment_sentences(article: ArticleText, abbreviations=None) -> list[Sentence]:
    """Segment an article into sentences indexed contiguously from 0.

    Sentences shorter than three characters after trimming are dropped.
    """
    if abbreviations is None:
        abbreviations = resources.abbreviations(article.language)
    texts = [s for s in split_text(article.plain_text, abbreviations)
             if len(s) >= MIN_SENTENCE_CHARS]
    return [Sentence(article.key, i, t) for i, t in enumerate(texts)]
