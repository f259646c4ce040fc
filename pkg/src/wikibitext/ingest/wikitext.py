"""Rule-based wikitext to plain text conversion.

This is deliberately lossy: templates are dropped rather than expanded, and
only the markup that commonly appears in article prose is handled.
"""

from __future__ import annotations

import html
import re

from .. import resources
from .pages import ArticleText, RawPage, normalize_title

_COMMENT = re.compile(r"<!--.*?(-->|\Z)", re.S)
# elements whose content is never prose
_DROP_ELEMENTS = ("ref", "references", "gallery", "math", "timeline", "score",
                  "imagemap", "syntaxhighlight", "source", "chem", "hiero", "graph")
_SELF_CLOSING = re.compile(
    r"<\s*(?:%s)\b[^>]*/\s*>" % "|".join(_DROP_ELEMENTS), re.I)
_PAIRED = re.compile(
    r"<\s*(%s)\b[^>]*>.*?(?:<\s*/\s*\1\s*>|\Z)" % "|".join(_DROP_ELEMENTS), re.I | re.S)
_TAG = re.compile(r"</?[A-Za-z][A-Za-z0-9]*\b[^<>]*/?>")
_EXT_LINK = re.compile(r"\[(?:https?:|ftp:)?//[^\s\]]+(?:\s+([^\]]*))?\]")
_EMPHASIS = re.compile(r"'{2,}")
_MAGIC = re.compile(r"__[A-Z]+__")
_HEADING = re.compile(r"^\s*=+.*=+\s*$")
_LIST_OR_TABLE = re.compile(r"^\s*[*#:;|!]")
_SPACES = re.compile(r"[ \t  ​]+")
_SPACE_BEFORE_PUNCT = re.compile(r" +([,.;:!?])")
_EMPTY_PARENS = re.compile(r"\(\s*[,;]?\s*\)")
_FORBIDDEN = ("[[", "]]", "{{", "}}", "'''")


class LinkContext:
    """Namespace names needed to classify [[...]] links for one language."""

    def __init__(self, language, category_names=(), file_names=(), languages=None):
        self.language = language
        self.category = {n.lower() for n in resources.namespace_aliases(language, 14)}
        self.category.update(n.lower() for n in category_names)
        self.file = {n.lower() for n in resources.namespace_aliases(language, 6)}
        self.file.update(n.lower() for n in file_names)
        self.languages = languages if languages is not None else resources.wiki_languages()

    def classify(self, target: str) -> tuple[str, str]:
        """Return (kind, rest) with kind in {category, file, langlink, page}."""
        if target.startswith(":"):
            return "page", target[1:]
        prefix, sep, rest = target.partition(":")
        if sep:
            p = prefix.strip().lower()
            if p in self.category:
                return "category", rest
            if p in self.file:
                return "file", rest
            if p in self.languages:
                return "langlink", rest
        return "page", target


def _match_close(text: str, start: int, opener: str, closer: str) -> int:
    """Index just past the closer balancing the opener at `start`, or -1."""
    scan = re.compile(re.escape(opener) + "|" + re.escape(closer))
    depth = 0
    for m in scan.finditer(text, start):
        if m.group() == opener:
            depth += 1
        else:
            depth -= 1
            if depth == 0:
                return m.end()
    return -1


def drop_nested(text: str, opener: str, closer: str, warnings: list[str] | None = None) -> str:
    """Remove every balanced opener...closer span, nesting-aware.

    An opener that is never closed swallows the rest of the text and a
    warning is recorded.
    """
    out = []
    pos = 0
    while True:
        start = text.find(opener, pos)
        if start < 0:
            out.append(text[pos:])
            break
        out.append(text[pos:start])
        end = _match_close(text, start, opener, closer)
        if end < 0:
            if warnings is not None:
                warnings.append(f"unbalanced {opener!r} at offset {start}; dropped to end")
            break
        pos = end
    return "".join(out)


def link_targets(wikitext: str) -> list[str]:
    """Targets of all innermost [[...]] links, in order of appearance."""
    return [m.group(1) for m in re.finditer(r"\[\[([^\[\]|]+)(?:\|[^\[\]]*)?\]\]", wikitext)]


def extract_link_metadata(wikitext: str, ctx: LinkContext):
    """Categories and interlanguage links declared in the page source.

    Both lists are de-duplicated, first occurrence wins.
    """
    text = _COMMENT.sub("", wikitext)
    categories: dict[str, None] = {}
    langlinks: dict[tuple[str, str], None] = {}
    for target in link_targets(text):
        kind, rest = ctx.classify(target.strip())
        if kind == "category":
            name = normalize_title(rest)
            if name:
                categories[name] = None
        elif kind == "langlink":
            prefix = target.strip().partition(":")[0].strip().lower()
            title = normalize_title(rest)
            if title:
                langlinks[(prefix, title)] = None
    return list(categories), list(langlinks)


def _replace_links(text: str, ctx: LinkContext) -> str:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        start = text.find("[[", pos)
        if start < 0:
            out.append(text[pos:])
            break
        out.append(text[pos:start])
        end = _match_close(text, start, "[[", "]]")
        if end < 0:
            # stray opener: keep the text, lose the brackets
            pos = start + 2
            continue
        inner = text[start + 2:end - 2]
        target, bar, label = inner.partition("|")
        kind, rest = ctx.classify(target.strip())
        if kind == "page":
            shown = label if bar else rest
            # nested links inside a label (rare) get the same treatment
            out.append(_replace_links(shown, ctx).strip())
        pos = end
    return "".join(out)


def _clean_lines(text: str) -> str:
    lines = []
    for line in text.split("\n"):
        if _HEADING.match(line) or _LIST_OR_TABLE.match(line):
            continue
        line = _SPACES.sub(" ", line).strip()
        line = _SPACE_BEFORE_PUNCT.sub(r"\1", line)
        line = _EMPTY_PARENS.sub("", line)
        line = _SPACES.sub(" ", line).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def _strip_once(text: str, ctx: LinkContext, warnings: list[str]) -> str:
    text = _COMMENT.sub("", text)
    text = _SELF_CLOSING.sub("", text)
    text = _PAIRED.sub("", text)
    text = drop_nested(text, "{{", "}}", warnings)
    text = drop_nested(text, "{|", "|}", warnings)
    text = _replace_links(text, ctx)
    text = _EXT_LINK.sub(lambda m: m.group(1) or "", text)
    text = _TAG.sub("", text)
    text = _EMPHASIS.sub("", text)
    text = _MAGIC.sub("", text)
    text = html.unescape(text)
    text = _clean_lines(text)
    for token in _FORBIDDEN:
        while token in text:
            text = text.replace(token, "")
    return text


def strip_markup(text: str, ctx: LinkContext) -> tuple[str, list[str]]:
    """Strip wikitext markup; returns (plain text, warnings).

    Runs the rule set to a fixed point so that stripping is idempotent even
    when entity decoding exposes new markup.
    """
    warnings: list[str] = []
    for _ in range(10):
        stripped = _strip_once(text, ctx, warnings)
        if stripped == text:
            break
        text = stripped
    return text, warnings


def strip_wikitext(page: RawPage, ctx: LinkContext | None = None) -> ArticleText:
    if ctx is None:
        ctx = LinkContext(page.language)
    plain, warnings = strip_markup(page.wikitext, ctx)
    return ArticleText(key=page.key, wpid=page.wpid, plain_text=plain,
                       warnings=tuple(warnings))
