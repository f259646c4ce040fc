"""Streaming reader for MediaWiki XML export dumps.

The dump is fed to expat in fixed-size chunks and pages are yielded as soon
as their closing tag is seen, so memory stays bounded by roughly one page
plus one read buffer no matter how large the dump is.
"""

from __future__ import annotations

import bz2
import gzip
import io
import logging
import lzma
import os
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator
from xml.parsers import expat

from ..errors import DumpStreamError, InputError
from .pages import RawPage, normalize_title
from .wikitext import LinkContext, extract_link_metadata

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 16

_MAGIC = (
    (b"BZh", "bz2"),
    (b"\x1f\x8b", "gzip"),
    (b"\xfd7zXZ\x00", "xz"),
)
_REDIRECT_PREFIX = "#redirect"


@dataclass(frozen=True)
class PageSelector:
    """Which pages of a dump to keep: a title set, a category, or everything."""

    titles: frozenset = frozenset()
    category: str | None = None
    select_all: bool = False

    def __post_init__(self):
        object.__setattr__(self, "titles",
                           frozenset(normalize_title(t) for t in self.titles if t.strip()))
        if self.category is not None:
            object.__setattr__(self, "category", normalize_title(self.category) or None)
        if not (self.titles or self.category or self.select_all):
            raise ValueError("selector needs a title set, a category, or select_all=True")

    @classmethod
    def everything(cls) -> "PageSelector":
        return cls(select_all=True)

    def matches(self, title: str, categories: Iterable[str]) -> bool:
        if self.select_all or title in self.titles:
            return True
        return self.category is not None and self.category in categories


def load_title_list(path) -> frozenset:
    """Read a one-title-per-line UTF-8 list into a set of normalized titles."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(t for t in (normalize_title(line) for line in fh) if t)


class _PrefixedReader(io.RawIOBase):
    """Re-attaches bytes consumed while sniffing the compression magic."""

    def __init__(self, prefix: bytes, stream):
        self._prefix = prefix
        self._stream = stream

    def readable(self):
        return True

    def readinto(self, buf):
        if self._prefix:
            n = min(len(buf), len(self._prefix))
            buf[:n] = self._prefix[:n]
            self._prefix = self._prefix[n:]
            return n
        data = self._stream.read(len(buf))
        n = len(data)
        buf[:n] = data
        return n


def open_dump(source) -> tuple[BinaryIO, list]:
    """Open a path or binary stream, transparently decompressing it.

    Compression is detected from magic bytes, never from the file name.
    Returns the decoded stream and a list of handles to close afterwards.
    """
    closers = []
    if isinstance(source, (str, os.PathLike)):
        try:
            raw = open(Path(source), "rb")
        except OSError as exc:
            raise InputError(f"cannot open dump {source}: {exc}") from exc
        closers.append(raw)
    else:
        raw = source
    head = raw.read(6)
    if not isinstance(head, bytes):
        raise InputError("dump source must be a binary stream")
    stream = io.BufferedReader(_PrefixedReader(head, raw), CHUNK_SIZE)
    kind = next((k for magic, k in _MAGIC if head.startswith(magic)), None)
    if kind == "bz2":
        stream = bz2.BZ2File(stream)
    elif kind == "gzip":
        stream = gzip.GzipFile(fileobj=stream)
    elif kind == "xz":
        stream = lzma.LZMAFile(stream)
    closers.insert(0, stream)
    return stream, closers


class _PageHandler:
    """expat callbacks that assemble <page> elements into RawPage records."""

    _CAPTURE = {
        ("page", "title"): "title",
        ("page", "ns"): "ns",
        ("page", "id"): "id",
        ("revision", "text"): "text",
        ("namespaces", "namespace"): "namespace",
    }

    def __init__(self, selector: PageSelector, language: str):
        self.selector = selector
        self.language = language
        self.stack: list[str] = []
        self.ready: list[RawPage] = []
        self.fields: dict[str, str] = {}
        self.redirect = False
        self.capture: str | None = None
        self.buf: list[str] = []
        self.ns_key: str | None = None
        self.namespace_names: dict[int, str] = {}
        self._ctx: LinkContext | None = None
        self.skipped = 0

    @property
    def ctx(self) -> LinkContext:
        if self._ctx is None:
            extra_cat = [self.namespace_names[14]] if 14 in self.namespace_names else []
            extra_file = [self.namespace_names[6]] if 6 in self.namespace_names else []
            self._ctx = LinkContext(self.language, extra_cat, extra_file)
        return self._ctx

    def start(self, name, attrs):
        parent = self.stack[-1] if self.stack else None
        self.stack.append(name)
        if name == "page":
            self.fields = {}
            self.redirect = False
        elif name == "redirect" and parent == "page":
            self.redirect = True
        field = self._CAPTURE.get((parent, name))
        if field is None:
            return
        # the page id is the first <id> directly under <page>; a later
        # revision text replaces an earlier one
        if field == "id" and "id" in self.fields:
            return
        if field == "namespace":
            self.ns_key = attrs.get("key")
        self.capture = field
        self.buf = []

    def data(self, text):
        if self.capture is not None:
            self.buf.append(text)

    def end(self, name):
        self.stack.pop()
        if self.capture is not None and self._CAPTURE.get(
                (self.stack[-1] if self.stack else None, name)) == self.capture:
            value = "".join(self.buf)
            if self.capture == "namespace":
                if self.ns_key is not None and self.ns_key.lstrip("-").isdigit():
                    self.namespace_names[int(self.ns_key)] = value.strip()
            else:
                self.fields[self.capture] = value
            self.capture = None
            self.buf = []
        if name == "page":
            page = self._finish_page()
            if page is not None:
                self.ready.append(page)
            self.fields = {}

    def _finish_page(self) -> RawPage | None:
        fields = self.fields
        title = normalize_title(fields.get("title", ""))
        text = fields.get("text", "")
        ns = fields.get("ns", "0").strip() or "0"
        if not title or ns != "0" or self.redirect:
            self.skipped += 1
            return None
        if text.lstrip()[:len(_REDIRECT_PREFIX)].lower() == _REDIRECT_PREFIX:
            self.skipped += 1
            return None
        # category parsing is only paid for when a category decides selection
        cheap = self.selector.select_all or title in self.selector.titles
        if not cheap and self.selector.category is None:
            return None
        categories, langlinks = extract_link_metadata(text, self.ctx)
        if not self.selector.matches(title, categories):
            return None
        wpid = fields.get("id", "").strip()
        return RawPage(
            title=title,
            wpid=int(wpid) if wpid.isdigit() else 0,
            language=self.language,
            wikitext=text,
            categories=tuple(categories),
            langlinks=tuple(langlinks),
        )


def stream_pages(dump_source, selector: PageSelector, language: str,
                 chunk_size: int = CHUNK_SIZE) -> Iterator[RawPage]:
    """Yield the selected main-namespace, non-redirect pages in dump order.

    `dump_source` is a path or a binary stream (plain, bz2, gzip or xz).
    Raises DumpStreamError for malformed or truncated XML and InputError
    when the compressed container cannot be decoded.
    """
    stream, closers = open_dump(dump_source)
    handler = _PageHandler(selector, language)
    parser = expat.ParserCreate()
    parser.buffer_text = True
    parser.buffer_size = chunk_size
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.data
    consumed = 0
    try:
        while True:
            try:
                chunk = stream.read(chunk_size)
            except (OSError, EOFError, lzma.LZMAError) as exc:
                raise InputError(f"cannot decompress dump: {exc}") from exc
            final = not chunk
            try:
                parser.Parse(chunk, final)
            except expat.ExpatError as exc:
                offset = parser.ErrorByteIndex
                if offset < 0:
                    offset = consumed
                raise DumpStreamError(f"malformed dump XML: {expat.ErrorString(exc.code)}",
                                      offset) from None
            consumed += len(chunk)
            if handler.ready:
                pages, handler.ready = handler.ready, []
                yield from pages
            if final:
                break
    finally:
        for fh in closers:
            fh.close()
    logger.debug("%s dump: %d non-article pages skipped", language, handler.skipped)
