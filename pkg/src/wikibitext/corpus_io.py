"""Document-level corpus XML: records, writer, reader and statistics.

One file per language. Documents sharing a docid are translations of each
other, and segment ``id="i"`` in one language aligns with ``id="i"`` in every
other language::

    <?xml version="1.0" encoding="UTF-8"?>
    <corpus language="en">
    <doc docid="Aurelia Arkotxa" wpid="51690640" language="en" topic="C6" gender="Female">
    <title>Aurelia Arkotxa</title>
    <seg id="1">She teaches classics at the University of Bayonne; ...</seg>
    </doc>
    </corpus>

The reader also accepts files without the ``<corpus>`` wrapper.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence
from xml.parsers import expat
from xml.sax.saxutils import escape

from .errors import CorpusFormatError, CorpusWriteError, ValidationError
from .gender import GenderLabel

TOPICS = tuple(f"C{i}" for i in range(1, 10))
_ILLEGAL_XML = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f￾￿]")
_ATTR_ENTITIES = {'"': "&quot;", "\t": "&#9;", "\n": "&#10;", "\r": "&#13;"}
_XML_DECL = re.compile(rb"^\s*<\?xml[^>]*\?>")
_WRAP_OPEN = b"<_corpus_wrapper>"


@dataclass(frozen=True)
class Segment:
    id: int
    text: str


@dataclass(frozen=True)
class DocumentRecord:
    docid: str
    wpid: int
    language: str
    gender: GenderLabel
    title: str
    segments: tuple[Segment, ...]
    topic: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "gender", GenderLabel(self.gender))
        object.__setattr__(self, "segments", tuple(self.segments))

    def validate(self) -> None:
        def clean(value, what):
            if (not value or value != value.strip() or "\n" in value or "\r" in value
                    or _ILLEGAL_XML.search(value)):
                raise ValidationError(f"document {self.docid!r}: bad {what} {value!r}")
            try:
                value.encode("utf-8")
            except UnicodeEncodeError:
                raise ValidationError(f"document {self.docid!r}: {what} is not encodable") from None

        clean(self.docid, "docid")
        clean(self.title, "title")
        clean(self.language, "language")
        if not isinstance(self.wpid, int) or self.wpid < 0:
            raise ValidationError(f"document {self.docid!r}: bad wpid {self.wpid!r}")
        if self.topic is not None and self.topic not in TOPICS:
            raise ValidationError(f"document {self.docid!r}: topic {self.topic!r} not in C1..C9")
        for expected, seg in enumerate(self.segments, 1):
            if seg.id != expected:
                raise ValidationError(f"document {self.docid!r}: segment ids not contiguous from 1")
            clean(seg.text, f"segment {seg.id} text")


def _attr(value: str) -> str:
    return '"' + escape(value, _ATTR_ENTITIES) + '"'


def render_document(doc: DocumentRecord) -> str:
    attrs = [("docid", doc.docid), ("wpid", str(doc.wpid)), ("language", doc.language)]
    if doc.topic is not None:
        attrs.append(("topic", doc.topic))
    attrs.append(("gender", doc.gender.value))
    head = "<doc " + " ".join(f"{k}={_attr(v)}" for k, v in attrs) + ">\n"
    body = [head, f"<title>{escape(doc.title)}</title>\n"]
    body.extend(f'<seg id="{s.id}">{escape(s.text)}</seg>\n' for s in doc.segments)
    body.append("</doc>\n")
    return "".join(body)


def write_corpus_xml(documents: Sequence[DocumentRecord], language: str, sink: BinaryIO) -> int:
    """Write one language's documents, sorted by docid; returns bytes written.

    Every document is validated before the first byte goes out.
    """
    seen = set()
    for doc in documents:
        doc.validate()
        if doc.language != language:
            raise ValidationError(f"document {doc.docid!r} is {doc.language}, not {language}")
        if doc.docid in seen:
            raise ValidationError(f"duplicate docid {doc.docid!r}")
        seen.add(doc.docid)
    parts = ['<?xml version="1.0" encoding="UTF-8"?>\n', f"<corpus language={_attr(language)}>\n"]
    parts.extend(render_document(d) for d in sorted(documents, key=lambda d: d.docid))
    parts.append("</corpus>\n")
    data = "".join(parts).encode("utf-8")
    try:
        sink.write(data)
    except (OSError, ValueError) as exc:
        raise CorpusWriteError(f"cannot write corpus: {exc}") from exc
    return len(data)


class _Reader:
    def __init__(self, parser):
        self.parser = parser
        self.docs: list[DocumentRecord] = []
        self.doc: dict | None = None
        self.field: str | None = None
        self.buf: list[str] = []
        self.seg_id: int | None = None

    def where(self):
        line = self.parser.CurrentLineNumber
        col = self.parser.CurrentColumnNumber
        if line == 1:
            col -= len(_WRAP_OPEN)
        return line, col

    def fail(self, message):
        raise CorpusFormatError(message, *self.where())

    def start(self, name, attrs):
        if name == "doc":
            if self.doc is not None:
                self.fail("nested <doc>")
            for key in ("docid", "wpid", "language", "gender"):
                if key not in attrs:
                    self.fail(f"<doc> without mandatory attribute {key!r}")
            wpid = attrs["wpid"].strip()
            if not wpid.isdigit():
                self.fail(f"wpid {wpid!r} is not a non-negative integer")
            try:
                gender = GenderLabel(attrs["gender"].strip())
            except ValueError:
                self.fail(f"unknown gender {attrs['gender']!r}")
            topic = attrs.get("topic")
            self.doc = dict(docid=attrs["docid"].strip(), wpid=int(wpid),
                            language=attrs["language"].strip(), gender=gender,
                            topic=topic.strip() if topic is not None else None,
                            title=None, segments=[], where=self.where())
        elif name in ("title", "seg"):
            if self.doc is None:
                self.fail(f"<{name}> outside <doc>")
            if name == "seg":
                sid = attrs.get("id", "").strip()
                if not sid.isdigit():
                    self.fail("<seg> without a numeric id")
                self.seg_id = int(sid)
            self.field = name
            self.buf = []
        elif name not in ("corpus", "_corpus_wrapper"):
            self.fail(f"unexpected element <{name}>")

    def data(self, text):
        if self.field is not None:
            self.buf.append(text)

    def end(self, name):
        if name in ("title", "seg") and self.doc is not None:
            text = "".join(self.buf).strip()
            if name == "title":
                self.doc["title"] = text
            else:
                self.doc["segments"].append(Segment(self.seg_id, text))
            self.field = None
        elif name == "doc":
            info = self.doc
            self.doc = None
            if info["title"] is None:
                raise CorpusFormatError(f"document {info['docid']!r} has no <title>", *info["where"])
            record = DocumentRecord(
                docid=info["docid"], wpid=info["wpid"], language=info["language"],
                gender=info["gender"], title=info["title"],
                segments=tuple(info["segments"]), topic=info["topic"])
            try:
                record.validate()
            except ValidationError as exc:
                raise CorpusFormatError(str(exc), *info["where"]) from None
            self.docs.append(record)


def read_corpus_xml(source) -> list[DocumentRecord]:
    """Parse a corpus file (path, bytes or binary stream) back into records."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    # blank out the declaration in place so reported columns stay right
    data = _XML_DECL.sub(lambda m: b" " * len(m.group()), data, count=1)
    parser = expat.ParserCreate("UTF-8")
    reader = _Reader(parser)
    parser.StartElementHandler = reader.start
    parser.EndElementHandler = reader.end
    parser.CharacterDataHandler = reader.data
    parser.buffer_text = True
    try:
        parser.Parse(_WRAP_OPEN + data + b"</_corpus_wrapper>", True)
    except expat.ExpatError as exc:
        col = exc.offset - len(_WRAP_OPEN) if exc.lineno == 1 else exc.offset
        raise CorpusFormatError(f"malformed corpus XML: {expat.ErrorString(exc.code)}",
                                exc.lineno, col) from None
    return reader.docs


# --- statistics -------------------------------------------------------------

def words_of(text: str) -> list[str]:
    """Whitespace tokens with leading/trailing punctuation removed; empties dropped."""
    out = []
    for tok in text.split():
        start, end = 0, len(tok)
        while start < end and unicodedata.category(tok[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(tok[end - 1]).startswith("P"):
            end -= 1
        if start < end:
            out.append(tok[start:end])
    return out


@dataclass(frozen=True)
class GenderStats:
    documents: int = 0
    sentences: int = 0
    avg_sentences_per_doc: float = 0.0
    words: int = 0
    avg_words_per_doc: float = 0.0
    vocabulary: int = 0


@dataclass(frozen=True)
class CorpusStats:
    language: str
    by_gender: dict = field(default_factory=dict)   # GenderLabel -> GenderStats

    def __getitem__(self, gender) -> GenderStats:
        return self.by_gender.get(GenderLabel(gender), GenderStats())


def compute_stats(documents: Iterable[DocumentRecord], language: str) -> CorpusStats:
    """Per-gender counts in the style of a corpus statistics table."""
    acc: dict[GenderLabel, dict] = {}
    for doc in documents:
        if doc.language != language:
            continue
        a = acc.setdefault(doc.gender, {"docs": 0, "sents": 0, "words": 0, "vocab": set()})
        a["docs"] += 1
        a["sents"] += len(doc.segments)
        for seg in doc.segments:
            ws = words_of(seg.text)
            a["words"] += len(ws)
            a["vocab"].update(w.lower() for w in ws)
    by_gender = {}
    for gender in (GenderLabel.FEMALE, GenderLabel.MALE, GenderLabel.UNKNOWN):
        a = acc.get(gender)
        if a is None:
            if gender is not GenderLabel.UNKNOWN:
                by_gender[gender] = GenderStats()
            continue
        by_gender[gender] = GenderStats(
            documents=a["docs"], sentences=a["sents"],
            avg_sentences_per_doc=round(a["sents"] / a["docs"], 1),
            words=a["words"], avg_words_per_doc=round(a["words"] / a["docs"], 1),
            vocabulary=len(a["vocab"]))
    return CorpusStats(language, by_gender)


_ROWS = (
    ("Documents", "documents", "{:d}"),
    ("Sentences", "sentences", "{:d}"),
    ("Average sent/doc", "avg_sentences_per_doc", "{:.1f}"),
    ("Words", "words", "{:d}"),
    ("Average words/doc", "avg_words_per_doc", "{:.1f}"),
    ("Vocabulary", "vocabulary", "{:d}"),
)
_SHORT = {GenderLabel.FEMALE: "F", GenderLabel.MALE: "M", GenderLabel.UNKNOWN: "U"}


def format_stats_report(stats: Sequence[CorpusStats]) -> str:
    """Aligned text table: one column per language x gender."""
    columns = [(s.language, g) for s in stats for g in s.by_gender]
    lookup = {s.language: s for s in stats}
    cells = [["", *[lang for lang, _ in columns]], ["", *[_SHORT[g] for _, g in columns]]]
    for label, attr, fmt in _ROWS:
        cells.append([label, *[fmt.format(getattr(lookup[lang][g], attr)) for lang, g in columns]])
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = []
    for row in cells:
        parts = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines) + "\n"
