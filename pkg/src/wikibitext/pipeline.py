"""End-to-end orchestration: dumps in, per-language corpus XML and stats out."""

from __future__ import annotations

import configparser
import contextlib
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from .article_index import IndexSummary, resolve_interlanguage, select_complete_entries
from .cleaning import CleaningConfig, TextTuple, audit_lines, clean_tuples
from .corpus_io import (DocumentRecord, Segment, TOPICS, compute_stats, format_stats_report,
                        write_corpus_xml)
from .embeddings import EmbeddingProviderSpec, embed_batch, make_provider
from .errors import PipelineError, ValidationError, WikiBitextError
from .gender import BalanceConfig, GenderLabel, apply_plan, balance_plan, classify_gender, load_lexicons
from .ingest import (PageSelector, load_title_list, normalize_title, segment_sentences,
                     stream_pages, strip_wikitext)
from .ingest.pages import is_language_code
from .mining import MiningConfig, intersect_multiway, mine_many, pairs_tsv

logger = logging.getLogger(__name__)

EMBED_BATCH = 4096


@dataclass
class PipelineConfig:
    languages: tuple[str, ...]
    dumps: dict
    output_dir: Path
    title_list: Path | None = None
    category: str | None = None
    embedding: EmbeddingProviderSpec = field(
        default_factory=lambda: EmbeddingProviderSpec("builtin-fallback", 256))
    mining: MiningConfig = field(default_factory=MiningConfig)
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    document_scoping: bool = True
    workers: int = 1
    topics_file: Path | None = None
    pronoun_file: Path | None = None
    write_pairs: bool = False

    @property
    def pivot(self) -> str:
        return self.languages[0]

    def validate(self) -> None:
        langs = list(self.languages)
        if len(langs) < 2:
            raise ValidationError("at least two languages are required")
        if len(set(langs)) != len(langs):
            raise ValidationError(f"duplicate language in {langs}")
        for lang in langs:
            if not is_language_code(lang):
                raise ValidationError(f"bad language code {lang!r}")
            if lang not in self.dumps:
                raise ValidationError(f"no dump configured for {lang}")
            if not Path(self.dumps[lang]).is_file():
                raise ValidationError(f"dump for {lang} not found: {self.dumps[lang]}")
        if self.title_list is None and not self.category:
            raise ValidationError("need a title list, a category, or both")
        if self.title_list is not None and not Path(self.title_list).is_file():
            raise ValidationError(f"title list not found: {self.title_list}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass
class PipelineResult:
    status: int
    files: list
    stats_report: str
    summary: IndexSummary


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except PipelineError:
        raise
    except (WikiBitextError, OSError, ValueError) as exc:
        raise PipelineError(name, exc) from exc


def load_topics(path) -> dict[str, str]:
    """Read a "docid<TAB>topic" annotation file."""
    topics = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            docid, sep, topic = line.partition("\t")
            topic = topic.strip()
            if not sep or topic not in TOPICS:
                raise ValidationError(f"{path}:{n}: expected 'docid<TAB>C1..C9'")
            topics[normalize_title(docid)] = topic
    return topics


def _retrieve(dump, titles, language):
    selector = PageSelector(titles=titles)
    return {page.key: strip_wikitext(page) for page in stream_pages(dump, selector, language)}


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage and write the corpus; partial outputs never survive a failure."""
    with _stage("config"):
        config.validate()
    pivot = config.pivot
    targets = list(config.languages[1:])
    summary = IndexSummary()

    with _stage("ingest"):
        titles = load_title_list(config.title_list) if config.title_list else frozenset()
        selector = PageSelector(titles=titles, category=config.category)
        pivot_pages = list(stream_pages(config.dumps[pivot], selector, pivot))
        logger.info("%s: %d pivot pages selected", pivot, len(pivot_pages))

    with _stage("interlanguage"):
        mapping = resolve_interlanguage(pivot_pages, targets, summary)
        if not mapping.pivot:
            mapping = replace(mapping, pivot=pivot)

    with _stage("ingest"):
        retrieved = {}
        for page in pivot_pages:
            if page.title in mapping.entries:
                retrieved[page.key] = strip_wikitext(page)
        del pivot_pages
        for lang in targets:
            wanted = mapping.titles_for(lang)
            if wanted:
                retrieved.update(_retrieve(config.dumps[lang], wanted, lang))

    with _stage("selection"):
        complete = select_complete_entries(mapping, retrieved, summary)
        logger.info("%d complete entries", len(complete))

    with _stage("segmentation"):
        sentences = {}
        for entry in complete:
            for lang in config.languages:
                key = (lang, entry.titles[lang])
                sentences[key] = segment_sentences(retrieved[key])

    with _stage("embedding"):
        provider = make_provider(config.embedding)
        vectors = {}
        for lang in config.languages:
            batch = [s for entry in complete for s in sentences[(lang, entry.titles[lang])]]
            for start in range(0, len(batch), EMBED_BATCH):
                for vec in embed_batch(provider, batch[start:start + EMBED_BATCH]):
                    vectors[vec.sentence_ref] = vec

    def vecs(lang, title):
        return [vectors[s.ref] for s in sentences[(lang, title)]]

    with _stage("mining"):
        if config.document_scoping:
            jobs = [((entry.pivot_title, lang), vecs(pivot, entry.pivot_title),
                     vecs(lang, entry.titles[lang]))
                    for entry in complete for lang in targets]
        else:
            everything = {lang: [v for e in complete for v in vecs(lang, e.titles[lang])]
                          for lang in config.languages}
            jobs = [((None, lang), everything[pivot], everything[lang]) for lang in targets]
        mined = mine_many(jobs, config.mining, config.workers)
        pairwise = {lang: [] for lang in targets}
        for (_, lang), pairs in mined:
            pairwise[lang].extend(pairs)
        aligned = intersect_multiway(pairwise)

    with _stage("cleaning"):
        text_of = {s.ref: s.text for group in sentences.values() for s in group}
        tuples = []
        for t in aligned:
            texts = {pivot: text_of[t.pivot_ref]}
            texts.update({lang: text_of[ref] for lang, (ref, _) in t.per_language.items()})
            tuples.append(TextTuple(t, texts))
        rejected = []
        kept = clean_tuples(tuples, config.cleaning, rejected)

    with _stage("gender"):
        lexicons = load_lexicons(config.pronoun_file)
        lexicon = lexicons.get(pivot)
        if lexicon is None:
            logger.warning("no pronoun lexicon for %s; every document is Unknown", pivot)
        topics = load_topics(config.topics_file) if config.topics_file else {}
        by_doc: dict[str, list[TextTuple]] = {}
        for t in kept:
            by_doc.setdefault(t.aligned.pivot_ref.title, []).append(t)
        entries = {e.pivot_title: e for e in complete}
        documents = {lang: [] for lang in config.languages}
        for docid in sorted(by_doc):
            entry = entries[docid]
            group = sorted(by_doc[docid], key=lambda t: t.aligned.pivot_ref)
            gender = (classify_gender(retrieved[(pivot, docid)], lexicon)
                      if lexicon is not None else GenderLabel.UNKNOWN)
            for lang in config.languages:
                segs = tuple(Segment(i, t.texts[lang]) for i, t in enumerate(group, 1))
                documents[lang].append(DocumentRecord(
                    docid=docid, wpid=entry.wpids[lang], language=lang, gender=gender,
                    title=entry.titles[lang], segments=segs, topic=topics.get(docid)))

    with _stage("balance"):
        plan = balance_plan(documents[pivot], config.balance)
        documents = {lang: apply_plan(docs, plan) for lang, docs in documents.items()}

    with _stage("output"):
        stats = [compute_stats(documents[lang], lang) for lang in config.languages]
        report = format_stats_report(stats)
        files = _write_outputs(config, documents, report, summary, rejected, pairwise)
    return PipelineResult(0, files, report, summary)


def _write_outputs(config, documents, report, summary, rejected, pairwise) -> list[Path]:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        names = []
        for lang in config.languages:
            name = f"corpus.{lang}.xml"
            with open(staging / name, "wb") as fh:
                write_corpus_xml(documents[lang], lang, fh)
            names.append(name)
        (staging / "stats.txt").write_text(report, encoding="utf-8")
        (staging / "index_summary.txt").write_text(summary.report(), encoding="utf-8")
        (staging / "rejected.tsv").write_text(audit_lines(rejected), encoding="utf-8")
        names += ["stats.txt", "index_summary.txt", "rejected.tsv"]
        if config.write_pairs:
            for lang, pairs in pairwise.items():
                name = f"pairs.{config.pivot}-{lang}.tsv"
                (staging / name).write_text(pairs_tsv(pairs), encoding="utf-8")
                names.append(name)
        for name in names:
            os.replace(staging / name, out_dir / name)
        return [out_dir / n for n in names]
    finally:
        shutil.rmtree(staging, ignore_errors=True)


# --- declarative config file ------------------------------------------------

def _path(base: Path, value):
    if value is None or not str(value).strip():
        return None
    p = Path(os.path.expanduser(str(value).strip()))
    return p if p.is_absolute() else base / p


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from an INI-style file.

    Relative paths are resolved against the file's directory. `overrides`
    maps "section.key" to a string and wins over the file.
    """
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path, encoding="utf-8"):
        raise ValidationError(f"cannot read config file {path}")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))
    return config_from_parser(parser, path.parent)


def config_from_parser(parser: configparser.ConfigParser, base: Path) -> PipelineConfig:
    def get(section, key, fallback=None):
        return parser.get(section, key, fallback=fallback) if parser.has_section(section) else fallback

    try:
        languages = tuple((get("pipeline", "languages") or "").replace(",", " ").split())
        dumps = {lang: _path(base, parser.get("dumps", lang))
                 for lang in (parser.options("dumps") if parser.has_section("dumps") else [])}
        out = _path(base, get("pipeline", "output", "out"))
        embedding = EmbeddingProviderSpec(
            kind=get("embedding", "kind", "builtin-fallback"),
            dimension=int(get("embedding", "dimension", "256")),
            location=(str(_path(base, get("embedding", "location")))
                      if get("embedding", "kind", "") == "precomputed-file"
                      else (get("embedding", "location") or None)))
        mining = MiningConfig(
            k=int(get("mining", "k", "4")),
            margin_threshold=float(get("mining", "margin_threshold", "1.04")),
            retrieval_strategy=get("mining", "strategy", "max"))
        cleaning = CleaningConfig(
            max_length_ratio=float(get("cleaning", "max_length_ratio", "0.2")),
            length_unit=get("cleaning", "length_unit", "characters"),
            inclusive_bound=_bool(get("cleaning", "inclusive_bound", "no")))
        balance = BalanceConfig(mode=get("balance", "mode", "sentence-level"),
                                seed=int(get("balance", "seed", "0")))
        return PipelineConfig(
            languages=languages, dumps=dumps, output_dir=out,
            title_list=_path(base, get("pipeline", "title_list")),
            category=(get("pipeline", "category") or None),
            embedding=embedding, mining=mining, cleaning=cleaning, balance=balance,
            document_scoping=_bool(get("pipeline", "document_scoping", "yes")),
            workers=int(get("pipeline", "workers", "1")),
            topics_file=_path(base, get("pipeline", "topics")),
            pronoun_file=_path(base, get("pipeline", "pronouns")),
            write_pairs=_bool(get("pipeline", "write_pairs", "no")),
        )
    except (ValueError, configparser.Error) as exc:
        raise ValidationError(f"invalid configuration: {exc}") from exc


def _bool(value) -> bool:
    v = str(value).strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off", ""):
        return False
    raise ValueError(f"not a boolean: {value!r}")
