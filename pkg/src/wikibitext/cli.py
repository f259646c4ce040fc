"""Command line entry point.

    wikibitext extract --config run.ini [overrides...]
    wikibitext stats corpus.en.xml corpus.es.xml
    wikibitext validate corpus.en.xml corpus.es.xml

Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import io
import logging
import sys
from pathlib import Path

from .corpus_io import compute_stats, format_stats_report, read_corpus_xml, write_corpus_xml
from .errors import CorpusFormatError, PipelineError, ValidationError, WikiBitextError
from .pipeline import config_from_parser, load_config, run_pipeline

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("wikibitext")

# flag -> "section.key" in the config file
_FLAG_KEYS = {
    "languages": "pipeline.languages",
    "output": "pipeline.output",
    "title_list": "pipeline.title_list",
    "category": "pipeline.category",
    "topics": "pipeline.topics",
    "pronouns": "pipeline.pronouns",
    "workers": "pipeline.workers",
    "embedding_kind": "embedding.kind",
    "embedding_dimension": "embedding.dimension",
    "embedding_location": "embedding.location",
    "k": "mining.k",
    "margin_threshold": "mining.margin_threshold",
    "strategy": "mining.strategy",
    "max_length_ratio": "cleaning.max_length_ratio",
    "length_unit": "cleaning.length_unit",
    "balance": "balance.mode",
    "seed": "balance.seed",
}


def _add_extract_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI-style run configuration")
    p.add_argument("--languages", help="space or comma separated, pivot first (e.g. 'en es ca')")
    p.add_argument("--dump", action="append", default=[], metavar="LANG=PATH",
                   help="dump file for one language; repeat per language")
    p.add_argument("--output", help="output directory")
    p.add_argument("--title-list", dest="title_list", help="one pivot title per line")
    p.add_argument("--category", help="select pivot pages in this category")
    p.add_argument("--topics", help="docid<TAB>C1..C9 annotation file")
    p.add_argument("--pronouns", help="pronoun lexicon file (lang<TAB>F|M<TAB>token)")
    p.add_argument("--workers", type=int)
    p.add_argument("--embedding-kind", dest="embedding_kind",
                   choices=["precomputed-file", "external-service", "builtin-fallback"])
    p.add_argument("--embedding-dimension", dest="embedding_dimension", type=int)
    p.add_argument("--embedding-location", dest="embedding_location",
                   help="vector file path or service URL")
    p.add_argument("--k", type=int, help="neighbourhood size for the margin")
    p.add_argument("--margin-threshold", dest="margin_threshold", type=float)
    p.add_argument("--strategy", choices=["max", "forward", "backward", "intersection"])
    p.add_argument("--max-length-ratio", dest="max_length_ratio", type=float)
    p.add_argument("--length-unit", dest="length_unit", choices=["characters", "tokens"])
    p.add_argument("--inclusive-length-bound", dest="inclusive_bound", action="store_true",
                   default=None, help="also drop tuples exactly at the length bound")
    p.add_argument("--balance", choices=["sentence-level", "document-level", "off"])
    p.add_argument("--no-balance", dest="balance", action="store_const", const="off",
                   help="disable gender balancing")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-document-scoping", dest="document_scoping", action="store_false",
                   default=None, help="mine across whole language corpora")
    p.add_argument("--write-pairs", dest="write_pairs", action="store_true", default=None,
                   help="also dump mined pairs as TSV")


def _build_config(args):
    overrides = {key: getattr(args, flag) for flag, key in _FLAG_KEYS.items()
                 if getattr(args, flag) is not None}
    for item in args.dump:
        lang, sep, path = item.partition("=")
        if not sep:
            raise ValidationError(f"--dump expects LANG=PATH, got {item!r}")
        overrides[f"dumps.{lang.strip()}"] = str(Path(path).resolve())
    for flag in ("inclusive_bound", "document_scoping", "write_pairs"):
        value = getattr(args, flag)
        if value is not None:
            section = "cleaning" if flag == "inclusive_bound" else "pipeline"
            overrides[f"{section}.{flag}"] = "yes" if value else "no"
    if args.config is not None:
        return load_config(args.config, overrides)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))
    return config_from_parser(parser, Path.cwd())


def cmd_extract(args) -> int:
    config = _build_config(args)
    result = run_pipeline(config)
    sys.stdout.write(result.stats_report)
    for path in result.files:
        logger.info("wrote %s", path)
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = []
    for path in args.corpus:
        docs = read_corpus_xml(path)
        languages = sorted({d.language for d in docs}) or [Path(path).stem.rpartition(".")[2]]
        stats.extend(compute_stats(docs, lang) for lang in languages)
    sys.stdout.write(format_stats_report(stats))
    return EXIT_OK


def validate_files(paths) -> list[str]:
    """Round-trip and cross-language checks; returns a list of problems."""
    problems = []
    corpora = {}
    for path in paths:
        docs = read_corpus_xml(path)
        langs = {d.language for d in docs}
        if len(langs) > 1:
            problems.append(f"{path}: mixes languages {sorted(langs)}")
            continue
        lang = langs.pop() if langs else str(path)
        if docs:
            buf = io.BytesIO()
            write_corpus_xml(docs, lang, buf)
            if read_corpus_xml(buf.getvalue()) != sorted(docs, key=lambda d: d.docid):
                problems.append(f"{path}: write/read round trip changed the records")
        corpora[lang] = {d.docid: d for d in docs}
    if len(corpora) > 1:
        reference_lang = next(iter(corpora))
        reference = corpora[reference_lang]
        for lang, docs in corpora.items():
            if set(docs) != set(reference):
                missing = sorted(set(reference) ^ set(docs))[:5]
                problems.append(f"{lang}: docid set differs from {reference_lang} (e.g. {missing})")
            for docid in sorted(set(docs) & set(reference)):
                a, b = reference[docid], docs[docid]
                if [s.id for s in a.segments] != [s.id for s in b.segments]:
                    problems.append(f"{lang}: seg ids of {docid!r} differ from {reference_lang}")
                if a.gender != b.gender:
                    problems.append(f"{lang}: gender of {docid!r} differs from {reference_lang}")
    return problems


def cmd_validate(args) -> int:
    problems = validate_files(args.corpus)
    for p in problems:
        print(f"FAIL {p}")
    if not problems:
        print(f"OK {len(args.corpus)} file(s)")
    return EXIT_VALIDATION if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wikibitext", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    # also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", parents=[common], help="run the full mining pipeline")
    _add_extract_args(p)
    p.set_defaults(func=cmd_extract)
    p = sub.add_parser("stats", parents=[common], help="print corpus statistics for XML files")
    p.add_argument("corpus", nargs="+", type=Path)
    p.set_defaults(func=cmd_stats)
    p = sub.add_parser("validate", parents=[common], help="round-trip and cross-language consistency check")
    p.add_argument("corpus", nargs="+", type=Path)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, CorpusFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(exc.cause, ValidationError) else EXIT_RUNTIME
    except (WikiBitextError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
