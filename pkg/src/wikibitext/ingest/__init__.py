"""Dump ingestion: streaming, markup stripping and sentence segmentation."""

from .dump import PageSelector, load_title_list, open_dump, stream_pages
from .pages import ArticleText, RawPage, Sentence, SentenceRef, normalize_title
from .sentences import segment_sentences, split_text
from .wikitext import LinkContext, extract_link_metadata, strip_markup, strip_wikitext

__all__ = [
    "ArticleText", "LinkContext", "PageSelector", "RawPage", "Sentence", "SentenceRef",
    "extract_link_metadata", "load_title_list", "normalize_title", "open_dump",
    "segment_sentences", "split_text", "stream_pages", "strip_markup", "strip_wikitext",
]
