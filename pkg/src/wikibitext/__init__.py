"""Mine document-level, gender-balanced N-way parallel corpora from Wikipedia dumps."""

__version__ = "0.1.0"
