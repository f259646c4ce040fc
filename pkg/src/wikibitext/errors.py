"""Exception hierarchy shared by every pipeline stage."""


class WikiBitextError(Exception):
    """Base class for all errors raised by this package."""


class DumpStreamError(WikiBitextError):
    """Malformed or truncated XML in a dump stream."""

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


class InputError(WikiBitextError):
    """An input file or stream could not be opened or decompressed."""


class EmbeddingError(WikiBitextError):
    pass


class ProviderError(EmbeddingError):
    """The embedding provider is unreachable or returned garbage."""


class MissingVectorError(EmbeddingError):
    """A sentence has no vector in a precomputed file."""

    def __init__(self, ref):
        super().__init__(f"no precomputed vector for sentence {ref!r}")
        self.ref = ref


class DegenerateInputError(EmbeddingError):
    """Text that cannot be embedded (empty after trimming)."""


class ShapeError(WikiBitextError):
    """Vectors of mismatched dimension were combined."""


class DegenerateNeighborhoodError(WikiBitextError):
    """Margin denominator vanished; the embeddings are pathological."""


class ValidationError(WikiBitextError):
    """A record or configuration violates its invariants."""


class CorpusFormatError(WikiBitextError):
    """A corpus XML file is malformed or lacks a mandatory attribute."""

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class PipelineError(WikiBitextError):
    """Wraps any failure inside run_pipeline with the stage it occurred in."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class CorpusWriteError(WikiBitextError):
    """The output sink refused the corpus bytes."""
