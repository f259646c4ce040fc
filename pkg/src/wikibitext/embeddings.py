"""Sentence embedding providers behind one contract.

Real multilingual vectors come either from a precomputed binary file or from
an external encoding service. The builtin fallback (hashed character n-grams)
exists for hermetic tests and offline smoke runs; it is not multilingual.

Vector file layout, all little-endian::

    header   magic b"WBVF" | uint32 version | uint32 dimension | uint64 count
    record   uint32 key_len | key (UTF-8, "language\\ttitle\\tindex") | dimension x float32

A sidecar ``<file>.idx`` maps keys to record offsets::

    header   magic b"WBVI" | uint32 version | uint64 count
    entry    uint32 key_len | key | uint64 offset
"""

from __future__ import annotations

import functools
import hashlib
import os
import struct
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, MissingVectorError, ProviderError, ShapeError
from .ingest.pages import Sentence, SentenceRef

KINDS = ("precomputed-file", "external-service", "builtin-fallback")

VEC_MAGIC = b"WBVF"
IDX_MAGIC = b"WBVI"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_IDX_HEADER = struct.Struct("<4sIQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

NGRAM_SIZES = (2, 3, 4)
_HASH_KEY = b"wikibitext-ngram-v1"


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    kind: str
    dimension: int
    location: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dimension < 2:
            raise ValueError("embedding dimension must be >= 2")
        if self.kind != "builtin-fallback" and not self.location:
            raise ValueError(f"{self.kind} provider needs a location")


@dataclass(frozen=True, eq=False)
class SentenceVector:
    values: np.ndarray
    sentence_ref: SentenceRef | None = None

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


def unit_normalize(matrix: np.ndarray) -> np.ndarray:
    """Row-wise L2 normalization in float64."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise ProviderError("provider returned a zero or non-finite vector")
    return matrix / norms


# --- builtin fallback -------------------------------------------------------

@functools.lru_cache(maxsize=1 << 18)
def _ngram_hash(ngram: str) -> int:
    digest = hashlib.blake2b(ngram.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    return int.from_bytes(digest, "little")


def fallback_vector(text: str, dimension: int) -> np.ndarray:
    """Hashed bag of character 2/3/4-grams of the lowercased text, L2-normalized."""
    if dimension < 2:
        raise ValueError("embedding dimension must be >= 2")
    text = text.strip().lower()
    if not text:
        raise DegenerateInputError("cannot embed empty text")
    vec = np.zeros(dimension, dtype=np.float64)
    grams = 0
    for n in NGRAM_SIZES:
        for i in range(len(text) - n + 1):
            vec[_ngram_hash(text[i:i + n]) % dimension] += 1.0
            grams += 1
    if grams == 0:
        # a single character has no n-grams; fall back to the character itself
        vec[_ngram_hash(text) % dimension] = 1.0
    return vec / np.linalg.norm(vec)


def builtin_fallback_embed(sentence_text: str, dimension: int,
                           ref: SentenceRef | None = None) -> SentenceVector:
    return SentenceVector(fallback_vector(sentence_text, dimension), ref)


# --- vector files -----------------------------------------------------------

def _index_path(path) -> Path:
    return Path(str(path) + ".idx")


class VectorFileWriter:
    """Writes a vector file and its sidecar offset table.

    The count in the header is patched on close, so records can be streamed.
    """

    def __init__(self, path, dimension: int):
        self.path = Path(path)
        self.dimension = dimension
        self._fh = open(self.path, "wb")
        self._fh.write(_HEADER.pack(VEC_MAGIC, FORMAT_VERSION, dimension, 0))
        self._offsets: list[tuple[bytes, int]] = []

    def add(self, key: str, values) -> None:
        values = np.asarray(values, dtype="<f4")
        if values.shape != (self.dimension,):
            raise ShapeError(f"vector for {key!r} has shape {values.shape}, "
                             f"expected ({self.dimension},)")
        kb = key.encode("utf-8")
        self._offsets.append((kb, self._fh.tell()))
        self._fh.write(_U32.pack(len(kb)) + kb + values.tobytes())

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(VEC_MAGIC, FORMAT_VERSION, self.dimension,
                                    len(self._offsets)))
        self._fh.close()
        with open(_index_path(self.path), "wb") as idx:
            idx.write(_IDX_HEADER.pack(IDX_MAGIC, FORMAT_VERSION, len(self._offsets)))
            for kb, off in self._offsets:
                idx.write(_U32.pack(len(kb)) + kb + _U64.pack(off))

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_vector_file(path, dimension: int, items: Iterable[tuple[str, Sequence[float]]]) -> None:
    with VectorFileWriter(path, dimension) as writer:
        for key, values in items:
            writer.add(key, values)


def encode_records(keys: Sequence[str], matrix: np.ndarray) -> bytes:
    """Header-less record stream, as returned by an encoding service."""
    matrix = np.asarray(matrix, dtype="<f4")
    parts = []
    for key, row in zip(keys, matrix):
        kb = key.encode("utf-8")
        parts.append(_U32.pack(len(kb)) + kb + row.tobytes())
    return b"".join(parts)


def decode_records(data: bytes, dimension: int) -> list[tuple[str, np.ndarray]]:
    out = []
    pos = 0
    width = 4 * dimension
    while pos < len(data):
        if pos + 4 > len(data):
            raise ProviderError("truncated record header")
        (klen,) = _U32.unpack_from(data, pos)
        pos += 4
        end = pos + klen + width
        if end > len(data):
            raise ProviderError("truncated vector record")
        key = data[pos:pos + klen].decode("utf-8")
        vec = np.frombuffer(data, dtype="<f4", count=dimension, offset=pos + klen)
        out.append((key, vec))
        pos = end
    return out


class VectorFile:
    """Read-only random access to a vector file; safe to share across threads."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fd = os.open(self.path, os.O_RDONLY)
        except OSError as exc:
            raise ProviderError(f"cannot open vector file {path}: {exc}") from exc
        head = os.pread(self._fd, _HEADER.size, 0)
        if len(head) != _HEADER.size:
            raise ProviderError(f"{path}: truncated header")
        magic, version, self.dimension, self.count = _HEADER.unpack(head)
        if magic != VEC_MAGIC or version != FORMAT_VERSION:
            raise ProviderError(f"{path}: not a version-{FORMAT_VERSION} vector file")
        self._record_size = 4 * self.dimension
        self.offsets = self._load_index() or self._scan()

    def _load_index(self) -> dict[str, int] | None:
        idx = _index_path(self.path)
        if not idx.is_file():
            return None
        data = idx.read_bytes()
        if len(data) < _IDX_HEADER.size:
            return None
        magic, version, count = _IDX_HEADER.unpack_from(data, 0)
        if magic != IDX_MAGIC or version != FORMAT_VERSION or count != self.count:
            return None
        offsets = {}
        pos = _IDX_HEADER.size
        for _ in range(count):
            (klen,) = _U32.unpack_from(data, pos)
            pos += 4
            key = data[pos:pos + klen].decode("utf-8")
            pos += klen
            (offsets[key],) = _U64.unpack_from(data, pos)
            pos += 8
        return offsets

    def _scan(self) -> dict[str, int]:
        offsets = {}
        pos = _HEADER.size
        for _ in range(self.count):
            raw = os.pread(self._fd, 4, pos)
            if len(raw) != 4:
                raise ProviderError(f"{self.path}: truncated record at {pos}")
            (klen,) = _U32.unpack(raw)
            key = os.pread(self._fd, klen, pos + 4).decode("utf-8")
            offsets[key] = pos
            pos += 4 + klen + self._record_size
        return offsets

    def get(self, key: str) -> np.ndarray | None:
        off = self.offsets.get(key)
        if off is None:
            return None
        klen = len(key.encode("utf-8"))
        raw = os.pread(self._fd, self._record_size, off + 4 + klen)
        if len(raw) != self._record_size:
            raise ProviderError(f"{self.path}: truncated record for {key!r}")
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def close(self):
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None


# --- providers --------------------------------------------------------------

class FallbackProvider:
    def __init__(self, spec: EmbeddingProviderSpec):
        self.spec = spec

    def raw_vectors(self, sentences: Sequence[Sentence]) -> np.ndarray:
        return np.stack([fallback_vector(s.text, self.spec.dimension) for s in sentences])


class PrecomputedProvider:
    def __init__(self, spec: EmbeddingProviderSpec):
        self.spec = spec
        self.file = VectorFile(spec.location)
        if self.file.dimension != spec.dimension:
            raise ShapeError(f"vector file has dimension {self.file.dimension}, "
                             f"configured {spec.dimension}")

    def raw_vectors(self, sentences: Sequence[Sentence]) -> np.ndarray:
        rows = []
        for s in sentences:
            vec = self.file.get(s.ref.key())
            if vec is None:
                raise MissingVectorError(s.ref)
            rows.append(vec)
        return np.stack(rows)


class ServiceProvider:
    """POSTs newline-delimited sentences per language; expects records back."""

    def __init__(self, spec: EmbeddingProviderSpec, timeout: float = 60.0, max_parallel: int = 4):
        self.spec = spec
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max_parallel)

    def _request(self, language: str, texts: Sequence[str]) -> np.ndarray:
        url = self.spec.location
        sep = "&" if "?" in url else "?"
        url = f"{url}{sep}{urllib.parse.urlencode({'language': language})}"
        body = "\n".join(texts).encode("utf-8")
        req = urllib.request.Request(url, data=body, method="POST",
                                     headers={"Content-Type": "text/plain; charset=utf-8"})
        try:
            with self._slots, urllib.request.urlopen(req, timeout=self.timeout) as resp:
                data = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise ProviderError(f"embedding service {self.spec.location} unavailable: {exc}") from exc
        records = decode_records(data, self.spec.dimension)
        if len(records) != len(texts):
            raise ProviderError(f"service returned {len(records)} vectors for {len(texts)} sentences")
        return np.stack([vec for _, vec in records]).astype(np.float64)

    def raw_vectors(self, sentences: Sequence[Sentence]) -> np.ndarray:
        out = np.empty((len(sentences), self.spec.dimension), dtype=np.float64)
        by_lang: dict[str, list[int]] = {}
        for i, s in enumerate(sentences):
            by_lang.setdefault(s.article_key[0], []).append(i)
        for lang, idx in by_lang.items():
            out[idx] = self._request(lang, [sentences[i].text for i in idx])
        return out


_PROVIDERS = {
    "builtin-fallback": FallbackProvider,
    "precomputed-file": PrecomputedProvider,
    "external-service": ServiceProvider,
}


def make_provider(spec: EmbeddingProviderSpec):
    return _PROVIDERS[spec.kind](spec)


def embed_matrix(provider, sentences: Sequence[Sentence]) -> np.ndarray:
    """Unit-norm float64 matrix, one row per sentence, in input order."""
    if isinstance(provider, EmbeddingProviderSpec):
        provider = make_provider(provider)
    if not sentences:
        return np.zeros((0, provider.spec.dimension))
    raw = np.asarray(provider.raw_vectors(sentences), dtype=np.float64)
    if raw.shape != (len(sentences), provider.spec.dimension):
        raise ShapeError(f"provider returned shape {raw.shape}, expected "
                         f"({len(sentences)}, {provider.spec.dimension})")
    return unit_normalize(raw)


def embed_batch(provider, sentences: Sequence[Sentence]) -> list[SentenceVector]:
    """Embed sentences with a provider (or provider spec); vectors are renormalized."""
    matrix = embed_matrix(provider, sentences)
    return [SentenceVector(row, s.ref) for row, s in zip(matrix, sentences)]
