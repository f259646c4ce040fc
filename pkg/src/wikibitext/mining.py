"""Margin-based parallel sentence mining.

A candidate pair (x, y) is scored by

    margin(x, y) = cos(x, y) / ( sum_{z in NN_k(x)} cos(x, z) / 2k
                               + sum_{z in NN_k(y)} cos(y, z) / 2k )

where NN_k(x) are the k nearest neighbours of x in the other language. All
vectors are unit norm, so cosine is a dot product. Neighbour search is exact
brute force; ties are broken by ascending sentence reference everywhere.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .embeddings import SentenceVector
from .errors import DegenerateNeighborhoodError, ShapeError
from .ingest.pages import SentenceRef

STRATEGIES = ("max", "forward", "backward", "intersection")
DENOMINATOR_EPS = 1e-12
_BLOCK = 2048


@dataclass(frozen=True)
class MiningConfig:
    k: int = 4
    margin_threshold: float = 1.04
    retrieval_strategy: str = "max"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        # 0 is accepted: it disables thresholding for diagnostics
        if not self.margin_threshold >= 0:
            raise ValueError("margin_threshold must be non-negative")
        if self.retrieval_strategy not in STRATEGIES:
            raise ValueError(f"unknown retrieval strategy {self.retrieval_strategy!r}")


@dataclass(frozen=True)
class NeighborSet:
    query_ref: SentenceRef | None
    neighbors: tuple[tuple[SentenceRef, float], ...]

    def __post_init__(self):
        refs = [r for r, _ in self.neighbors]
        if len(set(refs)) != len(refs):
            raise ValueError("duplicate neighbour reference")
        sims = [s for _, s in self.neighbors]
        if any(b > a for a, b in zip(sims, sims[1:])):
            raise ValueError("neighbour similarities must be non-increasing")

    @property
    def similarities(self) -> list[float]:
        return [s for _, s in self.neighbors]


@dataclass(frozen=True)
class CandidatePair:
    source_ref: SentenceRef
    target_ref: SentenceRef
    margin: float
    cosine: float


@dataclass(frozen=True)
class AlignedTuple:
    pivot_ref: SentenceRef
    per_language: Mapping[str, tuple[SentenceRef, float]]

    def languages(self) -> tuple[str, ...]:
        return tuple(self.per_language)


def _stack(vectors: Sequence[SentenceVector], dimension: int | None = None):
    if not vectors:
        raise ValueError("empty vector list")
    dims = {v.values.shape for v in vectors}
    if len(dims) != 1:
        raise ShapeError(f"mixed vector shapes {sorted(dims)}")
    (shape,) = dims
    if len(shape) != 1 or (dimension is not None and shape[0] != dimension):
        raise ShapeError(f"vector shape {shape} does not match dimension {dimension}")
    return np.stack([v.values for v in vectors]).astype(np.float64, copy=False)


def _sorted_by_ref(vectors: Sequence[SentenceVector]):
    order = sorted(range(len(vectors)), key=lambda i: vectors[i].sentence_ref)
    refs = [vectors[i].sentence_ref for i in order]
    return [vectors[i] for i in order], refs


def top_k(sims: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and values of the k largest entries per row.

    Columns are assumed to be in reference order; among equal values the
    lower column index wins.
    """
    n_rows, n_cols = sims.shape
    k = min(k, n_cols)
    if k == n_cols:
        idx = np.argsort(-sims, axis=1, kind="stable")
    else:
        kth = np.partition(sims, n_cols - k, axis=1)[:, n_cols - k]
        idx = np.empty((n_rows, k), dtype=np.intp)
        for r in range(n_rows):
            row = sims[r]
            cand = np.flatnonzero(row >= kth[r])
            idx[r] = cand[np.argsort(-row[cand], kind="stable")][:k]
    idx = idx[:, :k]
    return idx, np.take_along_axis(sims, idx, axis=1)


def similarity_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cosines of unit vectors, computed in row blocks and clipped to [-1, 1]."""
    out = np.empty((x.shape[0], y.shape[0]), dtype=np.float64)
    for start in range(0, x.shape[0], _BLOCK):
        out[start:start + _BLOCK] = x[start:start + _BLOCK] @ y.T
    return np.clip(out, -1.0, 1.0, out=out)


def nearest_neighbors(query: SentenceVector, corpus: Sequence[SentenceVector], k: int) -> NeighborSet:
    """Exact k nearest neighbours of `query` in `corpus` by cosine."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered, refs = _sorted_by_ref(corpus)
    matrix = _stack(ordered)
    q = np.asarray(query.values, dtype=np.float64)
    if q.shape != (matrix.shape[1],):
        raise ShapeError(f"query shape {q.shape} vs corpus dimension {matrix.shape[1]}")
    sims = similarity_matrix(q[None, :], matrix)
    idx, vals = top_k(sims, k)
    return NeighborSet(query.sentence_ref,
                       tuple((refs[j], float(v)) for j, v in zip(idx[0], vals[0])))


def margin_score(x: SentenceVector, y: SentenceVector, nn_x: NeighborSet, nn_y: NeighborSet,
                 k: int) -> float:
    """Margin of the pair (x, y) given each side's neighbourhood in the other language."""
    if len(nn_x.neighbors) > k or len(nn_y.neighbors) > k:
        raise ValueError("neighbour set larger than k")
    if x.values.shape != y.values.shape:
        raise ShapeError(f"{x.values.shape} vs {y.values.shape}")
    cos = float(np.dot(x.values, y.values))
    denom = sum(nn_x.similarities) / (2 * k) + sum(nn_y.similarities) / (2 * k)
    if denom <= DENOMINATOR_EPS:
        raise DegenerateNeighborhoodError(f"margin denominator {denom!r} for {x.sentence_ref}, "
                                          f"{y.sentence_ref}")
    return cos / denom


@dataclass
class MarginTable:
    """Everything needed to score candidates between two sentence sets."""

    source_refs: list
    target_refs: list
    sims: np.ndarray
    fwd_idx: np.ndarray
    bwd_idx: np.ndarray
    source_avg: np.ndarray   # sum of k-NN cosines / 2k, per source sentence
    target_avg: np.ndarray
    k: int

    def margin(self, i: int, j: int) -> float:
        denom = self.source_avg[i] + self.target_avg[j]
        if denom <= DENOMINATOR_EPS:
            raise DegenerateNeighborhoodError(
                f"margin denominator {denom!r} for {self.source_refs[i]}, {self.target_refs[j]}")
        return float(self.sims[i, j] / denom)


def build_margin_table(source: Sequence[SentenceVector], target: Sequence[SentenceVector],
                       k: int) -> MarginTable:
    """Neighbourhoods in both directions.

    When either side has fewer than k sentences, k shrinks to the smaller
    side so both neighbourhood averages use the same k.
    """
    src, src_refs = _sorted_by_ref(source)
    tgt, tgt_refs = _sorted_by_ref(target)
    x = _stack(src)
    y = _stack(tgt, x.shape[1])
    k_eff = min(k, len(src), len(tgt))
    sims = similarity_matrix(x, y)
    fwd_idx, fwd_vals = top_k(sims, k_eff)
    bwd_idx, bwd_vals = top_k(np.ascontiguousarray(sims.T), k_eff)
    return MarginTable(src_refs, tgt_refs, sims, fwd_idx, bwd_idx,
                       fwd_vals.sum(axis=1) / (2 * k_eff),
                       bwd_vals.sum(axis=1) / (2 * k_eff), k_eff)


def _best_candidates(table: MarginTable, forward: bool) -> dict[tuple[int, int], float]:
    best = {}
    rows = table.fwd_idx if forward else table.bwd_idx
    for q, cands in enumerate(rows):
        scored = []
        for c in cands:
            i, j = (q, int(c)) if forward else (int(c), q)
            scored.append((-table.margin(i, j), table.source_refs[i], table.target_refs[j], i, j))
        neg_margin, _, _, i, j = min(scored)
        best[(i, j)] = -neg_margin
    return best


def mine_pairs(source: Sequence[SentenceVector], target: Sequence[SentenceVector],
               config: MiningConfig = MiningConfig()) -> list[CandidatePair]:
    """Mine one-to-one sentence pairs whose margin reaches the threshold.

    Output is sorted by descending margin, ties by source then target reference.
    """
    table = build_margin_table(source, target, config.k)
    strategy = config.retrieval_strategy
    candidates: dict[tuple[int, int], float] = {}
    if strategy in ("max", "forward", "intersection"):
        candidates.update(_best_candidates(table, forward=True))
    if strategy in ("max", "backward"):
        candidates.update(_best_candidates(table, forward=False))
    if strategy == "intersection":
        backward = _best_candidates(table, forward=False)
        candidates = {p: m for p, m in candidates.items() if p in backward}

    ranked = sorted(
        ((m, i, j) for (i, j), m in candidates.items() if m >= config.margin_threshold),
        key=lambda t: (-t[0], table.source_refs[t[1]], table.target_refs[t[2]]),
    )
    used_src, used_tgt = set(), set()
    pairs = []
    for m, i, j in ranked:
        if i in used_src or j in used_tgt:
            continue
        used_src.add(i)
        used_tgt.add(j)
        pairs.append(CandidatePair(table.source_refs[i], table.target_refs[j], m,
                                   float(table.sims[i, j])))
    return pairs


def mine_many(jobs: Sequence[tuple[Hashable, Sequence[SentenceVector], Sequence[SentenceVector]]],
              config: MiningConfig, workers: int = 1) -> list[tuple[Hashable, list[CandidatePair]]]:
    """Run mine_pairs over independent (key, source, target) jobs.

    Results come back in job order whatever the worker count.
    """
    def run(job):
        key, src, tgt = job
        if not src or not tgt:
            return key, []
        return key, mine_pairs(src, tgt, config)

    if workers <= 1 or len(jobs) <= 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))


def intersect_multiway(pairwise: Mapping[str, Iterable[CandidatePair]]) -> list[AlignedTuple]:
    """Pivot sentences aligned in every non-pivot language, ordered by pivot reference."""
    if not pairwise:
        return []
    per_lang: dict[str, dict] = {}
    for lang, pairs in pairwise.items():
        table: dict[SentenceRef, tuple[SentenceRef, float]] = {}
        for p in pairs:
            prev = table.get(p.source_ref)
            if prev is None or p.margin > prev[1]:
                table[p.source_ref] = (p.target_ref, p.margin)
        per_lang[lang] = table
    languages = list(per_lang)
    common = set(per_lang[languages[0]])
    for lang in languages[1:]:
        common &= set(per_lang[lang])
    return [AlignedTuple(ref, {lang: per_lang[lang][ref] for lang in languages})
            for ref in sorted(common)]


def format_ref(ref: SentenceRef) -> str:
    # '|' cannot occur in MediaWiki titles
    return f"{ref.language}|{ref.title}|{ref.index}"


def pairs_tsv(pairs: Iterable[CandidatePair]) -> str:
    """Audit dump: margin, cosine, source ref, target ref per line."""
    return "".join(f"{p.margin:.6f}\t{p.cosine:.6f}\t{format_ref(p.source_ref)}\t"
                   f"{format_ref(p.target_ref)}\n" for p in pairs)
