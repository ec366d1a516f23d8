"""Byte-pair-encoding style merges over characters (not bytes)."""
from __future__ import annotations

import heapq
from collections import defaultdict

from ..corpus import WordTable
from ..errors import ConfigError, EmptyCorpusError, EmptyInputError
from ..segmentation import Segmentation, from_pieces


def _merge_symbols(symbols: list[str], left: str, right: str) -> list[str]:
    out, i, n = [], 0, len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def _pairs(symbols):
    return zip(symbols, symbols[1:])


class BpeModel:
    kind = "bpe"

    def __init__(self, merges: list[tuple[str, str]], chars: list[str] | None = None):
        self.merges = [tuple(m) for m in merges]
        self.ranks = {m: i for i, m in enumerate(self.merges)}
        self.chars = sorted(set(chars or []) | {c for m in self.merges for side in m for c in side})
        self._cache: dict[str, list[str]] = {}

    @property
    def pieces(self) -> set[str]:
        return set(self.chars) | {l + r for l, r in self.merges}

    def __len__(self):
        return len(self.pieces)

    def tokenize(self, word: str) -> list[str]:
        if not word:
            raise EmptyInputError("cannot segment an empty word")
        hit = self._cache.get(word)
        if hit is not None:
            return list(hit)
        symbols = list(word)
        while len(symbols) > 1:
            ranked = [(self.ranks[p], p) for p in _pairs(symbols) if p in self.ranks]
            if not ranked:
                break
            _, (left, right) = min(ranked)
            symbols = _merge_symbols(symbols, left, right)
        if len(self._cache) < 200_000:
            self._cache[word] = symbols
        return list(symbols)

    def segment(self, word: str) -> Segmentation:
        return from_pieces(self.tokenize(word))


def apply_merges_in_order(merges, word: str) -> list[str]:
    """Reference path: run every merge rule over the word, in training order."""
    symbols = list(word)
    for left, right in merges:
        symbols = _merge_symbols(symbols, left, right)
    return symbols


def train_bpe(table: WordTable, vocab_size: int) -> BpeModel:
    """Learn merges until ``vocab_size`` pieces exist or no pair occurs twice.

    Pair frequencies are weighted by word counts; ties go to the
    lexicographically smallest ``(left, right)``.
    """
    if len(table) == 0:
        raise EmptyCorpusError("word table is empty")
    words = [(list(w), c) for w, c in table.items()]
    chars = sorted({ch for w, _ in words for ch in w})
    if vocab_size < len(chars):
        raise ConfigError(f"vocab_size={vocab_size} is smaller than the {len(chars)} distinct characters")

    pair_counts: dict[tuple[str, str], int] = defaultdict(int)
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, (syms, c) in enumerate(words):
        for p in _pairs(syms):
            pair_counts[p] += c
            where[p].add(wi)
    heap = [(-c, p[0], p[1]) for p, c in pair_counts.items()]
    heapq.heapify(heap)

    merges = []
    max_merges = vocab_size - len(chars)
    while len(merges) < max_merges and heap:
        neg, left, right = heapq.heappop(heap)
        pair = (left, right)
        if pair_counts.get(pair, 0) != -neg:
            continue
        if -neg < 2:
            break
        merges.append(pair)
        touched = set()
        for wi in sorted(where.pop(pair, ())):
            syms, c = words[wi]
            new = _merge_symbols(syms, left, right)
            if len(new) == len(syms):
                continue
            for p in _pairs(syms):
                pair_counts[p] -= c
                touched.add(p)
            for p in _pairs(new):
                pair_counts[p] += c
                where[p].add(wi)
                touched.add(p)
            words[wi] = (new, c)
        for p in touched:
            c = pair_counts[p]
            if c <= 0:
                del pair_counts[p]
            elif p != pair:
                heapq.heappush(heap, (-c, p[0], p[1]))
        pair_counts.pop(pair, None)
    return BpeModel(merges, chars)
