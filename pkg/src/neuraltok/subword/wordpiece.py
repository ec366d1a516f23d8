"""WordPiece: likelihood-style merge scoring and greedy longest-match decoding.

Training merges pairs by ``count(pair) / (count(left) * count(right))`` over
unmarked symbols; the resulting pieces are stored in positional form, with a
``##`` prefix for pieces that occur after the start of a word.
"""
from __future__ import annotations

import heapq
from collections import defaultdict

from ..corpus import WordTable
from ..errors import ConfigError, EmptyCorpusError, EmptyInputError
from ..segmentation import Segmentation, from_pieces

CONT = "##"
UNK_PIECE = "[UNK]"


class WordPieceModel:
    kind = "wordpiece"

    def __init__(self, pieces):
        self.pieces = set(pieces)
        if not self.pieces:
            raise ConfigError("empty WordPiece vocabulary")
        self.max_piece_len = max(len(p[2:] if p.startswith(CONT) else p) for p in self.pieces)

    def __len__(self):
        return len(self.pieces)

    def tokenize(self, word: str) -> list[str]:
        """Greedy longest-match-first; ``[UNK]`` for the whole word on failure."""
        if not word:
            raise EmptyInputError("cannot segment an empty word")
        out, i, n = [], 0, len(word)
        while i < n:
            for j in range(min(n, i + self.max_piece_len), i, -1):
                cand = word[i:j] if i == 0 else CONT + word[i:j]
                if cand in self.pieces:
                    out.append(cand)
                    i = j
                    break
            else:
                return [UNK_PIECE]
        return out

    def segment_with_unk(self, word: str) -> tuple[Segmentation, bool]:
        toks = self.tokenize(word)
        if toks == [UNK_PIECE]:
            return [(0, len(word))], True
        return from_pieces(t[2:] if k else t for k, t in enumerate(toks)), False

    def segment(self, word: str) -> Segmentation:
        return self.segment_with_unk(word)[0]


def train_wordpiece(table: WordTable, vocab_size: int) -> WordPieceModel:
    if len(table) == 0:
        raise EmptyCorpusError("word table is empty")
    words = [(list(w), c) for w, c in table.items()]
    chars = sorted({ch for w, _ in words for ch in w})
    if vocab_size < 2 * len(chars):
        raise ConfigError(
            f"vocab_size={vocab_size} cannot hold the {2 * len(chars)} plain and '##' character pieces"
        )
    pieces = set(chars) | {CONT + c for c in chars}

    sym_counts: dict[str, int] = defaultdict(int)
    pair_counts: dict[tuple[str, str], int] = defaultdict(int)
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    by_symbol: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for wi, (syms, c) in enumerate(words):
        for s in syms:
            sym_counts[s] += c
        for p in zip(syms, syms[1:]):
            pair_counts[p] += c
            where[p].add(wi)
            by_symbol[p[0]].add(p)
            by_symbol[p[1]].add(p)

    def score(p):
        return pair_counts[p] / (sym_counts[p[0]] * sym_counts[p[1]])

    heap = [(-score(p), p[0], p[1]) for p in pair_counts]
    heapq.heapify(heap)

    while len(pieces) < vocab_size and heap:
        neg, left, right = heapq.heappop(heap)
        pair = (left, right)
        if pair_counts.get(pair, 0) <= 0 or score(pair) != -neg:
            continue
        if pair_counts[pair] < 2:
            # a stale higher score may hide a repeating pair further down
            continue
        merged = left + right
        rewritten = {}
        forms = set()
        for wi in sorted(where.pop(pair, ())):
            syms, c = words[wi]
            out, i, n = [], 0, len(syms)
            while i < n:
                if i + 1 < n and syms[i] == left and syms[i + 1] == right:
                    forms.add(merged if not out else CONT + merged)
                    out.append(merged)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            if len(out) != n:
                rewritten[wi] = out
        if len(pieces | forms) > vocab_size:
            break
        pieces |= forms

        changed = {left, right, merged}
        touched = set()
        for wi, new in rewritten.items():
            syms, c = words[wi]
            for s in syms:
                sym_counts[s] -= c
            for s in new:
                sym_counts[s] += c
            for p in zip(syms, syms[1:]):
                pair_counts[p] -= c
                touched.add(p)
            for p in zip(new, new[1:]):
                pair_counts[p] += c
                where[p].add(wi)
                by_symbol[p[0]].add(p)
                by_symbol[p[1]].add(p)
                touched.add(p)
            words[wi] = (new, c)
        for s in changed:
            touched |= by_symbol.get(s, set())
        for p in sorted(touched):
            if pair_counts.get(p, 0) <= 0:
                pair_counts.pop(p, None)
                continue
            if p != pair and sym_counts[p[0]] > 0 and sym_counts[p[1]] > 0:
                heapq.heappush(heap, (-score(p), p[0], p[1]))
        pair_counts.pop(pair, None)
    return WordPieceModel(pieces)
