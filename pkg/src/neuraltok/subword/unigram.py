"""Unigram language-model tokenizer trained with hard (Viterbi) EM."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

from ..corpus import WordTable
from ..errors import ConfigError, EmptyCorpusError, EmptyInputError
from ..segmentation import Segmentation

DEFAULT_UNK_LOGPROB = -20.0


@dataclass
class UnigramTrainConfig:
    max_piece_len: int = 8
    min_count: int = 2
    seed_multiplier: int = 4
    em_rounds: int = 4
    prune_em_rounds: int = 2
    shrink_fraction: float = 0.2
    smoothing: float = 0.1
    unk_logprob: float = DEFAULT_UNK_LOGPROB


def _round9(x: float) -> float:
    return float(f"{x:.9g}")


class UnigramModel:
    kind = "unigram"

    def __init__(self, pieces: dict[str, float], unk_logprob: float = DEFAULT_UNK_LOGPROB):
        if not pieces:
            raise ConfigError("a unigram model needs at least one piece")
        for p, lp in pieces.items():
            if not p or not math.isfinite(lp) or lp > 0:
                raise ConfigError(f"invalid piece/log-prob {p!r}: {lp}")
        self.pieces = dict(pieces)
        self.unk_logprob = unk_logprob
        self.max_piece_len = max(len(p) for p in self.pieces)

    def __len__(self):
        return len(self.pieces)

    def __contains__(self, piece):
        return piece in self.pieces

    def segment(self, word: str) -> Segmentation:
        if not word:
            raise EmptyInputError("cannot segment an empty word")
        seg, _ = _viterbi(word, self.pieces, self.max_piece_len, self.unk_logprob)
        return seg

    def score(self, word: str, seg: Segmentation) -> float:
        total = 0.0
        for s, e in seg:
            lp = self.pieces.get(word[s:e])
            if lp is None:
                if e - s != 1:
                    raise KeyError(word[s:e])
                lp = self.unk_logprob
            total += lp
        return total


def _viterbi(word, logp, max_len, unk_logprob, exclude_whole=False):
    """Best segmentation of ``word`` and its score.

    Runs right to left so that, among equal-scoring candidates with the same
    piece count, the one with the longest leftmost piece wins.
    """
    n = len(word)
    score = [0.0] * (n + 1)
    count = [0] * (n + 1)
    step = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        best = None
        for l in range(min(max_len, n - i), 0, -1):
            if exclude_whole and l == n:
                continue
            lp = logp.get(word[i:i + l])
            if lp is None:
                if l != 1:
                    continue
                lp = unk_logprob
            cand = lp + score[i + l]
            cnt = count[i + l] + 1
            # longer l visited first, so strict comparison keeps leftmost-longest on ties
            if best is None or cand > best[0] or (cand == best[0] and cnt < best[1]):
                best = (cand, cnt, l)
        score[i], count[i], step[i] = best
    seg, i = [], 0
    while i < n:
        seg.append((i, i + step[i]))
        i += step[i]
    return seg, score[0]


def _e_step(words, logp, max_len, unk_logprob):
    usage = Counter()
    total_ll = 0.0
    for word, freq in words:
        seg, sc = _viterbi(word, logp, max_len, unk_logprob)
        total_ll += freq * sc
        for s, e in seg:
            usage[word[s:e]] += freq
    return usage, total_ll


def _m_step(vocab, usage, eps):
    total = sum(usage.get(p, 0) for p in vocab) + eps * len(vocab)
    return {p: math.log((usage.get(p, 0) + eps) / total) for p in vocab}


def train_unigram(table: WordTable, vocab_size: int, cfg: UnigramTrainConfig | None = None) -> UnigramModel:
    """Train a unigram tokenizer on a word table.

    Seeds the vocabulary with frequent substrings, re-estimates piece
    probabilities with hard EM and then prunes the pieces whose removal costs
    the least likelihood until at most ``vocab_size`` remain. Single characters
    are never pruned, so every training word stays segmentable.
    """
    cfg = cfg or UnigramTrainConfig()
    if len(table) == 0:
        raise EmptyCorpusError("word table is empty")
    words = list(table.items())
    chars = sorted({ch for w, _ in words for ch in w})
    if vocab_size < len(chars):
        raise ConfigError(f"vocab_size={vocab_size} is smaller than the {len(chars)} distinct characters")

    sub_counts: dict[str, int] = defaultdict(int)
    for w, freq in words:
        n = len(w)
        for i in range(n):
            for l in range(2, min(cfg.max_piece_len, n - i) + 1):
                sub_counts[w[i:i + l]] += freq
    candidates = [(s, c) for s, c in sub_counts.items() if c >= cfg.min_count]
    candidates.sort(key=lambda sc: (-sc[1] * len(sc[0]), sc[0]))
    candidates = candidates[: cfg.seed_multiplier * vocab_size]

    char_counts = Counter()
    for w, freq in words:
        for ch in w:
            char_counts[ch] += freq
    init = {ch: char_counts[ch] for ch in chars}
    init.update(dict(candidates))
    vocab = set(init)
    total = sum(init.values())
    logp = {p: math.log(c / total) for p, c in init.items()}
    max_len = max(len(p) for p in vocab)

    def em(rounds):
        nonlocal logp
        for _ in range(rounds):
            usage, _ = _e_step(words, logp, max_len, cfg.unk_logprob)
            logp = _m_step(vocab, usage, cfg.smoothing)

    em(cfg.em_rounds)
    char_set = set(chars)
    while len(vocab) > vocab_size:
        usage, _ = _e_step(words, logp, max_len, cfg.unk_logprob)
        losses = []
        for p in vocab:
            if p in char_set:
                continue
            used = usage.get(p, 0)
            if used == 0:
                losses.append((0.0, p))
                continue
            _, alt = _viterbi(p, logp, max_len, cfg.unk_logprob, exclude_whole=True)
            losses.append((used * (logp[p] - alt), p))
        losses.sort()
        n_remove = min(max(1, math.ceil(cfg.shrink_fraction * len(vocab))), len(vocab) - vocab_size)
        for _, p in losses[:n_remove]:
            vocab.discard(p)
        logp = {p: logp[p] for p in vocab}
        em(cfg.prune_em_rounds)

    # one more round so the stored probabilities are normalised over the final vocabulary
    usage, _ = _e_step(words, logp, max_len, cfg.unk_logprob)
    logp = _m_step(vocab, usage, cfg.smoothing)
    final = {p: _round9(lp) for p, lp in logp.items()}
    return UnigramModel(final, cfg.unk_logprob)
