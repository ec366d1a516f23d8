"""Segmentation metrics, typo-noise injection and tokenizer comparison reports.

Any object with a ``segment(word) -> [(start, end), ...]`` method is accepted
as a tokenizer; a ``segment_many(words)`` method is used when available.
"""
from __future__ import annotations

import csv
import io
import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import WordTable
from .errors import EmptyInputError, InvalidSegmentationError
from .segmentation import Segmentation, boundaries, check_partition, pieces

NOISE_OPS = ("swap", "delete", "insert", "substitute")
DEFAULT_NOISE_GRID = tuple(round(0.1 * k, 1) for k in range(8))
REPORT_COLUMNS = ("tokenizer", "noise_fraction", "junk_rate", "avg_subwords", "self_f1")


# metrics -----------------------------------------------------------------------

@dataclass(frozen=True)
class SegMetrics:
    """Boundary P/R/F1 plus per-character B/I agreement.

    Conventions: precision is 1 when nothing is predicted, recall is 1 when
    there is nothing to find, and F1 is 0 whenever both P and R are 0.
    """

    boundary_precision: float
    boundary_recall: float
    boundary_f1: float
    tag_accuracy: float


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _prf(n_pred: int, n_gold: int, n_hit: int) -> tuple[float, float, float]:
    p = n_hit / n_pred if n_pred else 1.0
    r = n_hit / n_gold if n_gold else 1.0
    return p, r, _f1(p, r)


def _length(seg: Sequence[tuple[int, int]]) -> int:
    return seg[-1][1] if seg else 0


def _counts(pred: Segmentation, gold: Segmentation) -> tuple[int, int, int, int, int]:
    n = _length(gold)
    if _length(pred) != n or n == 0:
        raise InvalidSegmentationError("predicted and gold segmentations cover different words")
    dummy = "x" * n
    check_partition(dummy, pred)
    check_partition(dummy, gold)
    bp, bg = boundaries(pred), boundaries(gold)
    # tag i is B iff i == 0 or i is a cut; position 0 always agrees
    agree = sum(1 for i in range(n) if i == 0 or ((i in bp) == (i in bg)))
    return len(bp), len(bg), len(bp & bg), agree, n


def boundary_prf(pred: Segmentation, gold: Segmentation) -> SegMetrics:
    n_pred, n_gold, n_hit, agree, n = _counts(pred, gold)
    return SegMetrics(*_prf(n_pred, n_gold, n_hit), agree / n)


def corpus_prf(pairs: Sequence[tuple[Segmentation, Segmentation]]) -> SegMetrics:
    """Micro-averaged boundary metrics over many (pred, gold) pairs."""
    if not pairs:
        raise EmptyInputError("no segmentation pairs")
    totals = [0] * 5
    for pred, gold in pairs:
        totals = [t + c for t, c in zip(totals, _counts(pred, gold))]
    n_pred, n_gold, n_hit, agree, chars = totals
    return SegMetrics(*_prf(n_pred, n_gold, n_hit), agree / chars)


def segment_all(tokenizer, words: Sequence[str]) -> list[Segmentation]:
    if hasattr(tokenizer, "segment_many"):
        return list(tokenizer.segment_many(list(words)))
    return [tokenizer.segment(w) for w in words]


def subword_count_histogram(tokenizer, words: Sequence[str]) -> dict[int, float]:
    if not words:
        raise EmptyInputError("no words")
    counts = Counter(len(seg) for seg in segment_all(tokenizer, words))
    return {k: counts[k] / len(words) for k in sorted(counts)}


def avg_subwords(tokenizer, sentences: Sequence[Sequence[str]]) -> float:
    """Mean number of segments per sentence (a sentence is a list of words)."""
    if not sentences:
        raise EmptyInputError("no sentences")
    flat = [w for s in sentences for w in s]
    segs = iter(segment_all(tokenizer, flat))
    totals = [sum(len(next(segs)) for _ in s) for s in sentences]
    return sum(totals) / len(sentences)


def is_junk(seg: Segmentation) -> bool:
    """More than half of the pieces are single characters (and there are at least two pieces)."""
    return len(seg) > 1 and sum(1 for s, e in seg if e - s == 1) / len(seg) > 0.5


def junk_rate(tokenizer, words: Sequence[str]) -> float:
    if not words:
        raise EmptyInputError("no words")
    return sum(is_junk(seg) for seg in segment_all(tokenizer, words)) / len(words)


# noise -------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    word_fraction: float
    ops: tuple[str, ...] = NOISE_OPS
    seed: int = 0
    charset: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.word_fraction <= 1.0:
            raise ValueError("word_fraction must lie in [0, 1]")
        if not self.ops or set(self.ops) - set(NOISE_OPS):
            raise ValueError(f"ops must be a non-empty subset of {NOISE_OPS}")


@dataclass(frozen=True)
class Edit:
    op: str
    pos: int


def perturb_word(word: str, op: str, rng: random.Random, charset: str) -> Optional[tuple[str, Edit]]:
    """Apply one edit of kind ``op``; ``None`` when the op cannot change ``word``."""
    n = len(word)
    if op == "swap":
        spots = [i for i in range(n - 1) if word[i] != word[i + 1]]
        if not spots:
            return None
        i = rng.choice(spots)
        return word[:i] + word[i + 1] + word[i] + word[i + 2:], Edit(op, i)
    if op == "delete":
        if n < 2:
            return None
        i = rng.randrange(n)
        return word[:i] + word[i + 1:], Edit(op, i)
    if op == "insert":
        i = rng.randrange(n + 1)
        return word[:i] + rng.choice(charset) + word[i:], Edit(op, i)
    if op == "substitute":
        i = rng.randrange(n)
        options = [c for c in charset if c != word[i]]
        if not options:
            return None
        return word[:i] + rng.choice(options) + word[i + 1:], Edit(op, i)
    raise ValueError(f"unknown noise op {op!r}")


def _charset(spec: NoiseSpec, text: Sequence[str]) -> str:
    if spec.charset:
        return spec.charset
    chars = sorted({c for w in text for c in w})
    if len(chars) < 2:
        chars = sorted(set(chars) | set("abcdefghijklmnopqrstuvwxyz"))
    return "".join(chars)


def inject_noise_with_edits(text: Sequence[str], spec: NoiseSpec) -> tuple[list[str], dict[int, Edit]]:
    if not text:
        raise EmptyInputError("cannot add noise to empty text")
    rng = random.Random(spec.seed)
    charset = _charset(spec, text)
    k = int(len(text) * spec.word_fraction + 1e-9)
    chosen = sorted(rng.sample(range(len(text)), k))
    out, edits = list(text), {}
    for idx in chosen:
        word = out[idx]
        ops = list(spec.ops)
        rng.shuffle(ops)
        for op in ops:
            res = perturb_word(word, op, rng, charset)
            if res is not None:
                out[idx], edits[idx] = res
                break
    return out, edits


def inject_noise(text: Sequence[str], spec: NoiseSpec) -> list[str]:
    """Give exactly ``floor(n * word_fraction)`` sampled words one character edit each.

    The op is drawn uniformly among those in ``spec.ops`` that can change the
    word (a one-letter word cannot lose a letter, ``aa`` cannot be swapped).
    """
    return inject_noise_with_edits(text, spec)[0]


def map_boundaries(cuts: set[int], edit: Optional[Edit], new_len: int) -> set[int]:
    """Carry clean-word cut positions over to the edited word."""
    if edit is None or edit.op in ("swap", "substitute"):
        moved = cuts
    elif edit.op == "insert":
        moved = {b + 1 if b >= edit.pos else b for b in cuts}
    else:
        moved = {b - 1 if b > edit.pos else b for b in cuts}
    return {b for b in moved if 0 < b < new_len}


def damerau_distance(a: str, b: str) -> int:
    """Optimal-string-alignment distance (adjacent transpositions cost 1)."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d[i][j] = min(d[i][j], d[i - 2][j - 2] + 1)
    return d[len(a)][len(b)]


# vocabulary-based neural variant -------------------------------------------------

def neural_vocab_build(tokenizer, table: WordTable, vocab_size: int) -> list[str]:
    """The ``vocab_size`` most frequent pieces of the neural segmentation of ``table``."""
    if len(table) == 0:
        raise EmptyInputError("word table is empty")
    words = list(table.entries)
    freq = Counter()
    for word, seg in zip(words, segment_all(tokenizer, words)):
        for p in pieces(word, seg):
            freq[p] += table.entries[word]
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return [p for p, _ in ranked[:vocab_size]]


class VocabNeuralTokenizer:
    """Neural segmentation followed by a fixed-vocabulary lookup; misses become UNK."""

    def __init__(self, tokenizer, vocab: Sequence[str]):
        self.tokenizer = tokenizer
        self.vocab = frozenset(vocab)

    def segment_with_unk(self, word: str) -> tuple[Segmentation, list[bool]]:
        if not word:
            raise EmptyInputError("cannot segment an empty word")
        seg = segment_all(self.tokenizer, [word])[0]
        return seg, [word[s:e] not in self.vocab for s, e in seg]

    def segment_many(self, words: Sequence[str]) -> list[Segmentation]:
        return segment_all(self.tokenizer, words)

    def segment(self, word: str) -> Segmentation:
        return self.segment_with_unk(word)[0]

    def unk_rate(self, words: Sequence[str]) -> float:
        segs = segment_all(self.tokenizer, words)
        marks = [word[s:e] not in self.vocab for word, seg in zip(words, segs) for s, e in seg]
        return sum(marks) / len(marks) if marks else 0.0


def vocab_segment(vocab: Sequence[str], tokenizer, word: str) -> tuple[Segmentation, list[bool]]:
    return VocabNeuralTokenizer(tokenizer, vocab).segment_with_unk(word)


class LangTokenizer:
    """Binds a language tag to a multilingual neural tokenizer."""

    def __init__(self, model, lang: Optional[str]):
        self.model, self.lang = model, lang

    def segment(self, word: str) -> Segmentation:
        return self.model.segment(word, self.lang)

    def segment_many(self, words: Sequence[str]) -> list[Segmentation]:
        return self.model.segment_many(list(words), self.lang)


# reports --------------------------------------------------------------------------

def _self_f1(clean_segs, noisy_words, noisy_segs, edits) -> float:
    n_pred = n_gold = n_hit = 0
    for k, (seg, nword) in enumerate(zip(noisy_segs, noisy_words)):
        gold = map_boundaries(boundaries(clean_segs[k]), edits.get(k), len(nword))
        pred = boundaries(seg)
        n_pred, n_gold, n_hit = n_pred + len(pred), n_gold + len(gold), n_hit + len(pred & gold)
    return _prf(n_pred, n_gold, n_hit)[2]


def _noisy_sentences(sentences: Sequence[Sequence[str]], spec: NoiseSpec) -> list[list[str]]:
    """Noise drawn over the pooled words of all sentences, so short sentences still get edits."""
    flat = inject_noise([w for s in sentences for w in s], spec)
    out, k = [], 0
    for s in sentences:
        out.append(flat[k:k + len(s)])
        k += len(s)
    return out


def compare_report(tokenizers: Mapping[str, object], words: Sequence[str],
                   sentences: Sequence[Sequence[str]] | None = None,
                   noise_grid: Sequence[float] = DEFAULT_NOISE_GRID, seed: int = 0,
                   ops: Sequence[str] = NOISE_OPS) -> list[dict]:
    """Junk rate, average subwords and self-consistency F1 per tokenizer and noise level.

    The same noisy inputs are shared by every tokenizer at a given level.
    ``avg_subwords`` is computed on ``sentences`` (one-word sentences of
    the noisy ``words`` when omitted), with the noisy-word count taken over
    all sentence words together. ``self_f1`` compares each tokenizer's noisy
    segmentation with its own clean one, with cuts carried through the edit.
    """
    if not tokenizers or not words:
        raise EmptyInputError("need at least one tokenizer and one word")
    sentences = [list(s) for s in sentences] if sentences else None
    clean = {name: segment_all(tok, words) for name, tok in tokenizers.items()}
    rows = []
    for level, frac in enumerate(noise_grid):
        spec = NoiseSpec(frac, tuple(ops), seed=seed + level)
        noisy_words, edits = inject_noise_with_edits(words, spec)
        if sentences is None:
            noisy_sents = [[w] for w in noisy_words]
        else:
            noisy_sents = _noisy_sentences(sentences, NoiseSpec(frac, tuple(ops), seed=seed + 1000 + level))
        for name, tok in tokenizers.items():
            segs = segment_all(tok, noisy_words)
            rows.append({
                "tokenizer": name,
                "noise_fraction": float(frac),
                "junk_rate": sum(map(is_junk, segs)) / len(segs),
                "avg_subwords": avg_subwords(tok, noisy_sents),
                "self_f1": _self_f1(clean[name], noisy_words, segs, edits),
            })
    return rows


def report_json(rows: Sequence[dict]) -> str:
    out = [{k: (round(r[k], 6) if isinstance(r[k], float) else r[k]) for k in REPORT_COLUMNS} for r in rows]
    return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


def report_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in rows:
        writer.writerow([r["tokenizer"]] + [f"{r[k]:.6f}" for k in REPORT_COLUMNS[1:]])
    return buf.getvalue()


def write_report(rows: Sequence[dict], json_path: str | Path, csv_path: str | Path) -> None:
    Path(json_path).write_text(report_json(rows), encoding="utf-8")
    Path(csv_path).write_text(report_csv(rows), encoding="utf-8")
