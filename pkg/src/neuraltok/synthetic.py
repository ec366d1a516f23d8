"""Seeded synthetic corpora for desk-scale experiments.

* ``vowel_rule_*``: words whose gold segmentation cuts before every vowel.
* ``MorphLanguage``: an agglutinative toy language (prefix + stem + suffixes)
  with Zipf-distributed word frequencies, large enough to train teachers on
  tens of thousands of unique words.
"""
from __future__ import annotations

import random
import string
from dataclasses import dataclass

from .segmentation import Segmentation, from_cuts

VOWELS = frozenset("aeiou")


def vowel_rule_segment(word: str) -> Segmentation:
    return from_cuts(len(word), [i for i, ch in enumerate(word) if ch in VOWELS])


def vowel_rule_tags(word: str) -> str:
    return "".join("B" if i == 0 or ch in VOWELS else "I" for i, ch in enumerate(word))


def random_words(n: int, seed: int, min_len: int = 3, max_len: int = 12,
                 letters: str = string.ascii_lowercase) -> list[str]:
    """``n`` distinct random words, in generation order."""
    rng = random.Random(seed)
    seen, out = set(), []
    while len(out) < n:
        w = "".join(rng.choice(letters) for _ in range(rng.randint(min_len, max_len)))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


_ONSETS = ["", "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "kr", "pl", "st", "tr", "sh", "ch"]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ou"]
_CODAS = ["", "", "", "n", "r", "s", "l", "m", "k"]


@dataclass
class MorphLanguage:
    """Random morphology: ``[prefix] stem [suffix [suffix]]``."""

    seed: int = 0
    n_stems: int = 4000
    n_prefixes: int = 24
    n_suffixes: int = 48

    def __post_init__(self):
        rng = random.Random(self.seed)
        self.stems = self._morphs(rng, self.n_stems, 1, 3)
        self.prefixes = self._morphs(rng, self.n_prefixes, 1, 1)
        self.suffixes = self._morphs(rng, self.n_suffixes, 1, 2)
        self._prefix_w = [1.0 / (r + 1) for r in range(len(self.prefixes))]
        self._suffix_w = [1.0 / (r + 1) for r in range(len(self.suffixes))]

    @staticmethod
    def _syllable(rng):
        return rng.choice(_ONSETS) + rng.choice(_NUCLEI) + rng.choice(_CODAS)

    def _morphs(self, rng, n, lo, hi):
        seen, out = set(), []
        while len(out) < n:
            m = "".join(self._syllable(rng) for _ in range(rng.randint(lo, hi)))
            if 2 <= len(m) <= 9 and m not in seen:
                seen.add(m)
                out.append(m)
        return out

    def word(self, rng: random.Random) -> str:
        parts = []
        if rng.random() < 0.3:
            parts += rng.choices(self.prefixes, weights=self._prefix_w)
        parts.append(self.stems[rng.randrange(len(self.stems))])
        n_suffixes = rng.choice([0, 1, 1, 2])
        if n_suffixes:
            parts += rng.choices(self.suffixes, weights=self._suffix_w, k=n_suffixes)
        return "".join(parts)[:30]

    def unique_words(self, n: int, seed: int, exclude: set[str] | None = None) -> list[str]:
        rng = random.Random(seed)
        exclude = exclude or set()
        seen, out = set(), []
        guard = 0
        while len(out) < n:
            w = self.word(rng)
            guard += 1
            if guard > 200 * n:
                raise RuntimeError("language too small for the requested number of words")
            if w not in seen and w not in exclude:
                seen.add(w)
                out.append(w)
        return out

    def text(self, n_tokens: int, seed: int, vocabulary: list[str] | None = None) -> str:
        """Running text of ``n_tokens`` words with Zipfian reuse of ``vocabulary``."""
        rng = random.Random(seed)
        vocabulary = vocabulary or self.unique_words(max(1, n_tokens // 4), seed)
        weights = [1.0 / (r + 1) ** 0.9 for r in range(len(vocabulary))]
        toks = rng.choices(vocabulary, weights=weights, k=n_tokens)
        lines = [" ".join(toks[i:i + 12]) for i in range(0, len(toks), 12)]
        return "\n".join(lines) + "\n"
