"""Raw text ingestion, per-language word tables and the character alphabet."""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlphabetError, CorpusDecodeError, EmptyCorpusError, MalformedFileError

PAD = "<PAD>"
UNK = "<UNK>"
PAD_ID = 0
UNK_ID = 1
DEFAULT_MAX_LEN = 30

_TAG_RE = re.compile(r"<[^<>]*>")
_URL_PREFIXES = ("http://", "https://", "www.")


def lang_symbol(lang: str) -> str:
    return f"<lang:{lang}>"


def extract_words(raw_text: str | bytes, max_len: int = DEFAULT_MAX_LEN) -> list[str]:
    """Split raw text into words after stripping markup and URLs.

    Tags shaped like ``<...>`` are replaced by a space, tokens starting with
    ``http://``, ``https://`` or ``www.`` are dropped, and so is any token longer
    than ``max_len`` characters. Punctuation and case are left alone.

    Raises:
        CorpusDecodeError: ``raw_text`` is bytes that are not valid UTF-8.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if isinstance(raw_text, (bytes, bytearray)):
        try:
            raw_text = bytes(raw_text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusDecodeError(exc.start) from exc
    text = _TAG_RE.sub(" ", raw_text)
    words = []
    for tok in text.split():
        if tok.lower().startswith(_URL_PREFIXES):
            continue
        if len(tok) > max_len:
            continue
        words.append(tok)
    return words


@dataclass
class WordTable:
    """Word counts for one language."""

    language: str
    entries: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for word, count in self.entries.items():
            if count < 1:
                raise ValueError(f"non-positive count for {word!r}")
            if not word or any(ch.isspace() for ch in word):
                raise ValueError(f"invalid word {word!r}")
        self.entries = dict(sorted(self.entries.items()))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    def merge(self, other: "WordTable") -> "WordTable":
        if other.language != self.language:
            raise ValueError("cannot merge tables of different languages")
        merged = Counter(self.entries)
        merged.update(other.entries)
        return WordTable(self.language, dict(merged))

    def save(self, path: str | Path) -> None:
        lines = [f"#lang={self.language}"]
        lines += [f"{w}\t{c}" for w, c in self.entries.items()]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordTable":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if not lines or not lines[0].startswith("#lang="):
            raise MalformedFileError(f"{path}: missing '#lang=' header")
        language = lines[0][len("#lang="):]
        entries = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1].isdigit():
                raise MalformedFileError(f"{path}:{lineno}: expected 'word<TAB>count'")
            entries[parts[0]] = int(parts[1])
        return cls(language, entries)


def build_word_table(words: Iterable[str], language: str) -> WordTable:
    return WordTable(language, dict(Counter(words)))


class Alphabet:
    """Bidirectional symbol/id map: PAD, UNK, language tags, then characters."""

    def __init__(self, symbols: Sequence[str]):
        symbols = list(symbols)
        if len(symbols) < 2 or symbols[0] != PAD or symbols[1] != UNK:
            raise AlphabetError("alphabet must start with <PAD>, <UNK>")
        if len(set(symbols)) != len(symbols):
            raise AlphabetError("duplicate symbols in alphabet")
        self.symbols = symbols
        self.index = {s: i for i, s in enumerate(symbols)}
        self.languages = [s[6:-1] for s in symbols if s.startswith("<lang:") and s.endswith(">")]

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __repr__(self):
        return f"Alphabet({len(self.symbols)} symbols, languages={self.languages})"

    def id(self, symbol: str) -> int:
        return self.index.get(symbol, UNK_ID)

    def symbol(self, idx: int) -> str:
        if not 0 <= idx < len(self.symbols):
            raise AlphabetError(f"id {idx} out of range for alphabet of size {len(self)}")
        return self.symbols[idx]

    def encode(self, word: str) -> list[int]:
        return [self.index.get(ch, UNK_ID) for ch in word]

    def lang_id(self, lang: str) -> int:
        try:
            return self.index[lang_symbol(lang)]
        except KeyError:
            raise AlphabetError(f"unknown language tag {lang!r}") from None

    def is_lang_id(self, idx: int) -> bool:
        return self.symbols[idx].startswith("<lang:") if 0 <= idx < len(self) else False

    def to_text(self) -> str:
        return "\n".join(self.symbols) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Alphabet":
        text = Path(path).read_text(encoding="utf-8")
        if not text.endswith("\n"):
            raise MalformedFileError(f"{path}: truncated alphabet file")
        try:
            return cls(text[:-1].split("\n"))
        except AlphabetError as exc:
            raise MalformedFileError(f"{path}: {exc}") from exc


def build_alphabet(tables: Sequence[WordTable], min_char_count: int = 1) -> Alphabet:
    """Collect characters seen at least ``min_char_count`` times across tables.

    Ids are assigned as PAD=0, UNK=1, then one tag per distinct language
    (sorted), then the characters in code point order.
    """
    char_counts: Counter[str] = Counter()
    for table in tables:
        for word, count in table.items():
            for ch in word:
                char_counts[ch] += count
    if not char_counts:
        raise EmptyCorpusError("cannot build an alphabet from empty word tables")
    langs = sorted({t.language for t in tables})
    chars = sorted(ch for ch, c in char_counts.items() if c >= min_char_count)
    return Alphabet([PAD, UNK] + [lang_symbol(l) for l in langs] + chars)
