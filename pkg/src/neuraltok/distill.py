"""Turn teacher segmentations into filtered B/I tagging datasets."""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .corpus import Alphabet, WordTable
from .errors import ConfigError, InvalidSegmentationError, MalformedFileError
from .segmentation import Segmentation, check_partition

B, I = "B", "I"
MIN_SEGMENT_LEN = 4
MAX_SINGLE_CHAR_RATIO = 0.5


class Mode(str, enum.Enum):
    MONO = "mono"
    MULTI = "multi"
    MIXED = "mixed"


class FilterDecision(str, enum.Enum):
    USE_TEACHER = "use_teacher"
    SINGLE_TOKEN = "single_token"


def segments_to_tags(word: str, seg: Segmentation) -> str:
    check_partition(word, seg)
    return "".join(B + I * (e - s - 1) for s, e in seg)


def tags_to_segments(word: str, tags: str) -> Segmentation:
    if len(tags) != len(word) or not tags or tags[0] != B or set(tags) - {B, I}:
        raise InvalidSegmentationError(f"invalid tag string {tags!r} for {word!r}")
    starts = [i for i, t in enumerate(tags) if t == B] + [len(word)]
    return list(zip(starts, starts[1:]))


def single_char_ratio(seg: Segmentation) -> float:
    return sum(1 for s, e in seg if e - s == 1) / len(seg)


def apply_filters(word: str, seg: Segmentation) -> FilterDecision:
    """Short words and over-fragmented teacher output become single tokens."""
    check_partition(word, seg)
    if len(word) < MIN_SEGMENT_LEN:
        return FilterDecision.SINGLE_TOKEN
    if single_char_ratio(seg) > MAX_SINGLE_CHAR_RATIO:
        return FilterDecision.SINGLE_TOKEN
    return FilterDecision.USE_TEACHER


@dataclass
class DistillExample:
    word: str
    tags: str
    lang: Optional[str] = None
    char_ids: list[int] = field(default_factory=list)

    def to_record(self) -> dict:
        return {"word": self.word, "tags": self.tags, "lang": self.lang}


def label_word(word: str, teacher) -> str:
    seg = teacher.segment(word)
    if apply_filters(word, seg) is FilterDecision.SINGLE_TOKEN:
        return B + I * (len(word) - 1)
    return segments_to_tags(word, seg)


def build_dataset(
    tables: Mapping[str, WordTable],
    teachers: Mapping[str, object],
    mode: Mode | str,
    alphabet: Alphabet,
    seed: int = 0,
) -> list[DistillExample]:
    """Label every unique word with its language's teacher.

    Multi mode tags every example with its language, mixed mode emits each
    word twice (with and without the tag) and mono mode never tags. The
    result is sorted by (lang, word) and then shuffled with ``seed``.
    """
    mode = Mode(mode)
    if set(tables) - set(teachers):
        raise ConfigError(f"no teacher for languages {sorted(set(tables) - set(teachers))}")
    if mode is Mode.MONO and len(tables) != 1:
        raise ConfigError("mono mode needs exactly one language")
    examples = []
    for lang in sorted(tables):
        teacher = teachers[lang]
        for word in tables[lang]:
            tags = label_word(word, teacher)
            ids = alphabet.encode(word)
            if mode is Mode.MONO:
                examples.append(DistillExample(word, tags, None, ids))
            else:
                alphabet.lang_id(lang)
                examples.append(DistillExample(word, tags, lang, ids))
                if mode is Mode.MIXED:
                    examples.append(DistillExample(word, tags, None, ids))
    examples.sort(key=lambda ex: (ex.lang or "", ex.word, ex.lang is None))
    random.Random(seed).shuffle(examples)
    return examples


def save_dataset(examples: Iterable[DistillExample], path: str | Path, seed: int, mode: Mode | str) -> None:
    lines = [json.dumps({"#seed": seed, "#mode": Mode(mode).value})]
    lines += [json.dumps(ex.to_record(), ensure_ascii=False) for ex in examples]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path: str | Path, alphabet: Alphabet | None = None) -> tuple[dict, list[DistillExample]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MalformedFileError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
        if "#seed" not in header or "#mode" not in header:
            raise MalformedFileError(f"{path}: missing dataset header")
        examples = []
        for line in lines[1:]:
            rec = json.loads(line)
            word, tags, lang = rec["word"], rec["tags"], rec["lang"]
            tags_to_segments(word, tags)
            ids = alphabet.encode(word) if alphabet is not None else []
            examples.append(DistillExample(word, tags, lang, ids))
    except (json.JSONDecodeError, KeyError, TypeError, InvalidSegmentationError) as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc
    return header, examples
