"""Statistical subword tokenizers used as teachers and baselines."""
from __future__ import annotations

from pathlib import Path
from typing import Union

from ..errors import MalformedFileError, VersionError
from .bpe import BpeModel, apply_merges_in_order, train_bpe
from .unigram import UnigramModel, UnigramTrainConfig, train_unigram
from .wordpiece import WordPieceModel, train_wordpiece

TeacherModel = Union[UnigramModel, BpeModel, WordPieceModel]

FORMAT_VERSION = 1
_HEADERS = {"unigram": "#unigram", "bpe": "#merges", "wordpiece": "#wordpiece"}

__all__ = [
    "BpeModel", "TeacherModel", "UnigramModel", "UnigramTrainConfig", "WordPieceModel",
    "apply_merges_in_order", "load_teacher", "save_teacher", "teacher_to_text",
    "train_bpe", "train_teacher", "train_unigram", "train_wordpiece",
]


def train_teacher(kind: str, table, vocab_size: int, unigram_cfg: UnigramTrainConfig | None = None):
    if kind == "unigram":
        return train_unigram(table, vocab_size, unigram_cfg)
    if kind == "bpe":
        return train_bpe(table, vocab_size)
    if kind == "wordpiece":
        return train_wordpiece(table, vocab_size)
    raise ValueError(f"unknown teacher kind {kind!r}")


def teacher_to_text(model: TeacherModel) -> str:
    head = f"{_HEADERS[model.kind]} v{FORMAT_VERSION}"
    if isinstance(model, UnigramModel):
        head += f" unk={model.unk_logprob!r}"
        rows = sorted(model.pieces.items(), key=lambda kv: (-kv[1], kv[0]))
        lines = [f"{p}\t{lp:.9g}" for p, lp in rows]
    elif isinstance(model, BpeModel):
        head += " chars=" + "".join(model.chars)
        lines = [f"{l} {r}" for l, r in model.merges]
    else:
        lines = sorted(model.pieces)
    lines.append("#end")
    return "\n".join([head] + lines) + "\n"


def save_teacher(model: TeacherModel, path: str | Path) -> None:
    Path(path).write_text(teacher_to_text(model), encoding="utf-8")


def load_teacher(path: str | Path) -> TeacherModel:
    """Load any teacher file; the first line names the kind and format version.

    Every file ends with an ``#end`` line so that truncation is detected.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if len(lines) < 3 or lines[-1] != "" or lines[-2] != "#end":
        raise MalformedFileError(f"{path}: truncated or malformed teacher file")
    head, body = lines[0].split(" "), lines[1:-2]
    kinds = {v: k for k, v in _HEADERS.items()}
    if head[0] not in kinds or len(head) < 2:
        raise MalformedFileError(f"{path}: unknown header {lines[0]!r}")
    if head[1] != f"v{FORMAT_VERSION}":
        raise VersionError(f"{path}: unsupported format version {head[1]!r}")
    kind = kinds[head[0]]
    opts = dict(h.split("=", 1) for h in head[2:] if "=" in h)
    try:
        if kind == "unigram":
            pieces = {}
            for line in body:
                piece, lp = line.split("\t")
                pieces[piece] = float(lp)
            return UnigramModel(pieces, float(opts.get("unk", -20.0)))
        if kind == "bpe":
            merges = [tuple(line.split(" ")) for line in body]
            if any(len(m) != 2 or not all(m) for m in merges):
                raise ValueError("bad merge line")
            return BpeModel(merges, list(opts.get("chars", "")))
        return WordPieceModel(body)
    except ValueError as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc
