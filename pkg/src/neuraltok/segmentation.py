"""Span-based segmentations shared by every tokenizer.

A segmentation of a word of length ``n`` is a list of ``(start, end)`` pairs
(end exclusive) that tile ``[0, n)`` left to right.
"""
from __future__ import annotations

from typing import Iterable, Sequence

from .errors import InvalidSegmentationError

Span = tuple[int, int]
Segmentation = list[Span]


def is_partition(word: str, seg: Sequence[Span]) -> bool:
    if not word:
        return len(seg) == 0
    pos = 0
    for start, end in seg:
        if start != pos or end <= start:
            return False
        pos = end
    return pos == len(word)


def check_partition(word: str, seg: Sequence[Span]) -> None:
    if not is_partition(word, seg):
        raise InvalidSegmentationError(f"{list(seg)!r} does not partition {word!r}")


def pieces(word: str, seg: Iterable[Span]) -> list[str]:
    return [word[s:e] for s, e in seg]


def from_pieces(parts: Iterable[str]) -> Segmentation:
    seg, pos = [], 0
    for p in parts:
        seg.append((pos, pos + len(p)))
        pos += len(p)
    return seg


def from_cuts(n: int, cuts: Iterable[int]) -> Segmentation:
    """Build spans from internal boundary positions (0 < cut < n)."""
    edges = [0] + sorted(set(c for c in cuts if 0 < c < n)) + [n]
    return [(a, b) for a, b in zip(edges, edges[1:])]


def boundaries(seg: Sequence[Span]) -> set[int]:
    """Internal cut positions, i.e. every span start except the first."""
    return {s for s, _ in seg[1:]}


def display(word: str, seg: Sequence[Span], sep: str = "/") -> str:
    return sep.join(pieces(word, seg))
