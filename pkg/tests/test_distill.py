import json

import pytest
from hypothesis import given, strategies as st

from neuraltok.corpus import WordTable, build_alphabet
from neuraltok.distill import (FilterDecision, Mode, apply_filters, build_dataset, load_dataset, save_dataset,
                               segments_to_tags, tags_to_segments)
from neuraltok.errors import AlphabetError, ConfigError, InvalidSegmentationError, MalformedFileError
from neuraltok.segmentation import from_cuts, from_pieces
from neuraltok.subword import UnigramModel


class Fixed:
    """Teacher stub returning pre-baked segmentations (character splits otherwise)."""

    def __init__(self, table):
        self.table = table

    def segment(self, word):
        return from_pieces(self.table.get(word, list(word)))


def test_tricycles_tags():
    assert segments_to_tags("tricycles", from_pieces(["tri", "cycle", "s"])) == "BIIBIIIIB"
    assert segments_to_tags("cat", [(0, 3)]) == "BII"


def test_tags_to_segments_examples():
    assert tags_to_segments("abc", "BIB") == [(0, 2), (2, 3)]
    assert tags_to_segments("abc", "BII") == [(0, 3)]
    assert tags_to_segments("xyz", "BBB") == [(0, 1), (1, 2), (2, 3)]
    for bad in ("IBB", "BB", "BOB", ""):
        with pytest.raises(InvalidSegmentationError):
            tags_to_segments("abc", bad)
    with pytest.raises(InvalidSegmentationError):
        segments_to_tags("abc", [(0, 2)])


@given(st.text(min_size=1, max_size=15), st.sets(st.integers(1, 14)))
def test_tag_round_trip(word, cuts):
    seg = from_cuts(len(word), cuts)
    tags = segments_to_tags(word, seg)
    assert tags[0] == "B" and len(tags) == len(word)
    assert tags_to_segments(word, tags) == seg


def test_filters():
    assert apply_filters("cat", [(0, 1), (1, 3)]) is FilterDecision.SINGLE_TOKEN
    five = from_pieces(["a", "b", "c", "dd", "ee"])
    assert apply_filters("abcddee", five) is FilterDecision.SINGLE_TOKEN
    four = from_pieces(["a", "b", "cc", "dd"])
    assert apply_filters("abccdd", four) is FilterDecision.USE_TEACHER


def _setup(langs, n=10):
    tables = {l: WordTable(l, {f"{l}word{i:02d}": 1 for i in range(n)}) for l in langs}
    teachers = {l: UnigramModel({c: -1.0 for c in "abcdefghijklmnopqrstuvwxyz0123456789"}) for l in langs}
    return tables, teachers, build_alphabet(list(tables.values()))


def test_mixed_mode_doubles():
    tables, teachers, alpha = _setup(["en"], 100)
    ds = build_dataset(tables, teachers, Mode.MIXED, alpha)
    assert len(ds) == 200 and sum(ex.lang is not None for ex in ds) == 100


def test_mono_mode_single_word():
    tables = {"en": WordTable("en", {"cat": 1})}
    ds = build_dataset(tables, {"en": UnigramModel({"c": -1, "a": -1, "t": -1})}, "mono",
                       build_alphabet(list(tables.values())))
    assert [(ex.word, ex.tags, ex.lang) for ex in ds] == [("cat", "BII", None)]


def test_multi_mode_counts_and_lang_ids():
    tables, teachers, alpha = _setup(["en", "de"])
    ds = build_dataset(tables, teachers, "multi", alpha)
    assert len(ds) == 20 and all(ex.lang in ("en", "de") for ex in ds)
    assert all(len(ex.char_ids) == len(ex.tags) for ex in ds)


def test_mode_errors():
    tables, teachers, alpha = _setup(["en", "de"])
    with pytest.raises(ConfigError):
        build_dataset(tables, teachers, "mono", alpha)
    with pytest.raises(ConfigError):
        build_dataset(tables, {"en": teachers["en"]}, "multi", alpha)
    with pytest.raises(AlphabetError):
        build_dataset(tables, teachers, "multi", build_alphabet([WordTable("en", {"x": 1})]))


def test_seeded_shuffle_is_deterministic():
    tables, teachers, alpha = _setup(["en", "de"])
    a = build_dataset(tables, teachers, "mixed", alpha, seed=5)
    b = build_dataset(tables, teachers, "mixed", alpha, seed=5)
    c = build_dataset(tables, teachers, "mixed", alpha, seed=6)
    key = lambda ds: [(e.word, e.lang) for e in ds]
    assert key(a) == key(b) and key(a) != key(c)
    assert sorted(key(a), key=str) == sorted(key(c), key=str)


def test_unknown_only_word_is_kept():
    tables = {"en": WordTable("en", {"abcd": 1, "ßßßß": 1})}
    alpha = build_alphabet([WordTable("en", {"abcd": 1})])
    ds = build_dataset(tables, {"en": UnigramModel({c: -1 for c in "abcd"})}, "mono", alpha)
    assert {ex.word for ex in ds} == {"abcd", "ßßßß"}


@given(st.dictionaries(st.text(alphabet="abcxyz", min_size=1, max_size=9), st.integers(1, 3), min_size=1,
                       max_size=20), st.randoms(use_true_random=False))
def test_filters_hold_on_every_built_example(table, rnd):
    segs = {}
    for w in table:
        cuts = [i for i in range(1, len(w)) if rnd.random() < 0.5]
        segs[w] = [w[a:b] for a, b in from_cuts(len(w), cuts)]
    tables = {"xx": WordTable("xx", table)}
    ds = build_dataset(tables, {"xx": Fixed(segs)}, "mono", build_alphabet(list(tables.values())))
    for ex in ds:
        seg = tags_to_segments(ex.word, ex.tags)
        assert ex.tags[0] == "B" and set(ex.tags) <= {"B", "I"}
        if len(ex.word) < 4:
            assert len(seg) == 1
        assert len(seg) == 1 or sum(e - s == 1 for s, e in seg) / len(seg) <= 0.5


def test_dataset_file_round_trip(tmp_path):
    tables, teachers, alpha = _setup(["en", "de"])
    ds = build_dataset(tables, teachers, "mixed", alpha, seed=3)
    save_dataset(ds, tmp_path / "d.jsonl", 3, "mixed")
    lines = (tmp_path / "d.jsonl").read_text().splitlines()
    assert json.loads(lines[0]) == {"#seed": 3, "#mode": "mixed"}
    for line in lines[1:]:
        rec = json.loads(line)
        assert set(rec) == {"word", "tags", "lang"} and set(rec["tags"]) <= {"B", "I"}
    header, back = load_dataset(tmp_path / "d.jsonl", alpha)
    assert header["#mode"] == "mixed"
    assert [(e.word, e.tags, e.lang, e.char_ids) for e in back] == [(e.word, e.tags, e.lang, e.char_ids) for e in ds]
    (tmp_path / "bad.jsonl").write_text(lines[0] + '\n{"word": "ab", "tags": "IB", "lang": null}\n')
    with pytest.raises(MalformedFileError):
        load_dataset(tmp_path / "bad.jsonl")
