import math

import pytest
from hypothesis import given, strategies as st

from neuraltok.corpus import WordTable
from neuraltok.errors import ConfigError, EmptyCorpusError, EmptyInputError, MalformedFileError, VersionError
from neuraltok.segmentation import is_partition, pieces
from neuraltok.subword import (BpeModel, UnigramModel, UnigramTrainConfig, WordPieceModel, load_teacher,
                               save_teacher, teacher_to_text, train_bpe, train_teacher, train_unigram,
                               train_wordpiece)
from neuraltok.synthetic import MorphLanguage

import oracles

words = st.text(alphabet="abcd", min_size=1, max_size=10)


# unigram ---------------------------------------------------------------------

def test_unigram_prefers_longer_piece():
    m = UnigramModel({"a": -1.0, "b": -1.0, "ab": -0.5})
    assert pieces("ab", m.segment("ab")) == ["ab"]
    assert UnigramModel({"a": -1.0}).segment("a") == [(0, 1)]


def test_unigram_tie_prefers_fewer_pieces_then_leftmost_longest():
    m = UnigramModel({"a": -1.0, "b": -1.0, "ab": -2.0})
    assert pieces("ab", m.segment("ab")) == ["ab"]
    m = UnigramModel({"a": -1.0, "b": -1.0, "c": -1.0, "ab": -1.0, "bc": -1.0})
    assert pieces("abc", m.segment("abc")) == ["ab", "c"]


def test_unigram_unknown_chars_and_empty_word():
    m = UnigramModel({"a": -1.0})
    assert pieces("aza", m.segment("aza")) == ["a", "z", "a"]
    assert m.score("aza", m.segment("aza")) == pytest.approx(-22.0)
    with pytest.raises(EmptyInputError):
        m.segment("")


@st.composite
def unigram_case(draw):
    vocab = draw(st.lists(st.text(alphabet="abc", min_size=1, max_size=3), min_size=1, max_size=5, unique=True))
    logp = draw(st.lists(st.floats(-8, -0.01), min_size=len(vocab), max_size=len(vocab)))
    word = draw(st.text(alphabet="abc", min_size=1, max_size=10))
    return dict(zip(vocab, logp)), word


@given(unigram_case())
def test_viterbi_matches_brute_force(case):
    table, word = case
    m = UnigramModel(table)
    seg = m.segment(word)
    assert is_partition(word, seg)
    assert m.score(word, seg) == pytest.approx(oracles.brute_force_unigram(table, word), abs=1e-9)


def test_train_unigram_small_corpus():
    m = train_unigram(WordTable("xx", {"abab": 4, "ab": 2}), 4)
    assert {"a", "b", "ab"} <= set(m.pieces)
    assert m.pieces["ab"] > m.pieces["a"]
    assert len(m) <= 4


def test_train_unigram_single_symbol():
    m = train_unigram(WordTable("xx", {"x": 1}), 1)
    assert m.pieces == {"x": 0.0}


def test_train_unigram_errors():
    with pytest.raises(ConfigError):
        train_unigram(WordTable("xx", {"abc": 3}), 2)
    with pytest.raises(EmptyCorpusError):
        train_unigram(WordTable("xx", {}), 10)


def test_unigram_invariants_on_synthetic_language():
    lang = MorphLanguage(seed=0, n_stems=150)
    table = WordTable("xx", {w: 1 + i % 5 for i, w in enumerate(lang.unique_words(600, seed=1))})
    m = train_unigram(table, 200)
    chars = {c for w in table for c in w}
    assert len(m) <= 200
    assert chars <= set(m.pieces)
    assert all(math.isfinite(v) and v <= 0 for v in m.pieces.values())
    assert sum(math.exp(v) for v in m.pieces.values()) <= 1 + 1e-6
    assert train_unigram(table, 200).pieces == m.pieces


def test_pruning_keeps_single_chars():
    table = WordTable("xx", {"qz": 1, "abcabc": 50, "abcab": 40})
    m = train_unigram(table, 7, UnigramTrainConfig(shrink_fraction=0.5))
    assert {"q", "z", "a", "b", "c"} <= set(m.pieces)


# bpe --------------------------------------------------------------------------

def test_bpe_first_merge_matches_pair_count_oracle():
    table = {"abab": 2, "abc": 1}
    counts = oracles.pair_counts(table)
    assert counts[("a", "b")] == 5 and counts[("b", "a")] == 2 and counts[("b", "c")] == 1
    m = train_bpe(WordTable("xx", table), 4)
    assert m.merges == [("a", "b")]
    assert m.tokenize("abab") == ["ab", "ab"]
    assert train_bpe(WordTable("xx", table), 10).merges == [("a", "b"), ("ab", "ab")]


def test_bpe_trivial_cases():
    assert train_bpe(WordTable("xx", {"x": 5}), 10).merges == []
    assert BpeModel([]).tokenize("cat") == ["c", "a", "t"]
    assert BpeModel([("a", "b")]).tokenize("abab") == ["ab", "ab"]


def test_bpe_lexicographic_tie_break():
    m = train_bpe(WordTable("xx", {"ab": 2, "cd": 2}), 10)
    assert m.merges[:2] == [("a", "b"), ("c", "d")]


@given(st.dictionaries(words, st.integers(1, 5), min_size=1, max_size=8), st.integers(4, 30))
def test_bpe_properties(table, vocab):
    wt = WordTable("xx", table)
    m = train_bpe(wt, vocab)
    chars = {c for w in table for c in w}
    assert len(m.merges) <= max(0, vocab - len(chars))
    assert train_bpe(wt, vocab).merges == m.merges
    for w in table:
        assert m.tokenize(w) == oracles.bpe_apply(m.merges, w)
        assert is_partition(w, m.segment(w))


# wordpiece ---------------------------------------------------------------------

def test_wordpiece_score_picks_rare_pair():
    m = train_wordpiece(WordTable("xx", {"aa": 10, "ab": 10}), 5)
    assert "##b" in m.pieces and ("ab" in m.pieces)
    assert "aa" not in m.pieces


def test_wordpiece_single_word_table():
    assert train_wordpiece(WordTable("xx", {"z": 1}), 2).pieces == {"z", "##z"}


def test_wordpiece_greedy_segmentation():
    vocab = {"work", "##shop", "w", "o", "r", "k", "s", "h", "p"} | {"##" + c for c in "workshp"}
    m = WordPieceModel(vocab)
    assert m.tokenize("workshop") == ["work", "##shop"]
    assert WordPieceModel({"a", "b", "##a", "##b"}).tokenize("ab") == ["a", "##b"]
    seg, unk = m.segment_with_unk("wxrk")
    assert seg == [(0, 4)] and unk


@given(st.dictionaries(words, st.integers(1, 5), min_size=1, max_size=8), st.integers(8, 30))
def test_wordpiece_properties(table, vocab):
    chars = {c for w in table for c in w}
    if vocab < 2 * len(chars):
        with pytest.raises(ConfigError):
            train_wordpiece(WordTable("xx", table), vocab)
        return
    m = train_wordpiece(WordTable("xx", table), vocab)
    assert len(m) <= vocab
    assert all(c in m.pieces and "##" + c in m.pieces for c in chars)
    for w in table:
        assert m.tokenize(w) == oracles.greedy_wordpiece(m.pieces, w)
        assert is_partition(w, m.segment(w))


# files --------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["unigram", "bpe", "wordpiece"])
def test_teacher_round_trip(tmp_path, kind):
    lang = MorphLanguage(seed=2, n_stems=60)
    table = WordTable("xx", {w: 2 for w in lang.unique_words(150, seed=3)})
    m = train_teacher(kind, table, 80)
    save_teacher(m, tmp_path / "t.txt")
    first = (tmp_path / "t.txt").read_bytes()
    save_teacher(m, tmp_path / "t.txt")
    assert (tmp_path / "t.txt").read_bytes() == first
    loaded = load_teacher(tmp_path / "t.txt")
    assert teacher_to_text(loaded) == teacher_to_text(m)
    for w in list(table)[:50] + ["zzqx"]:
        assert loaded.segment(w) == m.segment(w)


def test_teacher_file_errors(tmp_path):
    m = UnigramModel({"a": -0.5, "b": -1.0})
    save_teacher(m, tmp_path / "t.txt")
    text = (tmp_path / "t.txt").read_text()
    (tmp_path / "cut.txt").write_text(text[: len(text) // 2])
    with pytest.raises(MalformedFileError):
        load_teacher(tmp_path / "cut.txt")
    (tmp_path / "v9.txt").write_text(text.replace("v1", "v9"))
    with pytest.raises(VersionError):
        load_teacher(tmp_path / "v9.txt")
    with pytest.raises(ValueError):
        train_teacher("sentencepiece", WordTable("xx", {"a": 1}), 3)
