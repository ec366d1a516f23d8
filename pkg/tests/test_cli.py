import io
import json
import subprocess
import sys

import pytest

from neuraltok.cli import main
from neuraltok.subword import load_teacher
from neuraltok.synthetic import MorphLanguage

SMALL_TRAIN = ["--embed-dim", "8", "--hidden-out-dim", "8", "--layers", "1", "--epochs", "2"]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    lang = MorphLanguage(seed=0, n_stems=120)
    (d / "a.txt").write_text(lang.text(1500, seed=1) + "see <b>tags</b> http://x.org\n")
    (d / "b.txt").write_text(lang.text(800, seed=2))
    (d / "c.txt").write_text(MorphLanguage(seed=5, n_stems=80).text(800, seed=3))
    return d


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(src, out, seed=0):
    assert run("curate", "--lang", "xx", src / "a.txt", src / "b.txt", "--out-dir", out) == 0
    assert run("train-teacher", "--kind", "unigram", "--table", out / "words.xx.tsv", "--vocab-size", 150,
               "--out-dir", out) == 0
    assert run("distill", "--tables", out / "words.xx.tsv", "--teachers", out / "teacher.xx.unigram.txt",
               "--alphabet", out / "alphabet.txt", "--seed", seed, "--out-dir", out) == 0
    assert run("train", "--dataset", out / "dataset.jsonl", "--alphabet", out / "alphabet.txt", "--seed", seed,
               *SMALL_TRAIN, "--out-dir", out) == 0
    assert run("eval", "--checkpoint", out / "model.ntk", "--teachers", f"uni={out / 'teacher.xx.unigram.txt'}",
               "--words", out / "words.xx.tsv", "--max-words", 100, "--seed", seed, "--out-dir", out) == 0


def test_pipeline_outputs_and_configs(corpus_dir, tmp_path, capsys):
    out = tmp_path / "run"
    pipeline(corpus_dir, out)
    for name in ["words.xx.tsv", "alphabet.txt", "teacher.xx.unigram.txt", "dataset.jsonl", "model.ntk",
                 "train_log.jsonl", "report.json", "report.csv"]:
        assert (out / name).exists(), name
    for cfg in ["curate", "teacher.xx.unigram", "distill", "train", "eval"]:
        assert json.loads((out / f"{cfg}.config.json").read_text())["seed"] == 0
    assert json.loads((out / "curate.config.json").read_text())["max_len"] == 30
    train_cfg = json.loads((out / "train.config.json").read_text())
    assert (train_cfg["lr_max"], train_cfg["t0_epochs"], train_cfg["t_mult"]) == (3e-4, 3, 2)
    assert len((out / "train_log.jsonl").read_text().splitlines()) == 2
    report = json.loads((out / "report.json").read_text())
    assert sorted({r["noise_fraction"] for r in report}) == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    words = (out / "words.xx.tsv").read_text()
    assert "tags" in words and "http" not in words and "<b>" not in words


def test_pipeline_is_byte_reproducible(corpus_dir, tmp_path):
    pipeline(corpus_dir, tmp_path / "r1", seed=7)
    pipeline(corpus_dir, tmp_path / "r2", seed=7)
    for name in ["words.xx.tsv", "alphabet.txt", "teacher.xx.unigram.txt", "dataset.jsonl", "model.ntk",
                 "train_log.jsonl", "report.json", "report.csv"]:
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes(), name


def test_train_teacher_kinds(corpus_dir, tmp_path):
    out = tmp_path / "t"
    run("curate", "--lang", "xx", corpus_dir / "a.txt", "--out-dir", out)
    for kind in ["bpe", "wordpiece"]:
        assert run("train-teacher", "--kind", kind, "--table", out / "words.xx.tsv", "--vocab-size", 120,
                   "--out-dir", out) == 0
        assert load_teacher(out / f"teacher.xx.{kind}.txt").kind == kind
    with pytest.raises(SystemExit) as info:
        run("train-teacher", "--kind", "sentencepiece", "--table", out / "words.xx.tsv")
    assert info.value.code != 0


def test_distill_modes_and_language_mismatch(corpus_dir, tmp_path, capsys):
    out = tmp_path / "m"
    run("curate", f"xx={corpus_dir / 'a.txt'}", f"yy={corpus_dir / 'c.txt'}", "--out-dir", out)
    for lang in ["xx", "yy"]:
        run("train-teacher", "--kind", "bpe", "--table", out / f"words.{lang}.tsv", "--vocab-size", 60,
            "--out-dir", out)
    tables = [out / "words.xx.tsv", out / "words.yy.tsv"]
    teachers = [f"xx={out / 'teacher.xx.bpe.txt'}", f"yy={out / 'teacher.yy.bpe.txt'}"]
    assert run("distill", "--tables", *tables, "--teachers", *teachers, "--alphabet", out / "alphabet.txt",
               "--mode", "mixed", "--out-dir", out) == 0
    n_unique = sum(len(p.read_text().splitlines()) - 1 for p in tables)
    records = [json.loads(l) for l in (out / "dataset.jsonl").read_text().splitlines()[1:]]
    assert len(records) == 2 * n_unique
    assert sum(r["lang"] is None for r in records) == n_unique
    assert run("distill", "--tables", *tables, "--teachers", teachers[0], "--alphabet", out / "alphabet.txt",
               "--mode", "multi", "--out-dir", out) == 1
    assert "languages differ" in capsys.readouterr().err


def test_curate_missing_input_fails(tmp_path, capsys):
    assert run("curate", "--lang", "xx", tmp_path / "nope.txt", "--out-dir", tmp_path) == 1
    assert "cannot read" in capsys.readouterr().err


def test_config_file_and_flag_precedence(corpus_dir, tmp_path):
    out = tmp_path / "c"
    run("curate", "--lang", "xx", corpus_dir / "a.txt", "--out-dir", out)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"vocab-size": 90, "kind": "bpe", "seed": 4}))
    assert run("train-teacher", "--config", cfg, "--table", out / "words.xx.tsv", "--vocab-size", 70,
               "--out-dir", out) == 0
    resolved = json.loads((out / "teacher.xx.bpe.config.json").read_text())
    assert (resolved["vocab_size"], resolved["kind"], resolved["seed"]) == (70, "bpe", 4)
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert run("curate", "--config", cfg, "--lang", "xx", corpus_dir / "a.txt", "--out-dir", out) == 1


def test_tokenize_and_finetune_demo(corpus_dir, tmp_path, capsys, monkeypatch):
    out = tmp_path / "tok"
    pipeline(corpus_dir, out)
    capsys.readouterr()
    words = ["tricycles", "", "kasumoran", "x"]
    monkeypatch.setattr(sys, "stdin", io.StringIO("\n".join(words) + "\n"))
    assert run("tokenize", "--checkpoint", out / "model.ntk") == 0
    lines = capsys.readouterr().out.split("\n")[:-1]
    assert len(lines) == len(words) and lines[1] == ""
    assert [l.replace("/", "") for l in lines] == words
    monkeypatch.setattr(sys, "stdin", io.StringIO("abab\n"))
    assert run("tokenize", "--teacher", out / "teacher.xx.unigram.txt") == 0
    assert capsys.readouterr().out.replace("/", "") == "abab\n"

    demo = ["finetune-demo", "--checkpoint", out / "model.ntk", "--synthetic", "--n-examples", 20,
            "--proj-dim", 8, "--hidden", 8, "--epochs", 1]
    assert run(*demo, "--freeze-tokenizer", "--out-dir", tmp_path / "frozen") == 0
    text = capsys.readouterr().out
    assert "accuracy before" in text and "accuracy after" in text
    metrics = json.loads((tmp_path / "frozen" / "finetune_metrics.json").read_text())
    assert metrics["tokenizer_param_delta"] == 0.0
    assert run(*demo, "--out-dir", tmp_path / "live") == 0
    assert json.loads((tmp_path / "live" / "finetune_metrics.json").read_text())["tokenizer_param_delta"] > 0


def test_console_entry_point_usage_error():
    proc = subprocess.run([sys.executable, "-m", "neuraltok.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2 and "invalid choice" in proc.stderr
