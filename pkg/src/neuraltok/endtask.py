"""End-to-end task learning on top of pooled segment representations.

The tagger decides segment boundaries (a discrete choice that receives no
gradient); the hidden vectors inside each segment are max-pooled and fed to a
projection + BiLSTM + classifier head. Back-propagation reaches the tagger's
embedding and recurrent weights through the pooled vectors.
"""
from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Alphabet
from .distill import tags_to_segments
from .evalkit import NOISE_OPS, perturb_word
from .errors import ConfigError, EmptyInputError, MalformedFileError, TrainingError
from .neural import autograd as ag
from .neural.autograd import Tensor
from .neural.optim import AdamW
from .neural.tagger import TaggerModel, _uniform, bilstm, init_bilstm_params
from .synthetic import MorphLanguage

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass
class LabeledExample:
    text: list[str]
    label: int

    def __post_init__(self):
        if not self.text:
            raise EmptyInputError("labeled example with empty text")


@dataclass
class TaskConfig:
    proj_dim: int = 256
    hidden: int = 256
    layers: int = 2
    n_classes: int = 2
    lr: float = 1e-3
    weight_decay: float = 0.01
    epochs: int = 3
    batch_size: int = 16
    seed: int = 0
    freeze_tokenizer: bool = False

    def __post_init__(self):
        if self.hidden % 2:
            raise ConfigError("task hidden size must be even")
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")

    def to_dict(self):
        return asdict(self)


# encoders --------------------------------------------------------------------

class NeuralEncoder:
    """Pooled segment vectors from a (possibly trainable) tagger."""

    def __init__(self, tagger: TaggerModel, lang: Optional[str] = None):
        self.tagger = tagger
        self.lang = lang

    @property
    def dim(self) -> int:
        return self.tagger.config.hidden_out_dim

    @property
    def params(self) -> dict[str, Tensor]:
        return self.tagger.params

    def trainable_names(self) -> list[str]:
        return self.tagger.encoder_param_names()

    def encode_batch(self, texts: Sequence[Sequence[str]], record: bool = True) -> tuple[Tensor, np.ndarray]:
        words = [w for text in texts for w in text]
        if not texts or any(len(t) == 0 for t in texts):
            raise EmptyInputError("cannot encode empty text")
        batch = self.tagger.encode(words, [self.lang] * len(words))
        logits, h = self.tagger.forward_batch(batch, record=record)
        spans, owner = [], []
        k = 0
        for b, text in enumerate(texts):
            for w in text:
                tags = self.tagger._tags_from_logits(logits.data[k], len(w))
                for s, e in tags_to_segments(w, tags):
                    spans.append((k, s, e))
                    owner.append(b)
                k += 1
        pooled = ag.span_max(h, spans)
        return _pad_by_owner(pooled, owner, len(texts))


class CharBaselineEncoder:
    """Whitespace words represented by the max over their character embeddings."""

    def __init__(self, alphabet: Alphabet, dim: int = 128, seed: int = 0, dtype=np.float32,
                 embedding: np.ndarray | None = None):
        self.alphabet = alphabet
        if embedding is None:
            embedding = _uniform(np.random.default_rng(seed), (len(alphabet), dim), dim, dtype)
        self.params = {"embedding": Tensor(np.asarray(embedding), requires_grad=True, name="embedding")}

    @property
    def dim(self) -> int:
        return self.params["embedding"].data.shape[1]

    def trainable_names(self) -> list[str]:
        return ["embedding"]

    def encode_batch(self, texts: Sequence[Sequence[str]], record: bool = True) -> tuple[Tensor, np.ndarray]:
        if not texts or any(len(t) == 0 for t in texts):
            raise EmptyInputError("cannot encode empty text")
        emb = self.params["embedding"] if record else Tensor(self.params["embedding"].data)
        words = [w for text in texts for w in text]
        if any(not w for w in words):
            raise EmptyInputError("empty word")
        width = max(len(w) for w in words)
        ids = np.zeros((len(words), width), dtype=np.int64)
        for k, w in enumerate(words):
            ids[k, : len(w)] = self.alphabet.encode(w)
        chars = ag.embedding(emb, ids)
        owner = [b for b, text in enumerate(texts) for _ in text]
        pooled = ag.span_max(chars, [(k, 0, len(w)) for k, w in enumerate(words)])
        return _pad_by_owner(pooled, owner, len(texts))


def _pad_by_owner(rows: Tensor, owner: Sequence[int], n_texts: int) -> tuple[Tensor, np.ndarray]:
    lengths = np.bincount(np.asarray(owner, dtype=np.int64), minlength=n_texts)
    width = int(lengths.max())
    positions, seen = [], [0] * n_texts
    for b in owner:
        positions.append(b * width + seen[b])
        seen[b] += 1
    padded = ag.scatter_rows(rows, np.asarray(positions), (n_texts, width, rows.data.shape[1]))
    return padded, lengths


def encode_text(tokenizer: TaggerModel, text: Sequence[str], lang: Optional[str] = None) -> np.ndarray:
    """Segment vectors for every word of ``text``, concatenated in order."""
    if not text:
        raise EmptyInputError("cannot encode empty text")
    padded, lengths = NeuralEncoder(tokenizer, lang).encode_batch([list(text)], record=False)
    return padded.data[0, : lengths[0]]


def char_baseline_encode(model: CharBaselineEncoder, text: Sequence[str]) -> np.ndarray:
    if not text:
        raise EmptyInputError("cannot encode empty text")
    padded, lengths = model.encode_batch([list(text)], record=False)
    return padded.data[0, : lengths[0]]


# task head -------------------------------------------------------------------

class TaskHead:
    def __init__(self, in_dim: int, cfg: TaskConfig, params: dict[str, np.ndarray] | None = None,
                 dtype=np.float32):
        self.cfg = cfg
        self.in_dim = in_dim
        if params is None:
            rng = np.random.default_rng(cfg.seed + 1)
            hid = cfg.hidden // 2
            params = {
                "proj.W": _uniform(rng, (in_dim, cfg.proj_dim), in_dim, dtype),
                "proj.b": _uniform(rng, (cfg.proj_dim,), in_dim, dtype),
            }
            params.update(init_bilstm_params(rng, "task", cfg.layers, cfg.proj_dim, hid, dtype))
            params["cls.W"] = _uniform(rng, (cfg.hidden, cfg.n_classes), cfg.hidden, dtype)
            params["cls.b"] = _uniform(rng, (cfg.n_classes,), cfg.hidden, dtype)
        self.params = {k: Tensor(np.asarray(v), requires_grad=True, name=k) for k, v in params.items()}

    def state(self):
        return {k: t.data.copy() for k, t in self.params.items()}

    def copy(self) -> "TaskHead":
        return TaskHead(self.in_dim, self.cfg, self.state())

    def logits(self, segs: Tensor, lengths: np.ndarray, record: bool = True) -> Tensor:
        p = self.params if record else {k: Tensor(t.data) for k, t in self.params.items()}
        x = ag.add(ag.matmul(segs, p["proj.W"]), p["proj.b"])
        x = bilstm(x, lengths, p, "task", self.cfg.layers)
        sentence = ag.span_max(x, [(b, 0, int(n)) for b, n in enumerate(lengths)])
        return ag.add(ag.matmul(sentence, p["cls.W"]), p["cls.b"])


def task_loss(encoder, head: TaskHead, batch: Sequence[LabeledExample], record: bool = True,
              record_encoder: bool | None = None) -> Tensor:
    record_encoder = record if record_encoder is None else record_encoder
    segs, lengths = encoder.encode_batch([ex.text for ex in batch], record=record_encoder)
    logits = head.logits(segs, lengths, record=record)
    targets = np.array([ex.label for ex in batch])
    return ag.cross_entropy(logits, targets, np.full(len(batch), 1.0 / len(batch)))


def predict(encoder, head: TaskHead, texts: Sequence[Sequence[str]], batch_size: int = 64) -> np.ndarray:
    out = []
    for lo in range(0, len(texts), batch_size):
        chunk = [list(t) for t in texts[lo:lo + batch_size]]
        segs, lengths = encoder.encode_batch(chunk, record=False)
        out.append(head.logits(segs, lengths, record=False).data.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate_task(encoder, head: TaskHead, data: Sequence[LabeledExample]) -> float:
    if not data:
        raise EmptyInputError("no evaluation data")
    pred = predict(encoder, head, [ex.text for ex in data])
    return float(np.mean(pred == np.array([ex.label for ex in data])))


@dataclass
class FinetuneResult:
    encoder: object
    head: TaskHead
    log: list[dict] = field(default_factory=list)


def _copy_encoder(encoder):
    if isinstance(encoder, NeuralEncoder):
        return NeuralEncoder(encoder.tagger.copy(), encoder.lang)
    if isinstance(encoder, TaggerModel):
        return NeuralEncoder(encoder.copy())
    return CharBaselineEncoder(encoder.alphabet, embedding=encoder.params["embedding"].data.copy())


def finetune(encoder, head: TaskHead, data: Sequence[LabeledExample], cfg: TaskConfig,
             max_steps: int | None = None) -> FinetuneResult:
    """Jointly train the task head and (unless frozen) the encoder.

    Inputs are copied; the originals are never modified. ``encoder`` may be a
    :class:`TaggerModel`, a :class:`NeuralEncoder` or a
    :class:`CharBaselineEncoder`.
    """
    if not data:
        raise EmptyInputError("no fine-tuning data")
    enc = _copy_encoder(encoder)
    head = head.copy()
    params = dict(head.params)
    names = list(head.params)
    if not cfg.freeze_tokenizer:
        for k in enc.trainable_names():
            params[f"enc.{k}"] = enc.params[k]
            names.append(f"enc.{k}")
    opt = AdamW(params, weight_decay=cfg.weight_decay, names=names)
    order = list(range(len(data)))
    rng = random.Random(cfg.seed)
    records, steps = [], 0
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [data[i] for i in order[lo:lo + cfg.batch_size]]
            for t in params.values():
                t.grad = None
            loss = task_loss(enc, head, batch, record=True, record_encoder=not cfg.freeze_tokenizer)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingError(f"non-finite task loss at epoch {epoch + 1}")
            loss.backward()
            opt.step(cfg.lr)
            total += value * len(batch)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        records.append({"epoch": epoch + 1, "loss": total / len(data)})
        if max_steps is not None and steps >= max_steps:
            break
    return FinetuneResult(enc, head, records)


# data ------------------------------------------------------------------------

def synthetic_task(n: int, seed: int, n_keywords: int = 20, n_fillers: int = 400, text_len: int = 6,
                   typo_rate: float = 0.0, language: MorphLanguage | None = None) -> list[LabeledExample]:
    """Two-class data: label 0 texts contain a word from list A, label 1 one from list B.

    Keyword lists and filler words are drawn from a seeded synthetic language,
    so the same ``seed`` always yields the same lists; ``typo_rate`` perturbs
    the keyword itself in that fraction of examples.
    """
    language = language or MorphLanguage(seed=1000 + seed, n_stems=800)
    vocab = language.unique_words(2 * n_keywords + n_fillers, seed=seed)
    list_a, list_b = vocab[:n_keywords], vocab[n_keywords:2 * n_keywords]
    fillers = vocab[2 * n_keywords:]
    rng = random.Random(seed * 7919 + 17)
    out = []
    for _ in range(n):
        label = rng.randrange(2)
        key = rng.choice(list_a if label == 0 else list_b)
        if typo_rate and rng.random() < typo_rate:
            edited = perturb_word(key, rng.choice(NOISE_OPS), rng, _LETTERS)
            key = edited[0] if edited else key
        text = [rng.choice(fillers) for _ in range(text_len - 1)]
        text.insert(rng.randrange(text_len), key)
        out.append(LabeledExample(text, label))
    return out


def write_task_tsv(data: Sequence[LabeledExample], path: str | Path, seed: int | None = None) -> None:
    lines = [f"# seed={seed}"] if seed is not None else []
    lines += [" ".join(ex.text) + "\t" + str(ex.label) for ex in data]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_task_tsv(path: str | Path) -> list[LabeledExample]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1].strip().lstrip("-").isdigit():
            raise MalformedFileError(f"{path}:{lineno}: expected 'text<TAB>label'")
        text = parts[0].split()
        if not text:
            raise MalformedFileError(f"{path}:{lineno}: empty text")
        out.append(LabeledExample(text, int(parts[1])))
    return out
