"""Character-level BiLSTM tagger that predicts B/I segmentation tags."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..corpus import PAD_ID, Alphabet
from ..distill import B, I, tags_to_segments
from ..errors import AlphabetError, ConfigError, EmptyInputError, ShapeError
from ..segmentation import Segmentation
from . import autograd as ag
from .autograd import Tensor

TAG_TO_ID = {B: 0, I: 1}


@dataclass
class TaggerConfig:
    embed_dim: int = 64
    hidden_out_dim: int = 128
    layers: int = 2
    lr_max: float = 3e-4
    t0_epochs: int = 3
    t_mult: int = 2
    epochs: int = 6
    weight_decay: float = 0.01
    batch_size: int = 16
    seed: int = 0
    val_fraction: float = 0.05

    def __post_init__(self):
        for name in ("embed_dim", "hidden_out_dim", "layers", "epochs", "batch_size", "t0_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.hidden_out_dim % 2:
            raise ConfigError("hidden_out_dim must be even (two directions)")
        if not self.lr_max > 0:
            raise ConfigError("lr_max must be positive")
        if self.t_mult < 1:
            raise ConfigError("t_mult must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def lstm_layer(x: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    """Unidirectional LSTM over axis 1; gate order is input, forget, output, cell."""
    n_batch, n_steps = x.data.shape[:2]
    hid = U.data.shape[0]
    xw = ag.add(ag.matmul(x, W), b)
    h = Tensor(np.zeros((n_batch, hid), dtype=x.data.dtype))
    c = h
    outs = []
    for t in range(n_steps):
        z = ag.add(ag.getitem(xw, (slice(None), t)), ag.matmul(h, U))
        gates = ag.sigmoid(ag.getitem(z, (slice(None), slice(0, 3 * hid))))
        cand = ag.tanh(ag.getitem(z, (slice(None), slice(3 * hid, 4 * hid))))
        i = ag.getitem(gates, (slice(None), slice(0, hid)))
        f = ag.getitem(gates, (slice(None), slice(hid, 2 * hid)))
        o = ag.getitem(gates, (slice(None), slice(2 * hid, 3 * hid)))
        c = ag.add(ag.mul(f, c), ag.mul(i, cand))
        h = ag.mul(o, ag.tanh(c))
        outs.append(h)
    return ag.stack(outs, axis=1)


def reverse_index(lengths: np.ndarray, n_steps: int) -> np.ndarray:
    """Per-row permutation reversing the first ``length`` steps, leaving padding in place."""
    t = np.arange(n_steps)[None, :]
    L = np.asarray(lengths)[:, None]
    return np.where(t < L, L - 1 - t, t)


def bilstm(x: Tensor, lengths: np.ndarray, params, prefix: str, layers: int) -> Tensor:
    rev = reverse_index(lengths, x.data.shape[1])
    for layer in range(layers):
        p = f"{prefix}{layer}"
        fw = lstm_layer(x, params[f"{p}.fw.W"], params[f"{p}.fw.U"], params[f"{p}.fw.b"])
        bw = ag.permute_time(
            lstm_layer(ag.permute_time(x, rev), params[f"{p}.bw.W"], params[f"{p}.bw.U"], params[f"{p}.bw.b"]),
            rev,
        )
        x = ag.concat([fw, bw], axis=-1)
    return x


def init_bilstm_params(rng, prefix, layers, in_dim, hid, dtype) -> dict[str, np.ndarray]:
    out = {}
    for layer in range(layers):
        d = in_dim if layer == 0 else 2 * hid
        for direction in ("fw", "bw"):
            p = f"{prefix}{layer}.{direction}"
            out[f"{p}.W"] = _uniform(rng, (d, 4 * hid), d, dtype)
            out[f"{p}.U"] = _uniform(rng, (hid, 4 * hid), hid, dtype)
            out[f"{p}.b"] = _uniform(rng, (4 * hid,), hid, dtype)
    return out


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


@dataclass
class EncodedBatch:
    ids: np.ndarray  # (B, T') symbol ids, language tag first when present
    lengths: np.ndarray  # (B,) sequence lengths including the tag
    offsets: np.ndarray  # (B,) 1 where a tag was prepended
    n_chars: np.ndarray  # (B,) word lengths


class TaggerModel:
    """Embedding, stacked BiLSTM and a two-way tag head over one alphabet."""

    def __init__(self, config: TaggerConfig, alphabet: Alphabet, params: dict[str, np.ndarray] | None = None,
                 dtype=np.float32):
        self.config = config
        self.alphabet = alphabet
        if params is None:
            params = self._init_params(np.random.default_rng(config.seed), dtype)
        expected = self.param_shapes()
        if set(params) != set(expected):
            raise ShapeError(f"parameter names differ: {sorted(set(params) ^ set(expected))}")
        for name, shape in expected.items():
            if tuple(params[name].shape) != shape:
                raise ShapeError(f"{name}: expected {shape}, got {params[name].shape}")
        self.params = {k: Tensor(np.asarray(v), requires_grad=True, name=k) for k, v in params.items()}

    @property
    def hidden(self) -> int:
        return self.config.hidden_out_dim // 2

    @property
    def dtype(self):
        return self.params["embedding"].data.dtype

    def param_shapes(self) -> dict[str, tuple]:
        cfg, hid = self.config, self.config.hidden_out_dim // 2
        shapes = {"embedding": (len(self.alphabet), cfg.embed_dim)}
        for layer in range(cfg.layers):
            d = cfg.embed_dim if layer == 0 else cfg.hidden_out_dim
            for direction in ("fw", "bw"):
                p = f"lstm{layer}.{direction}"
                shapes[f"{p}.W"] = (d, 4 * hid)
                shapes[f"{p}.U"] = (hid, 4 * hid)
                shapes[f"{p}.b"] = (4 * hid,)
        shapes["head.W"] = (cfg.hidden_out_dim, 2)
        shapes["head.b"] = (2,)
        return shapes

    def _init_params(self, rng, dtype):
        cfg = self.config
        params = {"embedding": _uniform(rng, (len(self.alphabet), cfg.embed_dim), cfg.embed_dim, dtype)}
        params.update(init_bilstm_params(rng, "lstm", cfg.layers, cfg.embed_dim, self.config.hidden_out_dim // 2,
                                         dtype))
        params["head.W"] = _uniform(rng, (cfg.hidden_out_dim, 2), cfg.hidden_out_dim, dtype)
        params["head.b"] = _uniform(rng, (2,), cfg.hidden_out_dim, dtype)
        return params

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def copy(self) -> "TaggerModel":
        return TaggerModel(self.config, self.alphabet, self.state())

    def encoder_param_names(self) -> list[str]:
        return [k for k in self.params if not k.startswith("head.")]

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    # encoding ---------------------------------------------------------

    def lang_id(self, lang: Optional[str | int]) -> Optional[int]:
        if lang is None:
            return None
        if isinstance(lang, str):
            return self.alphabet.lang_id(lang)
        if not self.alphabet.is_lang_id(lang):
            raise AlphabetError(f"id {lang} is not a language tag")
        return int(lang)

    def encode(self, words: Sequence[str], langs: Sequence[Optional[str]] | None = None) -> EncodedBatch:
        ids = [self.alphabet.encode(w) for w in words]
        lang_ids = [self.lang_id(l) for l in langs] if langs is not None else [None] * len(words)
        return self.encode_ids(ids, lang_ids)

    def encode_ids(self, char_ids: Sequence[Sequence[int]], lang_ids: Sequence[Optional[int]]) -> EncodedBatch:
        n_sym = len(self.alphabet)
        seqs = []
        for ids, lang in zip(char_ids, lang_ids):
            if len(ids) == 0:
                raise EmptyInputError("cannot tag an empty word")
            if min(ids) < 0 or max(ids) >= n_sym:
                raise AlphabetError(f"symbol id out of range for alphabet of size {n_sym}")
            seqs.append(([lang] if lang is not None else []) + list(ids))
        lengths = np.array([len(s) for s in seqs], dtype=np.int64)
        out = np.full((len(seqs), int(lengths.max()) if seqs else 0), PAD_ID, dtype=np.int64)
        for k, s in enumerate(seqs):
            out[k, : len(s)] = s
        offsets = np.array([0 if l is None else 1 for l in lang_ids], dtype=np.int64)
        return EncodedBatch(out, lengths, offsets, lengths - offsets)

    # forward ------------------------------------------------------------

    def _param(self, name, record):
        t = self.params[name]
        return t if record else Tensor(t.data)

    def forward_batch(self, batch: EncodedBatch, record: bool = True) -> tuple[Tensor, Tensor]:
        """Logits (B, T, 2) and hidden vectors (B, T, hidden_out_dim) per character.

        The prepended language position, when present, is rotated out so that
        index ``t`` always refers to character ``t`` of the word.
        """
        params = {k: self._param(k, record) for k in self.params}
        x = ag.embedding(params["embedding"], batch.ids)
        h = bilstm(x, batch.lengths, params, "lstm", self.config.layers)
        if batch.offsets.any():
            n_steps = batch.ids.shape[1]
            rot = (np.arange(n_steps)[None, :] + batch.offsets[:, None]) % n_steps
            h = ag.permute_time(h, rot)
        n_chars = int(batch.n_chars.max())
        h = ag.getitem(h, (slice(None), slice(0, n_chars)))
        logits = ag.add(ag.matmul(h, params["head.W"]), params["head.b"])
        return logits, h

    def forward(self, char_ids: Sequence[int], lang: Optional[str | int] = None) -> tuple[np.ndarray, np.ndarray]:
        batch = self.encode_ids([list(char_ids)], [self.lang_id(lang)])
        logits, h = self.forward_batch(batch, record=False)
        return logits.data[0], h.data[0]

    # decoding -----------------------------------------------------------

    def _tags_from_logits(self, logits: np.ndarray, n: int) -> str:
        pred = logits[:n].argmax(axis=-1)
        return B + "".join(B if p == 0 else I for p in pred[1:])

    def tag_many(self, words: Sequence[str], lang: Optional[str] = None, batch_size: int = 256) -> list[str]:
        out = []
        for lo in range(0, len(words), batch_size):
            chunk = words[lo:lo + batch_size]
            batch = self.encode(chunk, [lang] * len(chunk))
            logits, _ = self.forward_batch(batch, record=False)
            out += [self._tags_from_logits(logits.data[k], len(w)) for k, w in enumerate(chunk)]
        return out

    def segment_many(self, words: Sequence[str], lang: Optional[str] = None) -> list[Segmentation]:
        for w in words:
            if not w:
                raise EmptyInputError("cannot segment an empty word")
        # group by length so that batches carry no padding
        order = sorted(range(len(words)), key=lambda k: (len(words[k]), k))
        tags = self.tag_many([words[k] for k in order], lang)
        out: list[Segmentation] = [None] * len(words)  # type: ignore[list-item]
        for k, t in zip(order, tags):
            out[k] = tags_to_segments(words[k], t)
        return out

    def tokenize(self, word: str, lang: Optional[str] = None) -> Segmentation:
        if not word:
            raise EmptyInputError("cannot segment an empty word")
        return self.segment_many([word], lang)[0]

    def segment(self, word: str, lang: Optional[str] = None) -> Segmentation:
        return self.tokenize(word, lang)

    def pool_representations(self, word: str, lang: Optional[str] = None) -> list[np.ndarray]:
        """One max-pooled hidden vector per predicted segment of ``word``."""
        if not word:
            raise EmptyInputError("cannot segment an empty word")
        logits, h = self.forward(self.alphabet.encode(word), lang)
        seg = tags_to_segments(word, self._tags_from_logits(logits, len(word)))
        return [h[s:e].max(axis=0) for s, e in seg]


def nll_loss(logits: np.ndarray, tags: str) -> float:
    """Summed negative log-likelihood of one word's tags."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (len(tags), 2):
        raise ShapeError(f"logits {logits.shape} do not match {len(tags)} tags")
    target = np.array([TAG_TO_ID[t] for t in tags])
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(tags)), target].sum())


def batch_targets(tag_strings: Sequence[str], n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    targets = np.zeros((len(tag_strings), n_steps), dtype=np.int64)
    mask = np.zeros((len(tag_strings), n_steps))
    for k, tags in enumerate(tag_strings):
        targets[k, : len(tags)] = [TAG_TO_ID[t] for t in tags]
        mask[k, : len(tags)] = 1.0
    return targets, mask


def batch_nll(logits: Tensor, tag_strings: Sequence[str]) -> Tensor:
    """Per-word summed NLL, averaged over the batch; padding is masked out."""
    n_batch, n_steps, _ = logits.data.shape
    targets, mask = batch_targets(tag_strings, n_steps)
    flat = ag.reshape(logits, (n_batch * n_steps, 2))
    return ag.cross_entropy(flat, targets.reshape(-1), mask.reshape(-1) / max(n_batch, 1))
