"""Distillation training loop for the tagger."""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..corpus import Alphabet
from ..distill import DistillExample
from ..errors import EmptyInputError, StateError, TrainingError
from .autograd import Tensor
from .optim import AdamW, lr_schedule
from .tagger import TaggerConfig, TaggerModel, batch_nll

log = logging.getLogger(__name__)


class GradientTape:
    """Records one forward pass over a batch and turns it into parameter gradients."""

    def __init__(self, model: TaggerModel):
        self.model = model
        self.loss: Optional[Tensor] = None
        self._recorded = False

    def record(self, examples: Sequence[DistillExample]) -> float:
        self._recorded = True
        if not examples:
            self.loss = None
            return 0.0
        batch = self.model.encode_ids([ex.char_ids for ex in examples],
                                      [self.model.lang_id(ex.lang) for ex in examples])
        logits, _ = self.model.forward_batch(batch, record=True)
        self.loss = batch_nll(logits, [ex.tags for ex in examples])
        return float(self.loss.data)

    def backward(self) -> dict[str, np.ndarray]:
        """Zero the model's gradients, back-propagate, and return a copy of them."""
        if not self._recorded:
            raise StateError("backward() called without a recorded forward pass")
        self._recorded = False
        self.model.zero_grad()
        if self.loss is not None:
            self.loss.backward()
            self.loss = None
        return {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for k, t in self.model.params.items()}


@dataclass
class TrainResult:
    model: TaggerModel
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    train_idx: list[int] = field(default_factory=list)
    val_idx: list[int] = field(default_factory=list)


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    idx = list(range(n))
    random.Random(seed).shuffle(idx)
    n_val = int(round(n * val_fraction)) if n > 1 else 0
    if val_fraction > 0 and n > 1:
        n_val = max(1, n_val)
    return sorted(idx[n_val:]), sorted(idx[:n_val])


def make_batches(examples: Sequence[DistillExample], order: Sequence[int], batch_size: int,
                 rng: np.random.Generator) -> list[list[int]]:
    """Shuffled order, length-sorted within pools of 32 batches, then batch order shuffled."""
    order = list(order)
    pool = batch_size * 32
    batches = []
    for lo in range(0, len(order), pool):
        chunk = sorted(order[lo:lo + pool], key=lambda k: len(examples[k].char_ids))
        batches += [chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size)]
    perm = rng.permutation(len(batches))
    return [batches[p] for p in perm]


def mean_loss(model: TaggerModel, examples: Sequence[DistillExample], idx: Sequence[int],
              batch_size: int = 256) -> float:
    """Average per-word summed NLL without recording gradients."""
    if not idx:
        return float("nan")
    idx = sorted(idx, key=lambda k: len(examples[k].char_ids))
    total = 0.0
    for lo in range(0, len(idx), batch_size):
        chunk = [examples[k] for k in idx[lo:lo + batch_size]]
        batch = model.encode_ids([ex.char_ids for ex in chunk], [model.lang_id(ex.lang) for ex in chunk])
        logits, _ = model.forward_batch(batch, record=False)
        total += float(batch_nll(logits, [ex.tags for ex in chunk]).data) * len(chunk)
    return total / len(idx)


def train(examples: Sequence[DistillExample], cfg: TaggerConfig, alphabet: Alphabet,
          log_path: str | Path | None = None) -> TrainResult:
    """Train a tagger and keep the epoch with the lowest validation loss.

    Examples must carry ``char_ids`` encoded with ``alphabet``. The split is a
    seeded shuffle; the learning rate follows the warm-restart schedule at
    fractional-epoch resolution.
    """
    if not examples:
        raise EmptyInputError("empty training dataset")
    for ex in examples:
        if not ex.char_ids:
            ex.char_ids = alphabet.encode(ex.word)
    model = TaggerModel(cfg, alphabet)
    train_idx, val_idx = split_indices(len(examples), cfg.val_fraction, cfg.seed)
    if not train_idx:
        raise EmptyInputError("no training examples after the validation split")
    opt = AdamW(model.params, weight_decay=cfg.weight_decay)
    tape = GradientTape(model)
    rng = np.random.default_rng(cfg.seed)

    records, best, best_state, best_epoch = [], math.inf, model.state(), 0
    for epoch in range(cfg.epochs):
        batches = make_batches(examples, rng.permutation(train_idx), cfg.batch_size, rng)
        lr0 = lr_schedule(epoch, cfg)
        total = 0.0
        for k, batch in enumerate(batches):
            lr = lr_schedule(epoch + k / len(batches), cfg)
            loss = tape.record([examples[i] for i in batch])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}, batch {k}")
            tape.backward()
            opt.step(lr)
            total += loss * len(batch)
        train_loss = total / len(train_idx)
        val_loss = mean_loss(model, examples, val_idx) if val_idx else train_loss
        rec = {"epoch": epoch + 1, "train_loss": train_loss, "val_loss": val_loss, "lr": lr0}
        records.append(rec)
        log.info("epoch %d train %.4f val %.4f lr %.2e", epoch + 1, train_loss, val_loss, lr0)
        if val_loss < best:
            best, best_state, best_epoch = val_loss, model.state(), epoch + 1
    final = TaggerModel(cfg, alphabet, best_state)
    if log_path is not None:
        write_log(records, log_path)
    return TrainResult(final, records, best_epoch, train_idx, val_idx)


def write_log(records: Sequence[dict], path: str | Path) -> None:
    Path(path).write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
