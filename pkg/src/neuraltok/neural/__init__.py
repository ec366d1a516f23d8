"""Vocabulary-free neural tokenizer: BiLSTM tagger, training and checkpoints."""
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import AdamW, lr_schedule
from .tagger import TaggerConfig, TaggerModel, batch_nll, nll_loss
from .train import GradientTape, TrainResult, train

__all__ = [
    "AdamW", "GradientTape", "TaggerConfig", "TaggerModel", "TrainResult", "batch_nll",
    "load_checkpoint", "lr_schedule", "nll_loss", "save_checkpoint", "train",
]
