"""Vocabulary-free neural tokenization: statistical teachers distilled into a character B/I tagger."""
from .corpus import Alphabet, WordTable, build_alphabet, build_word_table, extract_words
from .distill import DistillExample, Mode, build_dataset
from .errors import NeuralTokError
from .neural import TaggerConfig, TaggerModel, load_checkpoint, save_checkpoint, train
from .subword import load_teacher, save_teacher, train_teacher

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "DistillExample", "Mode", "NeuralTokError", "TaggerConfig", "TaggerModel", "WordTable",
    "build_alphabet", "build_dataset", "build_word_table", "extract_words", "load_checkpoint",
    "load_teacher", "save_checkpoint", "save_teacher", "train", "train_teacher",
]
