import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def tiny_alphabet():
    from neuraltok.corpus import Alphabet
    return Alphabet(["<PAD>", "<UNK>", "<lang:en>", "a", "b"])


@pytest.fixture
def tiny_model64(tiny_alphabet):
    from neuraltok.neural import TaggerConfig, TaggerModel
    cfg = TaggerConfig(embed_dim=4, hidden_out_dim=8, layers=1, seed=3)
    m = TaggerModel(cfg, tiny_alphabet)
    return TaggerModel(cfg, tiny_alphabet, {k: v.astype(np.float64) for k, v in m.state().items()})
