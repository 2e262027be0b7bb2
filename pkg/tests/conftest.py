import sys

import numpy as np
import pytest
import torch

from titlepress.config import ModelConfig
from titlepress.corpus import RawTitlePair, build_vocab, encode_dataset, prepare
from titlepress.embedder import random_word_vectors
from titlepress.model import TitleCompressor

TOY = dict(max_len=3, max_word_len=4, hidden=4, e_word=6, e_char=4, e_cin=3, conv_width=3,
           attention_heads=2, dropout=0.0)

TITLES = [
    "Freshness Guaranteed Sliced Fruit Cake, 13 oz",
    "Great Value Strawberry Nonfat Greek Yogurt, 6 oz, 4 ct",
    "Del Monte Fresh Cut Cut Green Beans & Potatoes With Ham Style Flavor, 29 Oz",
    "Suave Professionals Moisturizing Shampoo and Conditioner Almond + Shea Butter 28 oz, 2 count",
    "OGX Hydrating + Teatree Mint Conditioner Salon, 25.4oz",
    "Mainstays Stall Size 54\" x 78\" Medium Weight PEVA Shower Liner, 1 Each",
]
SHORTS = ["fruit cake", "nonfat greek yogurt", "green beans and potatoes",
          "shampoo and conditioner", "conditioner", "shower liner"]


@pytest.fixture
def toy_pairs():
    return [RawTitlePair(t, s) for t, s in zip(TITLES, SHORTS)]


@pytest.fixture
def toy_vocab():
    return build_vocab(prepare(t) for t in TITLES)


def toy_config(**kw) -> ModelConfig:
    return ModelConfig(**{**TOY, **kw})


def make_model(vocab, config: ModelConfig, seed: int = 0, dtype=torch.float32) -> TitleCompressor:
    torch.manual_seed(seed)
    vecs = random_word_vectors(vocab, config.e_word, seed)
    return TitleCompressor(config, vecs, vocab.num_chars).to(dtype)


@pytest.fixture
def toy_model(toy_vocab):
    return make_model(toy_vocab, toy_config())


@pytest.fixture
def toy_data(toy_pairs, toy_vocab):
    return encode_dataset(toy_pairs, toy_vocab, toy_config(max_len=8, max_word_len=6))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
