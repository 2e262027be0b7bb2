"""Record seeded reference forward passes of the toy model as a test fixture.

Run once; tests/test_golden.py compares against the stored arrays.
"""

import sys
from pathlib import Path

import numpy as np
import torch

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from conftest import TITLES, make_model, toy_config  # noqa: E402
from titlepress.corpus import build_vocab, encode_dataset, prepare, RawTitlePair  # noqa: E402
from titlepress.model import make_batch  # noqa: E402


def golden_outputs() -> dict[str, np.ndarray]:
    vocab = build_vocab(prepare(t) for t in TITLES)
    cfg = toy_config(max_len=6, max_word_len=5)
    model = make_model(vocab, cfg, seed=1234, dtype=torch.float64).eval()
    ds = encode_dataset([RawTitlePair(t) for t in TITLES[:3]] + [RawTitlePair("fruit cake")], vocab, cfg)
    b = make_batch(ds)
    with torch.no_grad():
        emb = model.embedder
        c = emb.char_cnn_embed(b.x_c)
        x_emb = emb(b.x_w, b.x_c)
        x_b = model.encoder.rnn(x_emb, b.mask)
        x_enc = model.encoder(x_emb, b.mask)
        y = model(b.x_w, b.x_c, b.mask)
    return {
        "x_w": b.x_w.numpy(), "x_c": b.x_c.numpy(), "mask": b.mask.numpy(),
        "char_cnn": c.numpy(), "x_emb": x_emb.numpy(), "x_b": x_b.numpy(),
        "x_enc": x_enc.numpy(), "y": y.numpy(),
    }


if __name__ == "__main__":
    out = ROOT / "tests" / "fixtures" / "golden_forward.npz"
    np.savez(out, **golden_outputs())
    print(f"wrote {out}")
