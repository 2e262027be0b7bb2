import copy

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from conftest import make_model, toy_config
from fd import check_all_parameters, randomize_parameters
from titlepress.config import ModelConfig
from titlepress.corpus import PAD_ID, UNK_ID, build_vocab
from titlepress.embedder import CharCNN, Embedder, Highway, load_word_vectors, random_word_vectors, save_word_vectors
from titlepress.encoder import BiLSTMStack, Encoder, SelfAttention, masked_softmax
from titlepress.head_loss import LossWeights
from titlepress.model import Batch, make_batch

torch.set_default_dtype(torch.float32)


def toy_batch(vocab, config, seed=0, lengths=(3, 2)):
    g = torch.Generator().manual_seed(seed)
    b, n, c = len(lengths), config.max_len, config.max_word_len
    x_w = torch.randint(2, len(vocab), (b, n), generator=g)
    x_c = torch.randint(1, vocab.num_chars, (b, n, c), generator=g)
    mask = torch.zeros(b, n, dtype=torch.bool)
    for i, L in enumerate(lengths):
        mask[i, :L] = True
        x_w[i, L:] = PAD_ID
        x_c[i, L:] = PAD_ID
    labels = torch.randint(0, 2, (b, n), generator=g) * mask
    return Batch(x_w, x_c, mask, labels)


# ---------------------------------------------------------------- embedder

def test_word_vectors_file(tmp_path):
    v = build_vocab([["apple", "juice", "oz"]])
    p = tmp_path / "vec.txt"
    p.write_text("apple 1 2 3\noz 3 4 5\nbanana 9 9 9\n")
    table, missing = load_word_vectors(p, v, 3)
    assert missing == 1  # juice
    np.testing.assert_allclose(table[v.word_id("apple")], [1, 2, 3])
    np.testing.assert_allclose(table[UNK_ID], [2, 3, 4])
    np.testing.assert_allclose(table[v.word_id("juice")], table[UNK_ID])
    assert not table[PAD_ID].any()
    save_word_vectors(tmp_path / "out.txt", v.words, table)
    again, _ = load_word_vectors(tmp_path / "out.txt", v, 3)
    np.testing.assert_allclose(again[2:], table[2:], atol=1e-6)


def test_word_vectors_bad_dim(tmp_path):
    v = build_vocab([["apple"]])
    p = tmp_path / "vec.txt"
    p.write_text("apple 1 2 3\nbanana 1 2\n")
    with pytest.raises(ValueError, match=":2"):
        load_word_vectors(p, v, 3)


def test_word_embed_lookup(toy_vocab):
    cfg = toy_config()
    emb = Embedder(cfg, random_word_vectors(toy_vocab, cfg.e_word, 0), toy_vocab.num_chars)
    out = emb.word_embed(torch.tensor([PAD_ID, UNK_ID, 5, 5]))
    assert not out[0].any()
    torch.testing.assert_close(out[1], emb.word_table[2:].mean(0))
    torch.testing.assert_close(out[2], out[3])
    with pytest.raises(IndexError):
        emb.word_embed(torch.tensor([len(toy_vocab)]))


def test_word_table_is_not_a_parameter(toy_model):
    names = [n for n, _ in toy_model.named_parameters()]
    assert not any("word_table" in n for n in names)
    assert "embedder.word_table" in toy_model.state_dict()


def test_char_cnn_all_pad_words_identical():
    cnn = CharCNN(10, 3, 5, 3)
    x = torch.tensor([[0, 0, 0, 0], [4, 5, 0, 0], [0, 0, 0, 0]])
    out = cnn(x)
    assert out.shape == (3, 5)
    torch.testing.assert_close(out[0], out[2])


def test_char_cnn_order_sensitive():
    torch.manual_seed(0)
    cnn = CharCNN(10, 3, 5, 3)
    a = cnn(torch.tensor([[2, 3, 4, 5, 6, 7]]))
    b = cnn(torch.tensor([[7, 6, 5, 4, 3, 2]]))
    assert not torch.allclose(a, b)


def test_highway_gate_limits():
    torch.manual_seed(0)
    hw = Highway(6, 1)
    x = torch.randn(4, 6)
    with torch.no_grad():
        hw.gates[0].bias.fill_(-1e4)
    torch.testing.assert_close(hw(x), x)
    with torch.no_grad():
        hw.gates[0].bias.fill_(1e4)
    torch.testing.assert_close(hw(x), torch.relu(hw.transforms[0](x)))


def test_embedder_identity_gates_reproduce_concat(toy_vocab):
    cfg = toy_config()
    emb = Embedder(cfg, random_word_vectors(toy_vocab, cfg.e_word, 0), toy_vocab.num_chars)
    with torch.no_grad():
        for g in emb.highway.gates:
            g.weight.zero_()
            g.bias.fill_(-1e4)
    b = toy_batch(toy_vocab, cfg)
    out = emb(b.x_w, b.x_c)
    expected = torch.cat([emb.char_cnn_embed(b.x_c), emb.word_embed(b.x_w)], -1)
    assert torch.equal(out, expected)


def test_embed_sequence_shape_and_pad_rows(toy_vocab):
    cfg = toy_config(max_len=5)
    emb = Embedder(cfg, random_word_vectors(toy_vocab, cfg.e_word, 0), toy_vocab.num_chars)
    b = toy_batch(toy_vocab, cfg, lengths=(5, 2, 1))
    out = emb(b.x_w, b.x_c)
    assert out.shape == (3, 5, cfg.e_char + cfg.e_word)
    torch.testing.assert_close(out[1, 3], out[2, 3])
    torch.testing.assert_close(out[1, 2], out[2, 4])
    with pytest.raises(ValueError, match="shape mismatch"):
        emb(b.x_w, b.x_c[:, :3])


def test_no_char_cnn_variant(toy_vocab):
    cfg = toy_config(use_char_cnn=False)
    m = make_model(toy_vocab, cfg)
    b = toy_batch(toy_vocab, cfg)
    assert m(b.x_w, b.x_c, b.mask).shape == (2, 3, 2)
    assert m.embedder.char_cnn is None


# ---------------------------------------------------------------- attention

@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 8), st.data())
def test_attention_rows_normalized(n, data):
    torch.manual_seed(data.draw(st.integers(0, 2**16)))
    lengths = data.draw(st.lists(st.integers(1, n), min_size=1, max_size=3))
    mask = torch.zeros(len(lengths), n, dtype=torch.bool)
    for i, L in enumerate(lengths):
        mask[i, :L] = True
    att = SelfAttention(6).double()
    torch.nn.init.normal_(att.W_s, std=data.draw(st.floats(0.01, 3.0)))
    x = torch.randn(len(lengths), n, 6, dtype=torch.float64)
    _, alpha = att(x, mask, return_weights=True)
    assert (alpha >= 0).all()
    for i, L in enumerate(lengths):
        rows = alpha[i, :L]
        assert torch.allclose(rows.sum(-1), torch.ones(L, dtype=torch.float64), atol=1e-6)
        assert (rows[:, L:] == 0).all()


def test_attention_single_valid_position():
    att = SelfAttention(4)
    x = torch.randn(1, 3, 4)
    mask = torch.tensor([[True, False, False]])
    out, alpha = att(x, mask, return_weights=True)
    assert alpha[0, 0, 0] == 1.0
    torch.testing.assert_close(out[0, 0], x[0, 0])


def test_attention_zero_matrix_is_uniform_mean():
    att = SelfAttention(4)
    torch.nn.init.zeros_(att.W_s)
    x = torch.randn(1, 5, 4)
    mask = torch.tensor([[True, True, True, False, False]])
    out = att(x, mask)
    expected = x[0, :3].mean(0)
    for i in range(5):
        torch.testing.assert_close(out[0, i], expected)


def test_attention_masked_positions_contribute_nothing():
    torch.manual_seed(1)
    att = SelfAttention(4)
    torch.nn.init.normal_(att.W_s)
    x = torch.randn(1, 5, 4)
    mask = torch.tensor([[True, True, True, False, False]])
    y = x.clone()
    y[0, 3:] = torch.randn(2, 4) * 100
    torch.testing.assert_close(att(x, mask)[0, :3], att(y, mask)[0, :3])


def test_attention_all_masked_errors():
    with pytest.raises(ValueError):
        SelfAttention(4)(torch.randn(1, 3, 4), torch.zeros(1, 3, dtype=torch.bool))


def test_masked_softmax_fully_masked_row_is_zero():
    w = masked_softmax(torch.randn(2, 3), torch.tensor([[True, False, True], [False, False, False]]))
    assert torch.isfinite(w).all()
    assert w[1].sum() == 0 and w[0, 1] == 0


def test_narrow_attention_window():
    att = SelfAttention(4, window=3)
    torch.nn.init.normal_(att.W_s)
    mask = torch.ones(1, 6, dtype=torch.bool)
    mask[0, 5] = False
    alpha = att.attention_weights(torch.randn(1, 6, 4), mask)
    i, j = torch.meshgrid(torch.arange(6), torch.arange(6), indexing="ij")
    assert (alpha[0][(i - j).abs() > 1] == 0).all()
    assert torch.allclose(alpha[0, :5].sum(-1), torch.ones(5))
    # a padded query whose window holds only padding gets zero weights, not NaN
    alpha = att.attention_weights(torch.randn(1, 6, 4), torch.tensor([[True, False, False, False, False, False]]))
    assert torch.isfinite(alpha).all() and alpha[0, 5].sum() == 0


def test_multihead_attention_shapes():
    att = SelfAttention(8, heads=4)
    assert att.W_s.shape == (4, 2, 2)
    mask = torch.tensor([[True, True, False]])
    out, alpha = att(torch.randn(1, 3, 8), mask, return_weights=True)
    assert out.shape == (1, 3, 8) and alpha.shape == (1, 4, 3, 3)
    assert torch.allclose(alpha[0, :, :2].sum(-1), torch.ones(4, 2))


def test_multihead_with_one_head_matches_global():
    torch.manual_seed(0)
    x, mask = torch.randn(2, 4, 6), torch.tensor([[True] * 4, [True, True, False, False]])
    g = SelfAttention(6)
    m = SelfAttention(6, heads=1)
    m.W_s.data.copy_(g.W_s.data)
    torch.testing.assert_close(g(x, mask), m(x, mask))


# ---------------------------------------------------------------- recurrent stack

def _mirror(stack: BiLSTMStack, hidden: int) -> BiLSTMStack:
    """Swap forward/backward weights; deeper layers also see their input halves swapped."""
    mirrored = copy.deepcopy(stack)
    perm = torch.cat([torch.arange(hidden, 2 * hidden), torch.arange(hidden)])
    for k, (src, dst) in enumerate(zip(stack.layers, mirrored.layers)):
        for kind in ("weight_ih", "weight_hh", "bias_ih", "bias_hh"):
            fwd, bwd = getattr(src, f"{kind}_l0"), getattr(src, f"{kind}_l0_reverse")
            new_f, new_b = bwd.detach().clone(), fwd.detach().clone()
            if kind == "weight_ih" and k > 0:
                new_f, new_b = new_f[:, perm], new_b[:, perm]
            getattr(dst, f"{kind}_l0").data.copy_(new_f)
            getattr(dst, f"{kind}_l0_reverse").data.copy_(new_b)
    return mirrored


def test_bilstm_directional_symmetry():
    torch.manual_seed(0)
    h = 3
    stack = BiLSTMStack(5, h, 3, dropout=0.0).double().eval()
    mirrored = _mirror(stack, h)
    L, n = 4, 6
    x = torch.randn(1, n, 5, dtype=torch.float64)
    mask = torch.zeros(1, n, dtype=torch.bool)
    mask[0, :L] = True
    x_rev = x.clone()
    x_rev[0, :L] = x[0, :L].flip(0)
    out = stack(x, mask)
    out_m = mirrored(x_rev, mask)
    swapped = torch.cat([out_m[..., h:], out_m[..., :h]], -1)
    torch.testing.assert_close(swapped[0, :L].flip(0), out[0, :L])


def test_bilstm_shape_and_pad_zero():
    stack = BiLSTMStack(5, 4, 2, dropout=0.0)
    mask = torch.tensor([[True, True, False, False]])
    out = stack(torch.randn(1, 4, 5), mask)
    assert out.shape == (1, 4, 8)
    assert (out[0, 2:] == 0).all()
    with pytest.raises(ValueError):
        stack(torch.randn(1, 4, 5), torch.zeros(1, 4, dtype=torch.bool))


def test_bilstm_ignores_padding_content():
    torch.manual_seed(0)
    stack = BiLSTMStack(5, 4, 3, dropout=0.0)
    mask = torch.tensor([[True, True, True, False, False]])
    x = torch.randn(1, 5, 5)
    y = x.clone()
    y[0, 3:] = 50.0
    torch.testing.assert_close(stack(x, mask)[0, :3], stack(y, mask)[0, :3])


def test_encoder_eval_deterministic_train_seeded():
    cfg = toy_config(dropout=0.2)
    enc = Encoder(cfg)
    x = torch.randn(2, 3, cfg.embed_dim)
    mask = torch.tensor([[True] * 3, [True, True, False]])
    enc.eval()
    torch.testing.assert_close(enc(x, mask), enc(x, mask))
    enc.train()
    torch.manual_seed(5)
    a = enc(x, mask)
    torch.manual_seed(5)
    b = enc(x, mask)
    assert torch.equal(a, b)


# ---------------------------------------------------------------- full model

@pytest.mark.parametrize("attention", ["global", "none", "narrow", "multihead"])
def test_gradients_match_finite_differences(toy_vocab, attention):
    cfg = toy_config(attention=attention, attention_window=3)
    model = make_model(toy_vocab, cfg, seed=1, dtype=torch.float64).eval()
    randomize_parameters(model)
    batch = toy_batch(toy_vocab, cfg)
    errors = check_all_parameters(model, lambda: model.loss(batch, LossWeights(0.3, 0.7)))
    assert errors and max(errors.values()) < 1e-4, errors


def test_word_table_gets_no_gradient(toy_vocab):
    cfg = toy_config()
    model = make_model(toy_vocab, cfg)
    model.embedder.word_table.requires_grad_(False)
    model.loss(toy_batch(toy_vocab, cfg), LossWeights(0.1, 0.9)).backward()
    assert model.embedder.word_table.grad is None
    assert all(p.grad is not None for p in model.parameters())


def test_reset_parameters_init_scheme(toy_vocab):
    cfg = toy_config()
    m = make_model(toy_vocab, cfg)
    r = cfg.init_range
    assert m.embedder.char_cnn.char_table.weight.abs().max() <= r
    for lin in list(m.embedder.highway.transforms) + list(m.embedder.highway.gates):
        assert lin.weight.abs().max() <= r and not lin.bias.any()
    assert not m.classifier.linear.bias.any()
    assert not m.encoder.rnn.layers[0].bias_ih_l0.any()


def test_layer_groups_cover_all_parameters(toy_vocab):
    for cfg in (toy_config(), toy_config(attention="none", num_recurrent_layers=2)):
        m = make_model(toy_vocab, cfg)
        grouped = {id(p) for _, ps in m.layer_groups() for p in ps}
        assert grouped == {id(p) for p in m.parameters()}
    names = [n for n, _ in make_model(toy_vocab, toy_config()).layer_groups()]
    assert names == ["classifier", "attention", "recurrent3", "recurrent2", "recurrent1", "embedding"]


def test_parameter_count_default_config():
    vocab = build_vocab([["a"]])
    m = make_model(vocab, ModelConfig())
    # word table is frozen and excluded; ~1.36M trainable at the default sizes
    assert 1.3e6 < m.num_trainable() < 1.4e6
