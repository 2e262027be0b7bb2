import math

import pytest
import torch
import torch.nn.functional as F
from hypothesis import given, settings, strategies as st

from titlepress.head_loss import (
    Classifier, LossWeights, extract_short_title, predict_labels, weighted_bce,
)


def test_classify_zero_weights_gives_half():
    clf = Classifier(8)
    torch.nn.init.zeros_(clf.linear.weight)
    torch.nn.init.zeros_(clf.linear.bias)
    y = clf(torch.randn(2, 5, 8))
    assert torch.allclose(y, torch.full_like(y, 0.5))


def test_classify_rows_sum_to_one():
    y = Classifier(8)(torch.randn(3, 7, 8))
    assert torch.allclose(y.sum(-1), torch.ones(3, 7))
    assert (y > 0).all()


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(0.3, 0.3)
    with pytest.raises(ValueError):
        LossWeights(1.5, -0.5)
    assert LossWeights(0.1, 0.9).swapped() == LossWeights(0.9, 0.1)


def test_bce_perfect_predictions_near_zero():
    labels = torch.tensor([[1, 0, 1, 0]])
    y = labels.double()
    mask = torch.ones(1, 4, dtype=torch.bool)
    assert weighted_bce(y, labels, mask, LossWeights(0.5, 0.5)).item() < 1e-6


def test_bce_half_probabilities():
    # hand evaluation: each of 4 tokens contributes 0.5 * log(0.5); mean over 4 -> 0.5 ln 2
    y = torch.full((1, 4), 0.5, dtype=torch.float64)
    labels = torch.tensor([[1, 1, 0, 0]])
    mask = torch.ones(1, 4, dtype=torch.bool)
    loss = weighted_bce(y, labels, mask, LossWeights(0.5, 0.5))
    assert loss.item() == pytest.approx(0.5 * math.log(2), abs=1e-12)


def test_bce_alpha_zero_ignores_label_one_terms():
    labels = torch.tensor([[1, 0, 1, 0]])
    mask = torch.ones(1, 4, dtype=torch.bool)
    w = LossWeights(0.0, 1.0)
    y1 = torch.tensor([[0.2, 0.3, 0.9, 0.6]], dtype=torch.float64)
    y2 = torch.tensor([[0.7, 0.3, 0.01, 0.6]], dtype=torch.float64)
    assert weighted_bce(y1, labels, mask, w).item() == pytest.approx(weighted_bce(y2, labels, mask, w).item())
    expected = -(math.log(0.7) + math.log(0.4)) / 4
    assert weighted_bce(y1, labels, mask, w).item() == pytest.approx(expected, rel=1e-12)


def test_bce_no_valid_positions():
    with pytest.raises(ValueError):
        weighted_bce(torch.rand(1, 3), torch.zeros(1, 3), torch.zeros(1, 3, dtype=torch.bool), LossWeights(0.5, 0.5))


probs = st.lists(st.floats(0.001, 0.999), min_size=1, max_size=20)


@settings(max_examples=200)
@given(probs, st.data())
def test_balanced_weights_are_half_unweighted_bce(ps, data):
    n = len(ps)
    labels = torch.tensor(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    mask = torch.tensor(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    if not mask.any():
        mask[0] = True
    y = torch.tensor(ps, dtype=torch.float64)
    ours = weighted_bce(y, labels, mask, LossWeights(0.5, 0.5)).item()
    ref = F.binary_cross_entropy(y[mask], labels[mask].double()).item()
    assert ours == pytest.approx(0.5 * ref, abs=1e-9)


@given(probs, st.data())
def test_loss_invariant_to_masked_content(ps, data):
    n = len(ps)
    y = torch.tensor(ps, dtype=torch.float64)
    labels = torch.tensor(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    mask = torch.tensor(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    mask[0] = True
    w = LossWeights(0.1, 0.9)
    y2, labels2 = y.clone(), labels.clone()
    y2[~mask] = torch.rand(int((~mask).sum()), dtype=torch.float64).clamp(0.01, 0.99)
    labels2[~mask] = 1 - labels2[~mask]
    assert weighted_bce(y, labels, mask, w).item() == pytest.approx(weighted_bce(y2, labels2, mask, w).item(), abs=1e-12)


def test_predict_labels():
    y = torch.tensor([[0.3, 0.7], [0.5, 0.5], [0.9, 0.1], [0.2, 0.8]])[:, 1]
    mask = torch.tensor([True, True, True, False])
    assert predict_labels(y, mask).tolist() == [1, 1, 0, 0]
    assert predict_labels(y).tolist() == [1, 1, 0, 1]


def test_extract_short_title():
    toks = ["freshness", "guaranteed", "sliced", "fruit", "cake", ",", "13", "oz"]
    assert extract_short_title(toks, [0, 0, 0, 1, 1, 0, 0, 0]) == "fruit cake"
    assert extract_short_title(toks, [1] * 8) == " ".join(toks)
    assert extract_short_title(toks, [0] * 8) == ""
    # padded label vectors are fine
    assert extract_short_title(toks[:2], [1, 1, 0, 0]) == "freshness guaranteed"
