"""Seeded forward passes must keep matching the recorded fixture."""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "scripts"))

from make_golden import golden_outputs  # noqa: E402

FIXTURE = Path(__file__).parent / "fixtures" / "golden_forward.npz"


@pytest.fixture(scope="module")
def current():
    return golden_outputs()


@pytest.mark.parametrize("key", ["x_w", "x_c", "mask", "char_cnn", "x_emb", "x_b", "x_enc", "y"])
def test_matches_fixture(current, key):
    with np.load(FIXTURE) as ref:
        np.testing.assert_allclose(current[key], ref[key], rtol=1e-10, atol=1e-12)
