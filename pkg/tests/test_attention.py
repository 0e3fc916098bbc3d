import numpy as np
import pytest
import torch

from tempotrack import MultiHeadAttention, map_to_tokens, scaled_dot_attention, tokens_to_map
from tempotrack.gradcheck import check_multi_head

from conftest import rand


def oracle_attention(q, k, v, d):
    """Materialize the full softmax matrix with explicit loops."""
    q, k, v = (np.asarray(t, dtype=np.float64) for t in (q, k, v))
    logits = q @ k.T / np.sqrt(d)
    weights = np.zeros((q.shape[0], k.shape[0]))
    for i in range(q.shape[0]):
        row = logits[i] - logits[i].max()
        e = np.exp(row)
        weights[i] = e / e.sum()
    return weights @ v, weights


def test_single_key_returns_value_row():
    q = rand(3, 4, seed=1)
    k = rand(1, 4, seed=2)
    v = rand(1, 4, seed=3)
    out = scaled_dot_attention(q, k, v)
    assert torch.allclose(out, v.expand(3, 4), atol=1e-6)


def test_identical_keys_average_values():
    q = rand(5, 3, seed=4)
    k = rand(1, 3, seed=5).expand(6, 3)
    v = rand(6, 3, seed=6)
    out = scaled_dot_attention(q, k, v)
    assert torch.allclose(out, v.mean(0).expand(5, 3), atol=1e-6)


def test_matches_bruteforce_oracle():
    q = rand(3, 4, seed=7).double()
    k = rand(3, 4, seed=8).double()
    v = rand(3, 4, seed=9).double()
    out = scaled_dot_attention(q, k, v, scale=4)
    expected, weights = oracle_attention(q, k, v, 4)
    assert np.allclose(out.numpy(), expected, atol=1e-10)
    assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-6)


def test_logit_shift_leaves_weights_unchanged():
    q = rand(4, 5, seed=10).double()
    k = rand(6, 5, seed=11).double()
    v = rand(6, 5, seed=12).double()
    _, base = oracle_attention(q, k, v, 5)
    shifted = np.asarray(q @ k.T.double()) / np.sqrt(5) + 17.3
    weights = np.exp(shifted - shifted.max(axis=1, keepdims=True))
    weights /= weights.sum(axis=1, keepdims=True)
    assert np.allclose(weights, base, atol=1e-6)
    out_shifted = torch.softmax(
        (q @ k.T / np.sqrt(5) + 17.3), dim=-1) @ v
    assert torch.allclose(out_shifted, scaled_dot_attention(q, k, v), atol=1e-6)


def test_permuting_keys_and_values_together_is_invariant():
    q = rand(4, 6, seed=13)
    k = rand(7, 6, seed=14)
    v = rand(7, 6, seed=15)
    perm = torch.randperm(7, generator=torch.Generator().manual_seed(16))
    out = scaled_dot_attention(q, k, v)
    out_perm = scaled_dot_attention(q, k[perm], v[perm])
    assert torch.allclose(out, out_perm, atol=1e-6)


def test_dimension_and_numeric_errors():
    with pytest.raises(ValueError):
        scaled_dot_attention(rand(3, 4), rand(3, 5), rand(3, 5))
    with pytest.raises(ValueError):
        scaled_dot_attention(rand(3, 4), rand(2, 4), rand(3, 4))
    with pytest.raises(ValueError):
        scaled_dot_attention(rand(3, 4), rand(3, 4), rand(3, 4), scale=0)
    bad = rand(3, 4)
    bad[0, 0] = float("nan")
    with pytest.raises(FloatingPointError):
        scaled_dot_attention(bad, rand(3, 4), rand(3, 4))


def test_multi_head_identity_reduces_to_single_attention():
    mha = MultiHeadAttention(4, heads=1)
    with torch.no_grad():
        for proj in (mha.proj_query, mha.proj_key, mha.proj_value, mha.proj_out):
            proj.weight.copy_(torch.eye(4))
    q = rand(3, 4, seed=17)
    k = rand(5, 4, seed=18)
    v = rand(5, 4, seed=19)
    assert torch.allclose(mha(q, k, v),
                          scaled_dot_attention(q, k, v, scale=4), atol=1e-6)


def test_multi_head_zero_values_give_zero_output():
    mha = MultiHeadAttention(6, heads=2)
    out = mha(rand(4, 6, seed=20), rand(5, 6, seed=21), torch.zeros(5, 6))
    assert torch.all(out == 0)


def test_multi_head_matches_per_head_oracle():
    torch.manual_seed(22)
    mha = MultiHeadAttention(6, heads=2).double()
    q = rand(4, 6, seed=23).double()
    k = rand(4, 6, seed=24).double()
    v = rand(4, 6, seed=25).double()
    out = mha(q, k, v)

    head_dim = 3
    heads = []
    with torch.no_grad():
        for n in range(2):
            rows = slice(n * head_dim, (n + 1) * head_dim)
            qn = (q @ mha.proj_query.weight[rows].T).numpy()
            kn = (k @ mha.proj_key.weight[rows].T).numpy()
            vn = (v @ mha.proj_value.weight[rows].T).numpy()
            heads.append(oracle_attention(qn, kn, vn, head_dim)[0])
        expected = np.concatenate(heads, axis=1) @ mha.proj_out.weight.numpy().T
    assert np.allclose(out.detach().numpy(), expected, atol=1e-10)


def test_head_count_must_divide_channels():
    with pytest.raises(ValueError):
        MultiHeadAttention(5, heads=2)


def test_batched_and_unbatched_agree():
    mha = MultiHeadAttention(6, heads=3)
    q = rand(4, 6, seed=26)
    k = rand(5, 6, seed=27)
    v = rand(5, 6, seed=28)
    single = mha(q, k, v)
    batched = mha(q.unsqueeze(0), k.unsqueeze(0), v.unsqueeze(0))
    assert torch.allclose(single, batched[0], atol=1e-6)


def test_token_map_roundtrip():
    x = rand(2, 5, 3, 4, seed=29)
    tokens = map_to_tokens(x)
    assert tokens.shape == (2, 12, 5)
    assert torch.equal(tokens_to_map(tokens, (3, 4)), x)
    with pytest.raises(ValueError):
        tokens_to_map(tokens, (2, 4))


def test_multi_head_gradients_match_finite_differences():
    assert check_multi_head(seed=0) < 1e-4
