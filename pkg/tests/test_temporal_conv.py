import io

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from tempotrack import CalibratedConv2d, QueueCalibration, TemporalCalibration
from tempotrack.gradcheck import check_calibration_path, compare_gradients

from conftest import rand


def serialized_size(state):
    buf = io.BytesIO()
    torch.save(state, buf)
    return len(buf.getvalue())


def oracle_maxpool(x, out_size):
    """Adaptive max pooling via explicit window slicing."""
    b, c, h, w = x.shape
    out = np.zeros((b, c, out_size, out_size))
    xn = x.detach().numpy()
    for i in range(out_size):
        for j in range(out_size):
            y1, y2 = (i * h) // out_size, -(-((i + 1) * h) // out_size)
            x1, x2 = (j * w) // out_size, -(-((j + 1) * w) // out_size)
            out[:, :, i, j] = xn[:, :, y1:y2, x1:x2].max(axis=(2, 3))
    return out


def oracle_1x1(conv, x):
    """1x1 conv as an explicit channel matmul."""
    w = conv.weight.detach().numpy()[:, :, 0, 0]
    b = conv.bias.detach().numpy()
    return np.einsum("oc,bchw->bohw", w, np.asarray(x)) + b[None, :, None, None]


class TestStateInit:
    def test_constant_input_gives_constant_state(self):
        calib = TemporalCalibration(3, 4, pool_size=2, reduce_channels=3)
        with torch.no_grad():
            calib.proj_init.weight.copy_(torch.eye(3).reshape(3, 3, 1, 1))
            calib.proj_init.bias.zero_()
        x = torch.full((1, 3, 8, 8), 2.5)
        state = calib.init_state(x)
        assert torch.allclose(state, torch.full((1, 3, 2, 2), 2.5), atol=1e-6)

    def test_zero_input_gives_zero_state(self):
        calib = TemporalCalibration(4, 4, pool_size=2)
        with torch.no_grad():
            calib.proj_init.bias.zero_()
        assert torch.all(calib.init_state(torch.zeros(1, 4, 6, 6)) == 0)

    def test_matches_pool_then_project_oracle(self):
        calib = TemporalCalibration(5, 4, pool_size=4)
        x = rand(2, 5, 8, 8, seed=1)
        expected = oracle_1x1(calib.proj_init, oracle_maxpool(x, 4))
        assert np.allclose(calib.init_state(x).detach().numpy(), expected,
                           atol=1e-5)

    def test_input_smaller_than_pool_size_raises(self):
        calib = TemporalCalibration(4, 4, pool_size=4)
        with pytest.raises(ValueError):
            calib.init_state(torch.zeros(1, 4, 3, 3))


class TestStateUpdate:
    def test_single_token_state_returns_value_projection(self):
        calib = TemporalCalibration(4, 4, pool_size=1)
        state = rand(1, 1, 1, 1, seed=2)
        new = calib.update_state(state, rand(1, 4, 5, 5, seed=3))
        expected = calib.proj_value(state)
        assert torch.allclose(new, expected, atol=1e-6)

    def test_shape_fixed_for_long_sequences(self):
        calib = TemporalCalibration(4, 4, pool_size=2)
        state = calib.init_state(rand(1, 4, 6, 6, seed=4))
        shape = state.shape
        sizes = set()
        for t in range(1000):
            state = calib.update_state(state, rand(1, 4, 6, 6, seed=t))
            assert state.shape == shape
            if t in (9, 999):
                sizes.add(serialized_size(state.detach()))
        assert len(sizes) == 1

    def test_matches_tokenized_cross_attention_oracle(self):
        calib = TemporalCalibration(6, 4, pool_size=2, reduce_channels=3).double()
        state = rand(1, 3, 2, 2, seed=5).double()
        x = rand(1, 6, 7, 7, seed=6).double()
        new = calib.update_state(state, x)

        pooled = F.adaptive_max_pool2d(x, 2)
        q = oracle_1x1(calib.proj_query, pooled)[0].reshape(3, 4).T
        k = oracle_1x1(calib.proj_key, state)[0].reshape(3, 4).T
        v = oracle_1x1(calib.proj_value, state)[0].reshape(3, 4).T
        logits = q @ k.T / np.sqrt(3)
        w = np.exp(logits - logits.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        expected = (w @ v).T.reshape(1, 3, 2, 2)
        assert np.allclose(new.detach().numpy(), expected, atol=1e-10)

    def test_update_is_order_sensitive(self):
        calib = TemporalCalibration(4, 4, pool_size=2)
        frames = [2 * rand(1, 4, 6, 6, seed=s) for s in (10, 11, 12)]
        def run(order):
            state = calib.init_state(frames[order[0]])
            for idx in order:
                state = calib.update_state(state, frames[idx])
            return state
        diff = (run([0, 1, 2]) - run([1, 0, 2])).abs().max()
        assert float(diff) > 1e-3


class TestFactors:
    def test_zero_init_gives_exact_ones(self):
        calib = TemporalCalibration(8, 5, pool_size=2)
        w, b = calib.factors(rand(1, 2, 2, 2, seed=13))
        assert torch.all(w == 1.0)
        assert torch.all(b == 1.0)

    def test_known_linear_head_closed_form(self):
        calib = TemporalCalibration(4, 2, pool_size=2, reduce_channels=4,
                                    head_reduction=2)
        with torch.no_grad():
            first, last = calib.weight_head[0], calib.weight_head[2]
            first.weight.copy_(torch.arange(8.0).reshape(2, 4) / 10)
            first.bias.zero_()
            last.weight.copy_(torch.tensor([[1.0, -1.0], [0.5, 0.25]]))
            last.bias.copy_(torch.tensor([0.1, -0.2]))
        state = torch.full((1, 4, 2, 2), 3.0)
        w, _ = calib.factors(state)
        hidden = np.maximum(first.weight.detach().numpy() @ np.full(4, 3.0), 0)
        expected = last.weight.detach().numpy() @ hidden \
            + last.bias.detach().numpy() + 1.0
        assert np.allclose(w.detach().numpy()[0], expected, atol=1e-6)

    def test_factor_gradients_match_finite_differences(self):
        calib = TemporalCalibration(4, 3, pool_size=2).double()
        state = rand(1, 1, 2, 2, seed=14).double()
        cot_w = rand(1, 3, seed=15).double()
        cot_b = rand(1, 3, seed=16).double()
        params = list(calib.weight_head.parameters()) \
            + list(calib.bias_head.parameters())

        def closure():
            w, b = calib.factors(state)
            return (w * cot_w).sum() + (b * cot_b).sum()

        assert compare_gradients(closure, params) < 1e-4


class TestCalibratedConv:
    def test_unit_factors_match_plain_conv(self):
        conv = CalibratedConv2d(4, 6, 3, padding=1)
        x = rand(2, 4, 7, 7, seed=17)
        ones = torch.ones(2, 6)
        assert torch.allclose(conv(x, (ones, ones)), conv(x), atol=1e-6)

    def test_weight_factor_homogeneity(self):
        conv = CalibratedConv2d(3, 4, 3)
        with torch.no_grad():
            conv.conv.bias.zero_()
        x = rand(1, 3, 6, 6, seed=18)
        out = conv(x, (2 * torch.ones(1, 4), torch.ones(1, 4)))
        assert torch.allclose(out, 2 * conv(x), atol=1e-6)

    def test_one_by_one_conv_scalar_oracle(self):
        conv = CalibratedConv2d(2, 3, 1)
        x = rand(1, 2, 2, 2, seed=19)
        wf = rand(1, 3, seed=20).exp()
        bf = rand(1, 3, seed=21)
        out = conv(x, (wf, bf)).detach().numpy()

        w = conv.conv.weight.detach().numpy()[:, :, 0, 0]
        b = conv.conv.bias.detach().numpy()
        expected = np.zeros((1, 3, 2, 2))
        for o in range(3):
            for i in range(2):
                for j in range(2):
                    acc = sum(w[o, c] * wf.numpy()[0, o] * x.numpy()[0, c, i, j]
                              for c in range(2))
                    expected[0, o, i, j] = acc + b[o] * bf.numpy()[0, o]
        assert np.allclose(out, expected, atol=1e-5)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            CalibratedConv2d(3, 3, 2)


class TestQueueVariant:
    def test_empty_queue_falls_back_to_plain_conv(self):
        calib = QueueCalibration(4, 5, window=3)
        conv = CalibratedConv2d(4, 5, 3)
        x = rand(1, 4, 6, 6, seed=22)
        assert calib.factors([]) is None
        assert torch.allclose(conv(x, calib.factors([])), conv(x))

    def test_zero_init_heads_give_plain_conv(self):
        calib = QueueCalibration(4, 5, window=3)
        conv = CalibratedConv2d(4, 5, 3)
        x = rand(1, 4, 6, 6, seed=23)
        queue = [calib.descriptor(rand(1, 4, 6, 6, seed=s)) for s in (1, 2, 3)]
        assert torch.allclose(conv(x, calib.factors(queue)), conv(x), atol=1e-6)

    def test_window_one_uses_current_descriptor_only(self):
        calib = QueueCalibration(4, 5, window=1)
        d_old = calib.descriptor(rand(1, 4, 6, 6, seed=24))
        d_new = calib.descriptor(rand(1, 4, 6, 6, seed=25))
        w_both, b_both = calib.factors([d_old, d_new])
        w_new, b_new = calib.factors([d_new])
        assert torch.allclose(w_both, w_new)
        assert torch.allclose(b_both, b_new)

    def test_matches_sliding_window_oracle(self):
        calib = QueueCalibration(4, 3, window=3).double()
        with torch.no_grad():
            calib.weight_head.weight.copy_(
                rand(3, 1, 1, seed=26).double())
            calib.weight_head.bias.copy_(rand(3, seed=27).double())
        queue = [rand(1, 4, seed=s).double() for s in (28, 29, 30)]
        w, _ = calib.factors(queue)

        stacked = np.stack([q.numpy()[0] for q in queue], axis=1)  # (4, 3)
        body_w = calib.body.weight.detach().numpy()  # (hidden, 4, 3)
        body_b = calib.body.bias.detach().numpy()
        hidden = np.maximum(np.einsum("hct,ct->h", body_w, stacked) + body_b, 0)
        head_w = calib.weight_head.weight.detach().numpy()[:, :, 0]
        head_b = calib.weight_head.bias.detach().numpy()
        expected = head_w @ hidden + head_b + 1.0
        assert np.allclose(w.detach().numpy()[0], expected, atol=1e-10)


def test_full_layer_zero_init_equivalence():
    calib = TemporalCalibration(6, 8, pool_size=4)
    conv = CalibratedConv2d(6, 8, 3, padding=1)
    state = None
    for t in range(5):
        x = rand(1, 6, 9, 9, seed=40 + t)
        state = calib.init_state(x) if state is None else state
        state = calib.update_state(state, x)
        out = conv(x, calib.factors(state))
        assert float((out - conv(x)).abs().max()) < 1e-6


def test_end_to_end_calibration_gradients():
    assert check_calibration_path(seed=0) < 1e-4
