"""Central finite-difference gradient checks for the differentiable parts.

The numerical side perturbs every tensor element by +/- eps and re-runs the
forward closure, independent of autograd; the analytic side is plain
backpropagation. All suites run at float64.
"""

import torch

from .attention import MultiHeadAttention
from .heads import HeadOutputs
from .losses import tracking_loss
from .refinement import SimilarityRefiner
from .temporal_conv import CalibratedConv2d, TemporalCalibration

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4


def finite_difference(closure, tensors, eps=DEFAULT_EPS):
    """Central-difference gradient of closure() w.r.t. each tensor."""
    grads = []
    with torch.no_grad():
        for t in tensors:
            grad = torch.zeros_like(t)
            flat = t.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                hi = float(closure())
                flat[i] = orig - eps
                lo = float(closure())
                flat[i] = orig
                gflat[i] = (hi - lo) / (2 * eps)
            grads.append(grad)
    return grads


def autograd_gradients(closure, tensors):
    """Analytic gradient of closure() w.r.t. each tensor (zeros if unused)."""
    loss = closure()
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    return [torch.zeros_like(t) if g is None else g
            for t, g in zip(tensors, grads)]


def max_relative_error(analytic, numeric):
    """Worst per-tensor infinity-norm relative error between gradient lists."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(float(a.abs().max()), float(n.abs().max()), 1e-6)
        worst = max(worst, float((a - n).abs().max()) / scale)
    return worst


def compare_gradients(closure, tensors, eps=DEFAULT_EPS):
    return max_relative_error(autograd_gradients(closure, tensors),
                              finite_difference(closure, tensors, eps))


def _weighting(shape, generator):
    return torch.randn(shape, dtype=torch.float64, generator=generator)


def check_multi_head(seed=0):
    """Gradients of multi-head attention w.r.t. all four projections."""
    gen = torch.Generator().manual_seed(seed)
    mha = MultiHeadAttention(6, heads=2).double()
    q = torch.randn(4, 6, dtype=torch.float64, generator=gen)
    k = torch.randn(5, 6, dtype=torch.float64, generator=gen)
    v = torch.randn(5, 6, dtype=torch.float64, generator=gen)
    cot = _weighting((4, 6), gen)
    params = list(mha.parameters())

    def closure():
        return (mha(q, k, v) * cot).sum()

    return compare_gradients(closure, params)


def check_calibration_path(seed=0):
    """Gradients through state update, factor heads, and the calibrated conv."""
    gen = torch.Generator().manual_seed(seed)
    calib = TemporalCalibration(8, 5, pool_size=2).double()
    conv = CalibratedConv2d(8, 5, 3, padding=1).double()
    with torch.no_grad():
        # nudge the zero-initialized factor heads off the origin so both
        # branches carry signal
        for head in (calib.weight_head, calib.bias_head):
            head[-1].weight.add_(0.1 * torch.randn(
                head[-1].weight.shape, dtype=torch.float64, generator=gen))
            head[-1].bias.add_(0.1 * torch.randn(
                head[-1].bias.shape, dtype=torch.float64, generator=gen))
    x_prev = torch.randn(1, 8, 5, 5, dtype=torch.float64, generator=gen)
    x_cur = torch.randn(1, 8, 5, 5, dtype=torch.float64,
                        generator=gen, requires_grad=True)
    cot = _weighting((1, 5, 5, 5), gen)
    params = list(calib.parameters()) + list(conv.parameters()) + [x_cur]

    def closure():
        state = calib.init_state(x_prev)
        state = calib.update_state(state, x_prev)
        state = calib.update_state(state, x_cur)
        out = conv(x_cur, calib.factors(state))
        return (out * cot).sum()

    return compare_gradients(closure, params)


def check_refiner(seed=0):
    """Gradients through prior init, encode, and decode, end to end."""
    gen = torch.Generator().manual_seed(seed)
    refiner = SimilarityRefiner(4, channels=6, heads=2).double()
    raw = torch.randn(1, 4, 3, 3, dtype=torch.float64, generator=gen)
    fmap = torch.randn(1, 6, 3, 3, dtype=torch.float64,
                       generator=gen, requires_grad=True)
    cot = _weighting((1, 6, 3, 3), gen)
    params = list(refiner.parameters()) + [fmap]

    def closure():
        prior = refiner.init_prior(raw)
        prior, refined = refiner.step(prior, fmap)
        return (refined * cot).sum()

    return compare_gradients(closure, params)


def check_losses(seed=0):
    """Gradients of all four loss terms w.r.t. the head outputs."""
    gen = torch.Generator().manual_seed(seed)
    n = 5
    fg = torch.randn(1, 2, n, n, dtype=torch.float64,
                     generator=gen, requires_grad=True)
    quality = torch.randn(1, 1, n, n, dtype=torch.float64,
                          generator=gen, requires_grad=True)
    loc = torch.randn(1, 4, n, n, dtype=torch.float64,
                      generator=gen, requires_grad=True)
    with torch.no_grad():
        loc[:, 2:] += 20.0  # keep sizes clear of the clamp floor
    gt = torch.tensor([[40.0, 44.0, 30.0, 26.0]], dtype=torch.float64)

    def closure():
        parts = tracking_loss(HeadOutputs(fg, quality, loc), gt,
                              stride=16, image_size=80)
        return parts.total()

    return compare_gradients(closure, [fg, quality, loc])


SUITES = {
    "multi_head": check_multi_head,
    "calibration_path": check_calibration_path,
    "encoder_decoder": check_refiner,
    "losses": check_losses,
}


def run_all(tolerance=DEFAULT_TOLERANCE, seed=0):
    """Run every suite; returns {name: (max_rel_err, passed)}."""
    results = {}
    for name, fn in SUITES.items():
        err = fn(seed)
        results[name] = (err, err < tolerance)
    return results
