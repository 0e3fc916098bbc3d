"""Fast built-in oracle fixtures, runnable from the CLI.

Each check recomputes a hand-derivable case and compares the implementation
against it. These duplicate a subset of the test suite so a deployed install
can be sanity-checked without pytest.
"""

import math

import numpy as np
import torch

from .attention import scaled_dot_attention
from .heads import HeadOutputs
from .losses import (center_distance_loss, classification_losses,
                     overlap_loss, tracking_loss)
from .metrics import compute_metrics
from .simulate import LatencyProfile, simulate_online
from .temporal_conv import CalibratedConv2d, TemporalCalibration
from .training import CurriculumSchedule, LrSchedule, learning_rate, video_length


def _single_key_attention():
    q = torch.randn(3, 4, generator=torch.Generator().manual_seed(1))
    k = torch.randn(1, 4, generator=torch.Generator().manual_seed(2))
    v = torch.randn(1, 4, generator=torch.Generator().manual_seed(3))
    out = scaled_dot_attention(q, k, v)
    return bool(torch.allclose(out, v.expand(3, 4), atol=1e-6))


def _uniform_key_attention():
    gen = torch.Generator().manual_seed(4)
    q = torch.randn(5, 3, generator=gen)
    k = torch.ones(6, 3)
    v = torch.randn(6, 3, generator=gen)
    out = scaled_dot_attention(q, k, v)
    return bool(torch.allclose(out, v.mean(0).expand(5, 3), atol=1e-6))


def _zero_init_calibration():
    calib = TemporalCalibration(8, 6, pool_size=2)
    conv = CalibratedConv2d(8, 6, 3)
    x = torch.randn(1, 8, 7, 7, generator=torch.Generator().manual_seed(5))
    state = calib.update_state(calib.init_state(x), x)
    out = conv(x, calib.factors(state))
    return bool(torch.allclose(out, conv(x), atol=1e-6))


def _center_loss_closed_form():
    # one masked cell whose predicted center is offset by (w, 0): D = sqrt(w)
    boxes = torch.tensor([[10.0 + 4.0, 10.0, 4.0, 4.0]]).reshape(1, 4, 1, 1)
    gt = torch.tensor([[10.0, 10.0, 4.0, 4.0]])
    mask = torch.ones(1, 1, 1)
    loss = center_distance_loss(boxes, gt, mask)
    return abs(float(loss) - 2.0) < 1e-6


def _overlap_loss_closed_form():
    # 2x2 boxes centered at (0,0) and (1,1): intersection 1, union 7
    pred = torch.tensor([0.0, 0.0, 2.0, 2.0]).reshape(1, 4, 1, 1)
    gt = torch.tensor([[1.0, 1.0, 2.0, 2.0]])
    mask = torch.ones(1, 1, 1)
    loss = overlap_loss(pred, gt, mask)
    return abs(float(loss) - 6.0 / 7.0) < 1e-6


def _uniform_ce_is_ln2():
    fg = torch.zeros(1, 2, 3, 3)
    quality = torch.zeros(1, 1, 3, 3)
    labels = torch.zeros(1, 3, 3, dtype=torch.long)
    target = torch.full((1, 3, 3), 0.5)
    ce, bce = classification_losses(fg, quality, labels, target)
    return (abs(float(ce) - math.log(2)) < 1e-6
            and abs(float(bce) - math.log(2)) < 1e-6)


def _schedule_values():
    cur = CurriculumSchedule()
    lr = LrSchedule()
    return (video_length(1, cur) == 2 and video_length(40, cur) == 3
            and video_length(60, cur) == 4
            and abs(learning_rate(1, lr) - 0.005) < 1e-15
            and abs(learning_rate(100, lr) - 0.0005) < 1e-15)


def _pairing_fixture():
    period = 100.0 / 3.0
    pairing = simulate_online(
        6, 1000.0 / period, LatencyProfile("constant", constant_ms=2 * period))
    return pairing.paired == [None, 0, 0, 2, 2, 4]


def _metrics_definitional():
    gt = np.array([[10, 10, 10, 10], [30, 30, 10, 10]], dtype=np.float64)
    pred = gt.copy()
    pred[0, 0] += 2.5  # IoU 0.6
    pred[1, 0] += 10.0 / 9.0  # IoU 0.8
    rep = compute_metrics(pred, gt)
    return (abs(rep.ao - 0.7) < 1e-9 and rep.sr_050 == 1.0
            and rep.sr_075 == 0.5)


def _loss_sum():
    gen = torch.Generator().manual_seed(6)
    n = 5
    outputs = HeadOutputs(
        torch.randn(1, 2, n, n, generator=gen),
        torch.randn(1, 1, n, n, generator=gen),
        torch.randn(1, 4, n, n, generator=gen) + torch.tensor(
            [0.0, 0.0, 20.0, 20.0]).reshape(1, 4, 1, 1))
    gt = torch.tensor([[40.0, 40.0, 30.0, 30.0]])
    parts = tracking_loss(outputs, gt, stride=16, image_size=80)
    return abs(float(parts.total()) - sum(float(p) for p in parts)) < 1e-6


CHECKS = [
    ("attention single key", _single_key_attention),
    ("attention uniform keys", _uniform_key_attention),
    ("calibration zero-init identity", _zero_init_calibration),
    ("center loss closed form", _center_loss_closed_form),
    ("overlap loss closed form", _overlap_loss_closed_form),
    ("uniform classification is ln 2", _uniform_ce_is_ln2),
    ("loss is sum of parts", _loss_sum),
    ("schedule values", _schedule_values),
    ("online pairing fixture", _pairing_fixture),
    ("metrics definitional", _metrics_definitional),
]


def run_selftest(out=print):
    """Run every check, print one line each, return True if all pass."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok = fn()
        except Exception as exc:  # noqa: BLE001 - report, do not crash the table
            ok = False
            name = f"{name} ({exc})"
        all_ok &= ok
        out(f"[{'PASS' if ok else 'FAIL'}] {name}")
    return all_ok
