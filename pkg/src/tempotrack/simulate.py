"""Latency-aware online evaluation.

The simulator replays a tracked sequence against wall-clock time. Frame k
(0-based) arrives at k * T with T the frame period; the tracker starts on
frame 0 at t = 0 and, upon finishing a frame, jumps to the newest frame that
has arrived, skipping any staler ones (a FIFO policy that never skips is
available for comparison). The reported result for ground-truth frame k is
sampled at the end of its display interval, (k + 1) * T: the latest
prediction completed by then, from a frame no newer than k, and the initial
box if nothing has completed yet. Completions landing exactly on a sampling
instant count as available.
"""

from dataclasses import dataclass, field

import numpy as np

_TIE_EPS_MS = 1e-6


@dataclass
class LatencyProfile:
    """Per-frame processing-time model: a constant, a trace file, or
    latencies measured while tracking."""

    mode: str
    constant_ms: float = 0.0
    trace: list = None

    def __post_init__(self):
        if self.mode not in ("constant", "trace", "measured"):
            raise ValueError(f"unknown latency profile mode {self.mode!r}")
        if self.mode == "constant" and self.constant_ms < 0:
            raise ValueError(f"negative latency {self.constant_ms}")
        if self.mode == "trace":
            if not self.trace:
                raise ValueError("trace profile needs at least one latency")
            if any(v < 0 for v in self.trace):
                raise ValueError("negative latency in trace")

    @classmethod
    def parse(cls, spec):
        """Parse 'constant:<ms>', 'trace:<file>', or 'measured'."""
        if spec == "measured":
            return cls("measured")
        kind, sep, arg = spec.partition(":")
        if kind == "constant" and sep:
            return cls("constant", constant_ms=float(arg))
        if kind == "trace" and sep:
            with open(arg) as f:
                values = [float(line) for line in f if line.strip()]
            return cls("trace", trace=values)
        raise ValueError(
            f"bad latency spec {spec!r}; expected constant:<ms>, "
            f"trace:<file>, or measured")

    def latency(self, frame_index, event_index, measured=None):
        """Latency for one processing event. Trace values are consumed in
        processing order (aligned to processed frames)."""
        if self.mode == "constant":
            return self.constant_ms
        if self.mode == "trace":
            if event_index >= len(self.trace):
                raise ValueError(
                    f"latency trace exhausted at processing event {event_index}")
            return self.trace[event_index]
        if measured is None:
            raise ValueError("measured profile requires measured latencies")
        return float(measured[frame_index])


@dataclass
class OnlinePairing:
    """Which prediction answers for each ground-truth frame."""

    paired: list              # per GT frame: source frame index, or None (init box)
    processed: list           # frame indices the tracker actually ran
    completions: list         # completion time (ms) per processed frame
    frame_period_ms: float

    def paired_boxes(self, predictions, init_box=None):
        """Materialize the per-frame online predictions."""
        predictions = np.asarray(predictions, dtype=np.float64)
        init = predictions[0] if init_box is None else np.asarray(init_box)
        out = np.empty_like(predictions)
        for k, src in enumerate(self.paired):
            out[k] = init if src is None else predictions[src]
        return out

    def as_table(self):
        completion = dict(zip(self.processed, self.completions))
        return [{"frame": k,
                 "paired_with": src,
                 "completed_ms": None if src is None else completion[src]}
                for k, src in enumerate(self.paired)]


def simulate_online(n_frames, fps, profile: LatencyProfile, measured=None,
                    policy="skip"):
    """Run the discrete-event schedule and pair results to ground truth."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if policy not in ("skip", "fifo"):
        raise ValueError(f"unknown scheduling policy {policy!r}")
    period = 1000.0 / fps

    processed, completions = [], []
    frame, start, event = 0, 0.0, 0
    while frame < n_frames:
        latency = profile.latency(frame, event, measured)
        if latency < 0:
            raise ValueError(f"negative latency {latency} for frame {frame}")
        done = start + latency
        processed.append(frame)
        completions.append(done)
        event += 1
        if policy == "skip":
            newest = min(n_frames - 1, int(done / period + _TIE_EPS_MS))
            nxt = newest if newest > frame else frame + 1
        else:
            nxt = frame + 1
        if nxt >= n_frames:
            break
        start = max(done, nxt * period)
        frame = nxt

    paired = []
    for k in range(n_frames):
        sample_time = (k + 1) * period + _TIE_EPS_MS
        best = None
        for f, done in zip(processed, completions):
            if f > k:
                break
            if done <= sample_time:
                best = f
        paired.append(best)
    return OnlinePairing(paired, processed, completions, period)
