"""Command-line interface: tracking, offline/online evaluation, gradcheck,
and selftest."""

import argparse
import json
import sys

import numpy as np
import torch

from .config import Config, load_config
from .gradcheck import run_all
from .metrics import compute_metrics
from .model import TrackerNet
from .selftest import run_selftest
from .sequence import IngestionError, load_sequence
from .simulate import LatencyProfile, simulate_online
from .tracking import track_offline
from .training import load_checkpoint


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tempotrack",
        description="Temporal-context tracker and latency-aware evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_seq=True):
        p.add_argument("--config", help="YAML/JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--report", help="write a JSON report to this path")
        if needs_seq:
            p.add_argument("--seq-dir", required=True,
                           help="OTB-style sequence directory")
            p.add_argument("--checkpoint", help="trained weights to load")
            p.add_argument("--fps", type=float,
                           help="override the sequence frame rate")

    common(sub.add_parser("track", help="run the tracker, report boxes"))
    common(sub.add_parser("eval-offline", help="offline one-pass evaluation"))
    online = sub.add_parser("eval-online", help="latency-aware evaluation")
    common(online)
    online.add_argument("--latency", required=True,
                        help="constant:<ms>, trace:<file>, or measured")
    common(sub.add_parser("gradcheck", help="finite-difference checks"),
           needs_seq=False)
    common(sub.add_parser("selftest", help="built-in oracle fixtures"),
           needs_seq=False)
    return parser


def _setup(args):
    cfg = load_config(args.config) if args.config else Config()
    torch.manual_seed(args.seed)
    np.random.seed(args.seed)
    model = TrackerNet.from_config(cfg.model)
    if getattr(args, "checkpoint", None):
        load_checkpoint(args.checkpoint, model)
    fps = args.fps if getattr(args, "fps", None) else cfg.harness.fps
    seq = load_sequence(args.seq_dir, fps=fps)
    return cfg, model, seq


def _write_report(args, payload):
    text = json.dumps(payload, indent=2)
    if args.report:
        with open(args.report, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _offline_report(cfg, model, seq):
    boxes, latencies = track_offline(model, seq, cfg.harness.window_penalty)
    report = compute_metrics(boxes, seq.boxes, mode="offline",
                             latencies_ms=latencies, sequence=seq.name)
    return boxes, latencies, report


def cmd_track(args):
    cfg, model, seq = _setup(args)
    boxes, latencies, report = _offline_report(cfg, model, seq)
    _write_report(args, {"mode": "track", "sequence": seq.name,
                         "boxes": boxes.tolist(),
                         "latencies_ms": latencies.tolist(),
                         "metrics": report.as_dict(),
                         "config": cfg.to_dict()})
    return 0


def cmd_eval_offline(args):
    cfg, model, seq = _setup(args)
    _, _, report = _offline_report(cfg, model, seq)
    payload = report.as_dict()
    payload["config"] = cfg.to_dict()
    _write_report(args, payload)
    return 0


def cmd_eval_online(args):
    cfg, model, seq = _setup(args)
    profile = LatencyProfile.parse(args.latency)
    boxes, measured, _ = _offline_report(cfg, model, seq)
    pairing = simulate_online(len(seq), seq.fps, profile, measured=measured,
                              policy=cfg.harness.scheduler)
    paired = pairing.paired_boxes(boxes)
    report = compute_metrics(paired, seq.boxes, mode="online",
                             latencies_ms=measured, sequence=seq.name)
    payload = report.as_dict()
    payload["pairing"] = pairing.as_table()
    payload["config"] = cfg.to_dict()
    _write_report(args, payload)
    return 0


def cmd_gradcheck(args):
    results = run_all(seed=args.seed)
    ok = True
    for name, (err, passed) in results.items():
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: "
              f"max relative error {err:.3e}")
    if args.report:
        _write_report(args, {name: {"max_rel_err": err, "passed": passed}
                             for name, (err, passed) in results.items()})
    return 0 if ok else 1


def cmd_selftest(args):
    return 0 if run_selftest() else 1


COMMANDS = {
    "track": cmd_track,
    "eval-offline": cmd_eval_offline,
    "eval-online": cmd_eval_online,
    "gradcheck": cmd_gradcheck,
    "selftest": cmd_selftest,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return COMMANDS[args.command](args)
    except (IngestionError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
