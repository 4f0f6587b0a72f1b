"""Command-line entry point.

Subcommands: encode, decode, propagate, synth, eval, servo, serve.
Exit codes: 0 success, 1 operation error, 2 usage error. Angles on the
command line and in files are degrees; internal math is radians.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import propagation as prop
from .encoding import (
    AngleQuantizer,
    ObjectCatalog,
    OrientedLabel,
    encode_label,
)
from .evaluation import evaluate
from .geometry import Similarity2
from .servo import Gains, ServoState, simulate, write_trajectory_csv

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopkit",
        description="Angle-quantized oriented detection toolkit.",
    )
    parser.add_argument(
        "--json", action="store_true", help="emit machine-readable errors on stderr"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="oriented labels -> unoriented predictions")
    p.add_argument("--labels", required=True)
    p.add_argument("--theta-hat", type=float, required=True, help="quantization step, degrees")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", help="unoriented predictions -> oriented labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--theta-hat", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("propagate", help="chain frame-0 labels through a sequence")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed-labels", required=True, help="labels.jsonl holding frame 0")
    p.add_argument("--matches", help="external matches file (JSON Lines)")
    p.add_argument("--out", required=True)
    p.add_argument("--from-frame", type=int, default=0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--inlier-threshold", type=float, default=2.0)
    p.add_argument("--ransac-seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic labeled sequence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--classes", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rotation-deg", type=float, default=0.5, help="per-frame rotation")
    p.add_argument("--scale", type=float, default=0.999, help="per-frame scale drift")
    p.add_argument("--jitter", type=float, default=1.0, help="per-frame translation jitter, px")

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--theta-hat", type=float, required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")

    p = sub.add_parser("servo", help="closed-loop alignment simulation")
    p.add_argument("--theta0", type=float, required=True, help="initial relative angle, degrees")
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--gains", default="1.0,1.0", help="K_Pt,K_Ptheta")
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--x0", type=float, default=40.0, help="initial image-space x error")
    p.add_argument("--y0", type=float, default=25.0)
    p.add_argument("--max-steps", type=int, default=10000)
    p.add_argument("--out", required=True, help="trajectory CSV")

    p = sub.add_parser("serve", help="run the annotation/propagation HTTP service")
    p.add_argument("--root", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _cmd_encode(args) -> int:
    q = AngleQuantizer.from_degrees(args.theta_hat)
    frames = ds.read_labels_jsonl(args.labels)
    preds = [[encode_label(q, lab) for lab in labels] for labels in frames]
    ds.write_predictions_jsonl(args.out, preds)
    return 0


def _cmd_decode(args) -> int:
    q = AngleQuantizer.from_degrees(args.theta_hat)
    catalog = ObjectCatalog.load(args.catalog)
    from .encoding import decode_prediction

    frames = ds.read_predictions_jsonl(args.preds)
    labels = [[decode_prediction(q, catalog, p) for p in preds] for preds in frames]
    ds.write_labels_jsonl(args.out, labels)
    return 0


def _cmd_propagate(args) -> int:
    manifest = ds.load_manifest(args.manifest)
    frame_paths = manifest["frames"][args.from_frame :]
    seed_frames = ds.read_labels_jsonl(args.seed_labels)
    if len(seed_frames) <= args.from_frame or not seed_frames[args.from_frame]:
        raise prop.PropagationError(
            f"seed labels file has no labels for frame {args.from_frame}"
        )
    seed = seed_frames[args.from_frame]
    if args.matches:
        base = prop.matches_file_provider(args.matches)

        def provider(i):
            return base(i + args.from_frame)

        shape = None
    else:
        frames = [ds.load_image(p) for p in frame_paths]
        provider = prop.frame_matching_provider(frames)
        shape = frames[0].shape[:2]
    config = prop.RansacConfig(
        iterations=args.iterations,
        inlier_threshold=args.inlier_threshold,
        seed=args.ransac_seed,
    )
    result = prop.propagate_labels(
        len(frame_paths), seed, provider, ransac=config, frame_shape=shape
    )
    with open(args.out, "w") as fh:
        for i, labels in enumerate(result.labels):
            fh.write(ds.labels_jsonl_line(i + args.from_frame, labels) + "\n")
    return 0


def _cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "frames").mkdir(exist_ok=True)
    rng = np.random.default_rng(args.seed)
    catalog = ds.default_catalog(args.classes, seed=7)
    catalog.save(out / "catalog.json")

    h, w = args.height, args.width
    bg = ds.make_noise_background(int(h * 1.8), int(w * 1.8), rng)
    placements = []
    for i in range(args.objects):
        c = int(rng.integers(0, args.classes))
        sw = int(rng.uniform(40, 70))
        sh = max(int(sw / catalog[c].nominal_ratio), 12)
        sprite = ds.make_textured_sprite(c, sw, sh, rng)
        angle = float(rng.uniform(0, 2 * math.pi))
        cx = float(rng.uniform(0.25 * w, 0.75 * w))
        cy = float(rng.uniform(0.25 * h, 0.75 * h))
        anchor_c = sprite.anchor.center
        t = Similarity2.about_point(
            anchor_c, rotation=angle, translation=(cx - anchor_c[0], cy - anchor_c[1])
        )
        placements.append((sprite, t))

    center = (w / 2.0, h / 2.0)
    motions = [
        Similarity2.about_point(
            center,
            scale=args.scale,
            rotation=math.radians(args.rotation_deg),
            translation=rng.uniform(-args.jitter, args.jitter, size=2),
        )
        for _ in range(args.frames - 1)
    ]
    frames = ds.generate_sequence(placements, motions, bg, frame_shape=(h, w))
    paths = []
    for i, rec in enumerate(frames):
        p = out / "frames" / f"{i:04d}.png"
        ds.save_png(p, rec.image)
        paths.append(f"frames/{i:04d}.png")
    ds.write_manifest(out / "manifest.json", paths, fps=30.0)
    ds.write_labels_jsonl(out / "labels.jsonl", [rec.labels for rec in frames])
    return 0


def _cmd_eval(args) -> int:
    q = AngleQuantizer.from_degrees(args.theta_hat)
    catalog = ObjectCatalog.load(args.catalog)
    gts = ds.read_labels_jsonl(args.gt)
    preds = ds.read_predictions_jsonl(args.pred)
    n = max(len(gts), len(preds))
    gts += [[] for _ in range(n - len(gts))]
    preds += [[] for _ in range(n - len(preds))]
    report = evaluate(preds, gts, q, catalog, iou_threshold=args.iou_threshold)
    report.save_json(args.out)
    if args.csv:
        report.save_csv(args.csv)
    print(f"mAP: {report.map:.4f}")
    return 0


def _cmd_servo(args) -> int:
    try:
        k_pt, k_pth = (float(x) for x in args.gains.split(","))
    except ValueError:
        raise ValueError(f"--gains must be 'K_Pt,K_Ptheta', got {args.gains!r}")
    gains = Gains(k_pt=k_pt, k_ptheta=k_pth, dt=args.dt)
    center = np.array([160.0, 120.0])
    state = ServoState(
        camera_position=np.zeros(2),
        camera_heading=0.0,
        target_position=np.array([args.x0, args.y0]),
        target_theta=math.radians(args.theta0),
        image_center=center,
    )
    result = simulate(state, gains, symmetric=args.symmetric, max_steps=args.max_steps)
    write_trajectory_csv(args.out, result)
    print(f"converged: {result.converged} in {result.steps} steps")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.root))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "propagate": _cmd_propagate,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "servo": _cmd_servo,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # operation errors -> exit 1
        if getattr(args, "json", False):
            print(
                json.dumps({"error": type(exc).__name__, "message": str(exc)}),
                file=sys.stderr,
            )
        else:
            print(f"loopkit {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
