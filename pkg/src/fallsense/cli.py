"""Command line entry points: classify, sweep, eval, synth."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline, plots, synthcorpus
from .ground import GroundFilterParams
from .reasoning import ReasoningConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _configs(args) -> tuple[ReasoningConfig, GroundFilterParams]:
    if getattr(args, "config", None):
        return pipeline.load_config(args.config)
    return ReasoningConfig(), GroundFilterParams()


def cmd_classify(args) -> int:
    cfg, gp = _configs(args)
    bundles = pipeline.load_session(args.session_dir)
    dump_dir = Path(args.session_dir) if args.dump_ground else None
    result = pipeline.run_session(bundles, cfg, gp, ground_dump_dir=dump_dir)

    for fid, _ts, reports in result.frames:
        summary = ", ".join(
            f"person {i}: {r.decision.value}" for i, r in enumerate(reports)
        )
        print(f"frame {fid:06d}  {summary}")
    if result.notifications:
        for event in result.notifications:
            print(f"NOTIFY frame {event.frame_id:06d} person {event.person_index}")
    if args.report:
        Path(args.report).write_text(result.to_json() + "\n")
        print(f"report written to {args.report}")
    return 0


def cmd_sweep(args) -> int:
    cfg, gp = _configs(args)
    bundles = pipeline.load_session(args.session_dir)
    labels = pipeline.load_labels(Path(args.session_dir) / "labels.csv")
    n_steps = int(round((args.max - args.min) / args.step)) + 1
    thresholds = [args.min + i * args.step for i in range(n_steps)]
    rows = pipeline.threshold_sweep(bundles, thresholds, cfg, gp, labels)

    pipeline.write_sweep_csv(args.out, rows)
    figure = Path(args.out).with_suffix(".png")
    plots.save_sweep_figure(rows, figure)
    best_t, best_acc = max(rows, key=lambda row: row[1])
    print(f"swept {len(rows)} thresholds; best accuracy {best_acc:.3f} at {best_t:.2f} m")
    print(f"wrote {args.out} and {figure}")
    return 0


def cmd_eval(args) -> int:
    cfg, gp = _configs(args)
    bundles = pipeline.load_session(args.session_dir)
    labels = pipeline.load_labels(args.labels)
    result = pipeline.run_session(bundles, cfg, gp, labels=labels)

    import json

    Path(args.out).write_text(json.dumps(result.metrics, indent=1) + "\n")
    figure = Path(args.out).with_suffix(".png")
    plots.save_metrics_figure(result.metrics, figure)
    m = result.metrics
    print(
        f"tp={m['tp']} fp={m['fp']} tn={m['tn']} fn={m['fn']} "
        f"accuracy={m['accuracy']:.3f} tpr={m['true_positive_rate']:.3f}"
    )
    print(f"wrote {args.out} and {figure}")
    return 0


def cmd_synth(args) -> int:
    with open(args.scenario, "rb") as fh:
        doc = tomllib.load(fh)

    out = Path(args.out)
    if "corpus" in doc:
        corpus = doc["corpus"]
        noise = doc.get("noise", {})
        kwargs = {}
        if "depth_sigma" in noise:
            kwargs["depth_sigma"] = float(noise["depth_sigma"])
        if "dropout" in noise:
            kwargs["dropout"] = float(noise["dropout"])
        if "hole_prob" in noise:
            kwargs["hole_prob"] = float(noise["hole_prob"])
        if "confidence_range" in noise:
            kwargs["confidence_range"] = tuple(noise["confidence_range"])
        specs = synthcorpus.generate_corpus(
            int(corpus["n_falls"]),
            int(corpus["n_nonfalls"]),
            int(doc.get("seed", 0)),
            out,
            **kwargs,
        )
        print(f"wrote {len(specs)} scenes to {out}")
    else:
        spec = synthcorpus.scenario_from_dict(doc)
        bundle, truth = synthcorpus.generate(spec)
        out.mkdir(parents=True, exist_ok=True)
        pipeline.save_frame(out, bundle)
        from . import depth_io

        depth_io.write_intrinsics(out / "intrinsics.toml", bundle.intrinsics)
        pipeline.save_labels(out / "labels.csv", {(bundle.frame_id, 0): truth.fallen})
        print(f"wrote 1 scene ({spec.archetype}) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fallsense",
        description="Geometric fallen-person detection on depth + keypoint sessions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify every frame of a session")
    p.add_argument("session_dir")
    p.add_argument("--config", help="TOML overriding reasoning/ground parameters")
    p.add_argument("--report", help="write the full session report JSON here")
    p.add_argument("--dump-ground", action="store_true",
                   help="write per-frame ground labelings as PLY into the session dir")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="accuracy vs height threshold on a labeled session")
    p.add_argument("session_dir")
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", required=True, help="CSV output (a PNG lands next to it)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="confusion metrics against a labels file")
    p.add_argument("session_dir")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="metrics JSON (a PNG lands next to it)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic session from a scenario file")
    p.add_argument("scenario", help="TOML scenario or corpus description")
    p.add_argument("--out", required=True, help="session directory to create")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
