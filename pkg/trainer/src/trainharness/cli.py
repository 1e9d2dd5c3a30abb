"""Harness command line: train, evaluate, distill, serve."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ExperimentConfig, Scenario
from .distill import distill
from .evaluate import evaluate
from .models import MODEL_KINDS
from .serve import serve_oracle
from .tensordump import read_dump
from .train import load_artifact, train


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        model=args.model,
        epochs=args.epochs,
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        width=args.width,
        seed=args.seed,
        hflip=not args.no_hflip,
        train_path=args.data,
    )


def cmd_train(args) -> int:
    artifact = train(_experiment_config(args), args.out)
    meta = json.loads((artifact / "meta.json").read_text())
    print(json.dumps({"out": str(artifact), "final_loss": meta["final_loss"]}))
    return 0


def cmd_evaluate(args) -> int:
    model, meta = load_artifact(args.model_dir)
    clean = read_dump(args.clean)
    triggered = read_dump(args.triggered)
    acc, asr = evaluate(model, clean, triggered, args.target)
    print(json.dumps({"acc": acc, "asr": asr, "target": args.target}))
    return 0


def cmd_distill(args) -> int:
    cfg = _experiment_config(args)
    artifact = distill(
        args.teacher, cfg, args.out, Scenario(args.scenario), target_label=args.target
    )
    print(json.dumps({"out": str(artifact), "scenario": args.scenario}))
    return 0


def cmd_serve(args) -> int:
    serve_oracle(args.model_dir, tcp=args.tcp)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainharness", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def training_flags(p):
        p.add_argument("--data", required=True, help="tensor dump to train on")
        p.add_argument("--model", choices=MODEL_KINDS, default="small-residual-net")
        p.add_argument("--epochs", type=int, default=15)
        p.add_argument("--lr", type=float, default=0.01)
        p.add_argument("--momentum", type=float, default=0.9)
        p.add_argument("--batch-size", type=int, default=128)
        p.add_argument("--width", type=int, default=16)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-hflip", action="store_true")
        p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a classifier on a tensor dump")
    training_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="clean accuracy and attack success rate")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--triggered", required=True)
    p.add_argument("--target", type=int, default=0)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("distill", help="train a student against a teacher artifact")
    training_flags(p)
    p.add_argument("--teacher", required=True)
    p.add_argument("--scenario", choices=[s.value for s in Scenario], default="S1")
    p.add_argument("--target", type=int, default=0)
    p.set_defaults(fn=cmd_distill)

    p = sub.add_parser("serve", help="serve a trained model over the oracle protocol")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--tcp", help="host:port (default: stdio)")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
