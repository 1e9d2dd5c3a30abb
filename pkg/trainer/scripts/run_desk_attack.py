"""Desk-scale end-to-end attack evaluation.

Pipeline: build attack artifacts with the poisoning toolkit (subprocess), train
a matched clean model and a label-poisoned model, measure clean accuracy and
attack success rate, distill a student from each teacher on clean data
(scenario S1), and re-measure attack success under Gaussian noise. Writes a
structured results table plus JSON, with the acceptance checks evaluated.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from trainharness.config import ExperimentConfig, Scenario
from trainharness.distill import distill
from trainharness.evaluate import evaluate, write_table
from trainharness.tensordump import read_dump
from trainharness.train import load_artifact, train

CHECKS = (
    ("backdoor ASR >= 0.90", lambda r: r["backdoored"]["asr"] >= 0.90),
    (
        "clean-accuracy drop <= 0.03",
        lambda r: r["clean"]["acc"] - r["backdoored"]["acc"] <= 0.03,
    ),
    ("S1 student ASR >= 0.80", lambda r: r["student_of_backdoored"]["asr"] >= 0.80),
    ("clean-teacher control ASR <= 0.15", lambda r: r["student_of_clean"]["asr"] <= 0.15),
    (
        "noise ASR degradation <= 0.02",
        lambda r: r["backdoored"]["asr"] - r["backdoored_noise"]["asr"] <= 0.02,
    ),
)


def build_artifacts(out: Path, toolkit_root: Path, seed: int) -> None:
    script = toolkit_root / "scripts" / "run_clean_image_attack.py"
    subprocess.run(
        [sys.executable, str(script), "--out", str(out), "--seed", str(seed)],
        check=True,
        stdout=subprocess.DEVNULL,
    )


def noisy_triggered(artifacts: Path, seed: int) -> Path:
    out = artifacts / "test_triggered_noise.rtd"
    subprocess.run(
        [
            "stattrigger", "--seed", str(seed), "augment",
            "--input", str(artifacts / "test_triggered.rtd"),
            "--aug", "gaussian-noise", "--variance", "1.0",
            "--out", str(out),
        ],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--artifacts", default="desk_artifacts")
    parser.add_argument("--results", default="results")
    parser.add_argument(
        "--toolkit-root",
        default=str(Path(__file__).resolve().parents[2]),
        help="repo root holding the toolkit's scripts/",
    )
    parser.add_argument("--epochs", type=int, default=15)
    parser.add_argument("--distill-epochs", type=int, default=30)
    parser.add_argument("--width", type=int, default=16)
    parser.add_argument("--target", type=int, default=0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=2)
    parser.add_argument("--reuse-artifacts", action="store_true")
    args = parser.parse_args()

    torch.set_num_threads(args.threads)
    artifacts = Path(args.artifacts)
    results_dir = Path(args.results)
    results_dir.mkdir(parents=True, exist_ok=True)

    started = time.time()
    if not args.reuse_artifacts or not (artifacts / "train_poisoned.rtd").exists():
        print("building attack artifacts ...", flush=True)
        build_artifacts(artifacts, Path(args.toolkit_root), args.seed)
    summary = json.loads((artifacts / "summary.json").read_text())
    print(f"corpus: {summary['corpus']} ({summary['train']} train / {summary['test']} test)")

    clean_test = read_dump(artifacts / "test_clean.rtd")
    triggered = read_dump(artifacts / "test_triggered.rtd")

    cfg = ExperimentConfig(epochs=args.epochs, width=args.width, seed=args.seed)
    runs: dict[str, dict] = {}

    def measure(name, model_dir, triggered_dump):
        model, _ = load_artifact(model_dir)
        acc, asr = evaluate(model, clean_test, triggered_dump, args.target)
        runs[name] = {"acc": acc, "asr": asr}
        print(f"{name:<24} ACC {acc:.4f}  ASR {asr:.4f}", flush=True)
        return model_dir

    print(f"training clean model ({args.epochs} epochs) ...", flush=True)
    cfg.train_path = str(artifacts / "train_clean.rtd")
    clean_dir = train(cfg, artifacts / "model_clean")
    measure("clean", clean_dir, triggered)

    print(f"training backdoored model ({args.epochs} epochs) ...", flush=True)
    cfg.train_path = str(artifacts / "train_poisoned.rtd")
    backdoor_dir = train(cfg, artifacts / "model_backdoored")
    measure("backdoored", backdoor_dir, triggered)

    distill_cfg = ExperimentConfig(
        epochs=args.distill_epochs, width=args.width, seed=args.seed,
        train_path=str(artifacts / "train_clean.rtd"),
    )
    print(f"distilling S1 student of the backdoored teacher ({args.distill_epochs} epochs) ...", flush=True)
    student_b = distill(
        backdoor_dir, distill_cfg, artifacts / "student_of_backdoored",
        Scenario.S1, target_label=args.target,
    )
    measure("student_of_backdoored", student_b, triggered)

    print("distilling S1 student of the clean teacher (control) ...", flush=True)
    student_c = distill(
        clean_dir, distill_cfg, artifacts / "student_of_clean",
        Scenario.S1, target_label=args.target,
    )
    measure("student_of_clean", student_c, triggered)

    print("evaluating under gaussian noise ...", flush=True)
    noisy = read_dump(noisy_triggered(artifacts, args.seed))
    model, _ = load_artifact(backdoor_dir)
    acc, asr = evaluate(model, clean_test, noisy, args.target)
    runs["backdoored_noise"] = {"acc": acc, "asr": asr}
    print(f"{'backdoored_noise':<24} ACC {acc:.4f}  ASR {asr:.4f}", flush=True)

    checks = [
        {"check": name, "passed": bool(fn(runs))} for name, fn in CHECKS
    ]
    for c in checks:
        print(("PASS" if c["passed"] else "FAIL") + f": {c['check']}")

    elapsed = time.time() - started
    rows = [{"run": k, **v} for k, v in runs.items()]
    write_table(results_dir / "desk_attack.txt", "Desk-scale attack results", rows, ["run", "acc", "asr"])
    (results_dir / "desk_attack.json").write_text(
        json.dumps(
            {
                "corpus": summary["corpus"],
                "train_size": summary["train"],
                "test_size": summary["test"],
                "label_flips": summary["flipped"],
                "epochs": args.epochs,
                "distill_epochs": args.distill_epochs,
                "width": args.width,
                "seed": args.seed,
                "elapsed_seconds": elapsed,
                "assumptions": list(ExperimentConfig().assumptions)
                + ["desk scale: reduced corpus/width/epochs; full-scale numbers not expected"],
                "runs": runs,
                "checks": checks,
            },
            indent=2,
        )
        + "\n"
    )
    print(f"done in {elapsed/60:.1f} min; results in {results_dir}/")
    return 0 if all(c["passed"] for c in checks) else 1


if __name__ == "__main__":
    raise SystemExit(main())
