"""End-to-end run on the synthetic five-class dataset.

Generates the records, then drives every CLI stage in order: the CNN path
reads the autoencoder latent maps, the stacked path reads channel-plot RQA
features. Writes ``summary.json`` with both test accuracies, per-stage wall
times and the sha256 of every report, so two runs can be compared.

    python3 scripts/run_synthetic.py --out runs/synth0 --seed 0
    python3 scripts/run_synthetic.py --out runs/spread --seed 0 1 2

With several seeds each run goes to ``<out>/seed<N>`` and the mean and
standard deviation of both accuracies are printed.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from ecg_recurrence import cli, pipeline


def run(out: Path, seed: int = 0, n_per_class: int = 10, seconds: float = 8.0,
        image_size: int = 224, epochs: int = 50, cnn_epochs: int = 150, workers: int = 0):
    out = Path(out)
    data = out / "data"
    run_dir = out / "run"
    common = ["--manifest", str(data / "manifest.csv"), "--out", str(run_dir),
              "--seed", str(seed), "--workers", str(workers),
              "--image-size", str(image_size), "--epochs", str(epochs),
              "--cnn-epochs", str(cnn_epochs)]
    steps = [
        ("ingest", []),
        ("embed-params", []),
        ("rp", []),
        ("train-ae", []),
        ("encode", []),
        ("train-clf", ["--classifier", "cnn"]),
        ("evaluate", ["--classifier", "cnn"]),
        ("rqa", ["--rqa-source", "channels"]),
        ("stats", ["--rqa-source", "channels"]),
        ("train-clf", ["--classifier", "stacked", "--rqa-source", "channels"]),
        ("evaluate", ["--classifier", "stacked", "--rqa-source", "channels"]),
        ("export-embeddings", []),
    ]
    timings = {}
    t0 = time.perf_counter()
    code = cli.main(["synth", "--out", str(data), "--n-per-class", str(n_per_class),
                     "--seed", str(seed), "--seconds", str(seconds)])
    if code:
        raise SystemExit(code)
    timings["synth"] = time.perf_counter() - t0
    for name, extra in steps:
        t = time.perf_counter()
        code = cli.main([name, *common, *extra])
        if code:
            raise SystemExit(f"{name} exited with {code}")
        key = name if name not in timings else f"{name}:{extra[1]}"
        timings[key] = time.perf_counter() - t
    total = time.perf_counter() - t0

    cfg = pipeline.PipelineConfig()
    cfg.data.out_dir = str(run_dir)
    cfg.data.manifest = str(data / "manifest.csv")
    reports = sorted((run_dir / "reports").glob("*"))
    summary = {
        "seed": seed,
        "n_per_class": n_per_class,
        "cnn_accuracy": pipeline.evaluation_accuracy(cfg, "cnn"),
        "stacked_accuracy": pipeline.evaluation_accuracy(cfg, "stacked"),
        "seconds_total": total,
        "seconds_by_stage": timings,
        "report_sha256": {p.name: pipeline.sha256_file(p) for p in reports},
        "manifest_mismatches": pipeline.RunManifest(run_dir).verify(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, nargs="+", default=[0])
    ap.add_argument("--n-per-class", type=int, default=10)
    ap.add_argument("--seconds", type=float, default=8.0)
    ap.add_argument("--image-size", type=int, default=224)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--cnn-epochs", type=int, default=150)
    ap.add_argument("--workers", type=int, default=0)
    args = ap.parse_args(argv)
    out = Path(args.out)
    results = []
    for seed in args.seed:
        dest = out if len(args.seed) == 1 else out / f"seed{seed}"
        s = run(dest, seed, args.n_per_class, args.seconds, args.image_size,
                args.epochs, args.cnn_epochs, args.workers)
        results.append(s)
        print(f"seed {seed}: cnn {100 * s['cnn_accuracy']:.1f}%  "
              f"stacked {100 * s['stacked_accuracy']:.1f}%  ({s['seconds_total']:.0f} s)")
    if len(results) > 1:
        for key in ("cnn_accuracy", "stacked_accuracy"):
            v = 100 * np.array([r[key] for r in results])
            print(f"{key}: mean {v.mean():.1f}%  sd {v.std(ddof=1):.1f}  over {len(v)} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
