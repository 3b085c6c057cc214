"""Command-line entry point: ``ecg-rp <subcommand> [options]``.

Every subcommand takes the same configuration (``--config`` INI file plus
flag overrides; flags win) and works inside ``--out``. Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for numerical
divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import PipelineConfig, apply_overrides, load_config
from .errors import ConfigError, PipelineError
from .synth import SynthConfig, synth_dataset

log = logging.getLogger("ecg_recurrence")

# flag dest -> config field
_FLAG_FIELDS = {
    "manifest": "data.manifest",
    "out": "data.out_dir",
    "target_rate": "data.target_rate_hz",
    "window_seconds": "data.window_seconds",
    "raw_decimate": "data.raw_decimate",
    "workers": "data.workers",
    "auto_embed": "embedding.auto",
    "dim": "embedding.dim",
    "tau": "embedding.tau",
    "image_size": "recurrence.image_size",
    "epsilon": "recurrence.epsilon",
    "target_rr": "recurrence.target_rr",
    "dump_matrices": "recurrence.dump_matrices",
    "rqa_source": "rqa.source",
    "lmin": "rqa.lmin",
    "vmin": "rqa.vmin",
    "exclude_loi": "rqa.exclude_loi",
    "latent_target_rr": "rqa.latent_target_rr",
    "epochs": "autoencoder.epochs",
    "batch": "autoencoder.batch",
    "lr": "autoencoder.lr",
    "classifier": "classifier.kind",
    "folds": "classifier.folds",
    "test_fraction": "classifier.test_fraction",
    "in_sample_stacking": "classifier.in_sample_stacking",
    "cnn_epochs": "classifier.cnn_epochs",
    "bonferroni": "stats.bonferroni",
    "seed": "seed",
}

_CHECKPOINT_STAGES = {"train-ae", "encode", "train-clf", "evaluate"}


def _bool_flag(parser, name, help_text):
    parser.add_argument(name, action=argparse.BooleanOptionalAction, default=None, help=help_text)


def _add_common(p: argparse.ArgumentParser):
    g = p.add_argument_group("run")
    g.add_argument("--config", help="INI configuration file")
    g.add_argument("--manifest", help="record_path,label CSV")
    g.add_argument("--out", help="run directory (default from config)")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="worker processes (0 = logical cores)")
    g.add_argument("-v", "--verbose", action="store_true")

    g = p.add_argument_group("signals")
    g.add_argument("--target-rate", type=float, help="analysis rate in Hz (default 250)")
    g.add_argument("--window-seconds", type=float)
    _bool_flag(g, "--raw-decimate", "decimate without the anti-alias filter")

    g = p.add_argument_group("embedding and recurrence")
    _bool_flag(g, "--auto-embed", "estimate tau (mutual information) and m (Cao)")
    g.add_argument("--tau", type=int)
    g.add_argument("--dim", type=int)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--target-rr", type=float)
    g.add_argument("--image-size", type=int)
    _bool_flag(g, "--dump-matrices", "write raw distance matrices next to the PNGs")

    g = p.add_argument_group("rqa and stats")
    g.add_argument("--rqa-source", choices=["latent", "channels"])
    g.add_argument("--lmin", type=int)
    g.add_argument("--vmin", type=int)
    _bool_flag(g, "--exclude-loi", "drop the line of identity from channel plots")
    g.add_argument("--latent-target-rr", type=float)
    _bool_flag(g, "--bonferroni", "Bonferroni-correct the significance table")

    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--checkpoint", help="model file to write (train-*) or read")
    g.add_argument("--classifier", choices=["cnn", "stacked"])
    g.add_argument("--folds", type=int)
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--cnn-epochs", type=int)
    _bool_flag(g, "--in-sample-stacking", "meta-features from in-sample base predictions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecg-rp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "read WFDB records, downsample, write signals and the split",
        "embed-params": "choose delay and dimension per channel",
        "rp": "distance-surface PNGs per channel",
        "train-ae": "train the recurrence-image autoencoder",
        "encode": "latent maps for every record",
        "rqa": "RQA features (latent maps or channel plots)",
        "stats": "rank-sum significance table and box-plot data",
        "train-clf": "train the CNN or stacked classifier",
        "evaluate": "test-set report for a trained classifier",
        "export-embeddings": "flat embeddings CSV for external visualisation",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text, description=text))
    sp = sub.add_parser("synth", help="write the synthetic five-class dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-per-class", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seconds", type=float, default=8.0)
    sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config)
    overrides = {field: getattr(args, dest, None) for dest, field in _FLAG_FIELDS.items()}
    apply_overrides(cfg, overrides)
    if args.dim is not None and args.tau is not None and args.auto_embed is None:
        cfg.embedding.auto = False
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            manifest = synth_dataset(args.out, SynthConfig(args.n_per_class, args.seed,
                                                           seconds=args.seconds))
            print(f"synth: wrote {manifest}")
            return 0
        cfg = config_from_args(args)
        stage = pipeline.STAGES[args.command]
        if args.command in _CHECKPOINT_STAGES:
            result = stage(cfg, checkpoint=args.checkpoint)
        else:
            result = stage(cfg)
        print(f"{result.stage}: {result.summary} ({len(result.files)} files)")
        for rel in result.changed:
            print(f"  changed since last run: {rel}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except PipelineError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
