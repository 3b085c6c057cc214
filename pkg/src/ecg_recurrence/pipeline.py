"""Pipeline stages over a run directory.

Every stage reads the artifacts of the stages before it from ``out_dir``,
writes its own files there and records them, with sha256 hashes, in
``run_manifest.json``. Stages are deterministic given the config, so a
re-run reproduces identical bytes; the manifest update reports any file
whose hash changed.

Layout::

    ingest/records.csv  ingest/split.csv  signals/<record>.csv
    embedding/params.csv
    rp/<record>_<channel>.png  [rp/<record>_<channel>.dm]
    models/autoencoder.rqae  models/autoencoder_loss.csv
    latent/latent_maps.csv
    rqa/features.csv
    stats/significance.csv  stats/boxplot.csv
    configs/<stage>.ini  (the configuration each stage ran with)
    models/classifier_<kind>.rqae  [models/cnn_loss.csv]
    reports/<kind>_report.txt  reports/<kind>_confusion.csv  ...
    export/embeddings.csv
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import dynamics, rqa, stats
from .config import PipelineConfig
from .errors import ConfigError, DataError, MissingArtifactError
from .ingest import CLASS_ORDER, ClassLabel, downsample, load_record, read_manifest, signals_to_csv, window
from .learners import StackedModel, StackingConfig, evaluate_predictions, stratified_split
from .neural.models import Autoencoder, CnnClassifier, TrainConfig, train_autoencoder, train_cnn_classifier

log = logging.getLogger(__name__)

CLASS_NAMES = [c.value for c in CLASS_ORDER]
MANIFEST_NAME = "run_manifest.json"


# -- run manifest ------------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """``{"files": {relpath: sha256}, "stages": {name: {...}}}`` in ``out_dir``."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / MANIFEST_NAME
        if self.path.exists():
            data = json.loads(self.path.read_text())
        else:
            data = {"files": {}, "stages": {}}
        self.files: dict[str, str] = data.get("files", {})
        self.stages: dict[str, dict] = data.get("stages", {})

    def record(self, stage: str, paths, seed: int | None = None) -> list[str]:
        """Hash ``paths`` under ``stage``; returns files whose hash changed."""
        changed, rels = [], []
        for p in sorted(Path(p) for p in paths):
            rel = p.relative_to(self.out_dir).as_posix()
            digest = sha256_file(p)
            if rel in self.files and self.files[rel] != digest:
                changed.append(rel)
            self.files[rel] = digest
            rels.append(rel)
        self.stages[stage] = {"seed": seed, "files": rels}
        self.save()
        for rel in changed:
            log.warning("%s changed since the previous run", rel)
        return changed

    def save(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        data = {"files": dict(sorted(self.files.items())), "stages": self.stages}
        self.path.write_text(json.dumps(data, indent=2) + "\n")

    def verify(self) -> list[str]:
        """Listed files that are missing or no longer match their hash."""
        bad = []
        for rel, digest in self.files.items():
            p = self.out_dir / rel
            if not p.exists() or sha256_file(p) != digest:
                bad.append(rel)
        return bad


@dataclass
class StageResult:
    stage: str
    files: list[Path]
    changed: list[str]
    summary: str = ""


def _finish(cfg: PipelineConfig, stage: str, files, summary="", seed=None) -> StageResult:
    out = Path(cfg.data.out_dir)
    ini = out / "configs" / f"{stage}.ini"
    ini.parent.mkdir(parents=True, exist_ok=True)
    ini.write_text(cfg.to_ini())
    files = list(files) + [ini]
    changed = RunManifest(out).record(stage, files, seed)
    return StageResult(stage, files, changed, summary)


# -- small IO helpers --------------------------------------------------------

def _out(cfg) -> Path:
    return Path(cfg.data.out_dir)


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, producer)
    return path


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())
    return path


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def _workers(cfg) -> int:
    return cfg.data.workers or os.cpu_count() or 1


def _pool_map(cfg, fn, items):
    items = list(items)
    n = min(_workers(cfg), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class RecordInfo:
    name: str
    label: str
    split: str


def records(cfg) -> list[RecordInfo]:
    """Record list in manifest order, with the train/test assignment."""
    out = _out(cfg)
    rows = _read_csv(_need(out / "ingest" / "split.csv", "ingest"))
    return [RecordInfo(r["record"], r["label"], r["split"]) for r in rows]


def read_signals_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        labels = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return labels, data.T


def _label_index(label: str) -> int:
    return CLASS_NAMES.index(label)


# -- ingest ------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig) -> StageResult:
    cfg.validate(require_manifest=True)
    out = _out(cfg)
    rows = read_manifest(cfg.data.manifest)
    if not rows:
        raise DataError(f"{cfg.data.manifest}: manifest lists no records")
    files, summary, names = [], [], []
    (out / "signals").mkdir(parents=True, exist_ok=True)
    for path, label in rows:
        rec = load_record(path, class_label=label)
        rec = window(downsample(rec, cfg.data.target_rate_hz, cfg.data.raw_decimate),
                     cfg.data.window_seconds)
        name = rec.header.record_name
        if name in names:
            raise DataError(f"record name {name!r} appears twice in the manifest")
        names.append(name)
        sig = out / "signals" / f"{name}.csv"
        sig.write_text(signals_to_csv(rec))
        files.append(sig)
        summary.append([name, label.value, str(path), rec.n_samples, rec.header.n_channels,
                        f"{rec.sampling_rate_hz:g}", rec.n_interpolated])
    files.append(_write_csv(out / "ingest" / "records.csv",
                            ["record", "label", "source", "n_samples", "n_channels",
                             "sampling_rate_hz", "n_interpolated"], summary))
    labels = np.array([_label_index(r[1]) for r in summary])
    seed = cfg.derive_seed("split")
    train, test = stratified_split(labels, cfg.classifier.test_fraction, seed)
    split = np.where(np.isin(np.arange(len(labels)), test), "test", "train")
    files.append(_write_csv(out / "ingest" / "split.csv", ["record", "label", "split"],
                            [[r[0], r[1], s] for r, s in zip(summary, split)]))
    counts = {c: int((labels == i).sum()) for i, c in enumerate(CLASS_NAMES)}
    return _finish(cfg, "ingest", files, f"{len(summary)} records {counts}", seed)


# -- embedding parameters ------------------------------------------------------

def _estimate_params(args):
    name, labels, x, emb = args
    out = []
    for label, xc in zip(labels, x):
        tau = emb["tau"] if emb["tau"] is not None else dynamics.select_delay(xc, emb["max_lag"])
        m = emb["dim"] if emb["dim"] is not None else dynamics.cao_dimension(xc, tau, emb["m_max"]).m
        params = dynamics.EmbeddingParams(m=m, tau=tau, n=len(xc))
        out.append([name, label, m, tau, params.n, params.k])
    return out


def stage_embed_params(cfg: PipelineConfig) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    e = cfg.embedding
    emb = {"tau": e.tau, "dim": e.dim, "max_lag": e.max_lag, "m_max": e.m_max}
    if not e.auto:
        emb["tau"], emb["dim"] = e.tau, e.dim
    jobs = []
    for r in records(cfg):
        labels, x = read_signals_csv(_need(out / "signals" / f"{r.name}.csv", "ingest"))
        jobs.append((r.name, labels, x, emb))
    rows = [row for chunk in _pool_map(cfg, _estimate_params, jobs) for row in chunk]
    path = _write_csv(out / "embedding" / "params.csv",
                      ["record", "channel", "m", "tau", "n", "k"], rows)
    return _finish(cfg, "embed-params", [path], f"{len(rows)} channels")


def _params_by_record(cfg) -> dict[str, list[dict]]:
    rows = _read_csv(_need(_out(cfg) / "embedding" / "params.csv", "embed-params"))
    out: dict[str, list[dict]] = {}
    for r in rows:
        out.setdefault(r["record"], []).append(r)
    return out


# -- recurrence images -----------------------------------------------------------

def _render_record(args):
    name, x_by_label, params, rec_cfg, rp_dir = args
    written = []
    for p in params:
        label = p["channel"]
        x = x_by_label[label]
        dm = dynamics.distance_matrix(dynamics.embed(x, int(p["m"]), int(p["tau"])))
        img = dynamics.resize_to_image(dm, rec_cfg["image_size"], rec_cfg["resize_mode"],
                                       channel_index=dynamics.channel_index(label))
        png = Path(rp_dir) / f"{name}_{label}.png"
        Image.fromarray(img.pixels, mode="L").save(png, format="PNG")
        written.append(png)
        if rec_cfg["dump"]:
            dump = Path(rp_dir) / f"{name}_{label}.dm"
            dynamics.write_matrix_dump(dump, dm)
            written.append(dump)
    return written


def stage_rp(cfg: PipelineConfig) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    rp_dir = out / "rp"
    rp_dir.mkdir(parents=True, exist_ok=True)
    params = _params_by_record(cfg)
    r_cfg = cfg.recurrence
    rec_cfg = {"image_size": r_cfg.image_size, "resize_mode": r_cfg.resize_mode,
               "dump": r_cfg.dump_matrices}
    jobs = []
    for r in records(cfg):
        labels, x = read_signals_csv(_need(out / "signals" / f"{r.name}.csv", "ingest"))
        if r.name not in params:
            raise MissingArtifactError(out / "embedding" / "params.csv", "embed-params")
        jobs.append((r.name, dict(zip(labels, x)), params[r.name], rec_cfg, str(rp_dir)))
    files = [f for chunk in _pool_map(cfg, _render_record, jobs) for f in chunk]
    return _finish(cfg, "rp", files, f"{len(files)} files")


def load_subject_tensor(cfg, name: str, labels: list[str] | None = None) -> np.ndarray:
    """``(15, size, size)`` float32 stack of a record's PNGs, in canonical order."""
    rp_dir = _out(cfg) / "rp"
    labels = labels or list(dynamics.CANONICAL_CHANNELS)
    images = []
    for label in labels:
        png = _need(rp_dir / f"{name}_{label}.png", "rp")
        pixels = np.asarray(Image.open(png).convert("L"))
        images.append(dynamics.RecurrenceImage(pixels=pixels, source_k=0,
                                               channel_index=dynamics.channel_index(label)))
    return dynamics.stack_subject(images, size=cfg.recurrence.image_size)


def _record_channels(cfg) -> dict[str, list[str]]:
    return {name: [p["channel"] for p in ps] for name, ps in _params_by_record(cfg).items()}


def _tensors(cfg, recs) -> np.ndarray:
    chans = _record_channels(cfg)
    return np.stack([load_subject_tensor(cfg, r.name, chans.get(r.name)) for r in recs])


# -- autoencoder -------------------------------------------------------------------

def _csv_curve(history) -> list[list]:
    return [[h.epoch, _fmt(h.train_loss), _fmt(h.val_loss)] for h in history]


def stage_train_ae(cfg: PipelineConfig, checkpoint: str | None = None) -> StageResult:
    """Fit the autoencoder on the training-split subjects only."""
    cfg.validate()
    out = _out(cfg)
    train = [r for r in records(cfg) if r.split == "train"]
    data = _tensors(cfg, train)
    a = cfg.autoencoder
    seed = cfg.derive_seed("train-ae")
    tc = TrainConfig(epochs=a.epochs, batch_size=a.batch, learning_rate=a.lr, seed=seed,
                     train_fraction=a.train_fraction)
    model, history = train_autoencoder(data, tc)
    ckpt = Path(checkpoint) if checkpoint else out / "models" / "autoencoder.rqae"
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    model.save(ckpt)
    curve = _write_csv(out / "models" / "autoencoder_loss.csv",
                       ["epoch", "train_loss", "val_loss"], _csv_curve(history))
    files = [curve] + ([ckpt] if ckpt.is_relative_to(out) else [])
    last = history[-1] if history else None
    summary = f"{len(history)} epochs" + (f", final train {last.train_loss:.4f} val {last.val_loss:.4f}"
                                          if last else "")
    return _finish(cfg, "train-ae", files, summary, seed)


def _ae_path(cfg, checkpoint):
    return Path(checkpoint) if checkpoint else _out(cfg) / "models" / "autoencoder.rqae"


def stage_encode(cfg: PipelineConfig, checkpoint: str | None = None) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    model = Autoencoder.load(_need(_ae_path(cfg, checkpoint), "train-ae"))
    recs = records(cfg)
    chans = _record_channels(cfg)
    rows = []
    for r in recs:
        latent = model.encode_array(load_subject_tensor(cfg, r.name, chans.get(r.name)))[0]
        rows.append([r.name, r.label, r.split, *map(_fmt, latent.astype(np.float64).ravel())])
    size = int(round(np.sqrt(len(rows[0]) - 3)))
    header = ["record", "label", "split", *[f"z{i // size:02d}_{i % size:02d}" for i in range(size * size)]]
    path = _write_csv(out / "latent" / "latent_maps.csv", header, rows)
    return _finish(cfg, "encode", [path], f"{len(rows)} latent maps {size}x{size}")


def read_latent(cfg) -> tuple[list[RecordInfo], np.ndarray]:
    rows = _read_csv(_need(_out(cfg) / "latent" / "latent_maps.csv", "encode"))
    recs = [RecordInfo(r["record"], r["label"], r["split"]) for r in rows]
    vals = np.array([[float(v) for k, v in r.items() if k.startswith("z")] for r in rows])
    size = int(round(np.sqrt(vals.shape[1])))
    return recs, vals.reshape(len(rows), size, size)


# -- RQA ------------------------------------------------------------------------------

def _channel_rqa(args):
    name, x_by_label, params, opts = args
    rows = []
    for p in params:
        x = x_by_label[p["channel"]]
        dm = dynamics.distance_matrix(dynamics.embed(x, int(p["m"]), int(p["tau"])))
        eps = opts["epsilon"]
        if eps is None:
            eps = dynamics.epsilon_for_target_rr(dm, opts["target_rr"])
        bits = dynamics.threshold(dm, eps).bits
        feats = rqa.compute_rqa(bits, opts["lmin"], opts["vmin"], opts["exclude_loi"])
        rows.append([name, p["channel"], *map(_fmt, feats.vector()), feats.flags()])
    return rows


def stage_rqa(cfg: PipelineConfig) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    q = cfg.rqa
    rows = []
    if q.source == "latent":
        recs, maps = read_latent(cfg)
        for r, z in zip(recs, maps):
            feats = rqa.latent_rqa(z, epsilon=q.latent_epsilon,
                                   target_rr=None if q.latent_epsilon is not None else q.latent_target_rr,
                                   l_min=q.lmin, v_min=q.vmin)
            rows.append([r.name, "latent", *map(_fmt, feats.vector()), feats.flags()])
    else:
        params = _params_by_record(cfg)
        r_cfg = cfg.recurrence
        opts = {"epsilon": r_cfg.epsilon, "target_rr": r_cfg.target_rr or q.channel_target_rr,
                "lmin": q.lmin, "vmin": q.vmin, "exclude_loi": q.exclude_loi}
        jobs = []
        for r in records(cfg):
            labels, x = read_signals_csv(_need(out / "signals" / f"{r.name}.csv", "ingest"))
            jobs.append((r.name, dict(zip(labels, x)), params[r.name], opts))
        rows = [row for chunk in _pool_map(cfg, _channel_rqa, jobs) for row in chunk]
    path = _write_csv(out / "rqa" / "features.csv",
                      ["record", "channel_or_latent", *rqa.FEATURE_CODES, "flags"], rows)
    return _finish(cfg, "rqa", [path], f"{len(rows)} feature rows ({q.source})")


def read_features(cfg) -> tuple[list[RecordInfo], np.ndarray]:
    """One feature vector per record: the latent row, or the per-feature
    median over a record's channel rows (NaN-aware)."""
    rows = _read_csv(_need(_out(cfg) / "rqa" / "features.csv", "rqa"))
    by_rec: dict[str, list] = {}
    for r in rows:
        vec = [float(r[c]) if r[c] != "" else np.nan for c in rqa.FEATURE_CODES]
        by_rec.setdefault(r["record"], []).append(vec)
    recs = [r for r in records(cfg) if r.name in by_rec]
    feats = []
    for r in recs:
        arr = np.array(by_rec[r.name])
        if len(arr) == 1:
            feats.append(arr[0])
        else:
            col = [np.median(c[~np.isnan(c)]) if (~np.isnan(c)).any() else np.nan for c in arr.T]
            feats.append(np.array(col))
    return recs, np.array(feats).reshape(len(recs), len(rqa.FEATURE_CODES))


# -- statistics ------------------------------------------------------------------------

def stage_stats(cfg: PipelineConfig) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    recs, feats = read_features(cfg)
    by_class = {}
    for c in CLASS_NAMES:
        sel = [i for i, r in enumerate(recs) if r.label == c]
        if sel:
            by_class[c] = feats[sel]
    small = [c for c, v in by_class.items() if len(v) < 3]
    if len(by_class) < 2:
        raise DataError("significance testing needs at least two classes")
    if small:
        log.warning("classes with fewer than 3 subjects: %s", small)
    table = stats.significance_table(by_class, rqa.FEATURE_CODES, alpha=cfg.stats.alpha,
                                     bonferroni=cfg.stats.bonferroni)
    sig = out / "stats" / "significance.csv"
    sig.parent.mkdir(parents=True, exist_ok=True)
    sig.write_text(table.to_csv())
    box = out / "stats" / "boxplot.csv"
    box.write_text(stats.boxplot_csv(stats.boxplot_data(by_class, rqa.FEATURE_CODES)))
    n_sig = int((table.p_values < table.alpha).sum())
    return _finish(cfg, "stats", [sig, box], f"{table.n_cells} cells, {n_sig} significant")


# -- classifiers ----------------------------------------------------------------------------

def _clf_path(cfg, kind, checkpoint=None) -> Path:
    return Path(checkpoint) if checkpoint else _out(cfg) / "models" / f"classifier_{kind}.rqae"


def _split_arrays(cfg, kind):
    if kind == "cnn":
        recs, x = read_latent(cfg)
    elif kind == "stacked":
        recs, x = read_features(cfg)
    else:
        raise ConfigError(f"classifier.kind: unknown classifier {kind!r}")
    y = np.array([_label_index(r.label) for r in recs])
    train = np.array([r.split == "train" for r in recs])
    return recs, x, y, train


def stage_train_clf(cfg: PipelineConfig, checkpoint: str | None = None) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    c = cfg.classifier
    recs, x, y, train = _split_arrays(cfg, c.kind)
    seed = cfg.derive_seed(f"train-clf:{c.kind}")
    path = _clf_path(cfg, c.kind, checkpoint)
    path.parent.mkdir(parents=True, exist_ok=True)
    files = [path] if path.is_relative_to(out) else []
    if c.kind == "cnn":
        tc = TrainConfig(epochs=c.cnn_epochs, batch_size=c.cnn_batch, learning_rate=c.cnn_lr,
                         seed=seed)
        model, curve = train_cnn_classifier(x[train], y[train], tc, n_classes=len(CLASS_NAMES))
        files.append(_write_csv(out / "models" / "cnn_loss.csv", ["epoch", "train_loss", "val_loss"],
                                [[i + 1, _fmt(v), ""] for i, v in enumerate(curve)]))
        acc = float((model.predict(x[train]) == y[train]).mean())
    else:
        sc = StackingConfig(n_classes=len(CLASS_NAMES), folds=c.folds, seed=seed,
                            in_sample=c.in_sample_stacking)
        model = StackedModel(sc).fit(x[train], y[train])
        acc = float((model.predict(x[train]) == y[train]).mean())
    model.save(path)
    return _finish(cfg, f"train-clf-{c.kind}", files, f"{c.kind}: train accuracy {100 * acc:.2f}%", seed)


def _load_classifier(kind, path):
    return CnnClassifier.load(path) if kind == "cnn" else StackedModel.load(path)


def stage_evaluate(cfg: PipelineConfig, checkpoint: str | None = None) -> StageResult:
    cfg.validate()
    out = _out(cfg)
    kind = cfg.classifier.kind
    model = _load_classifier(kind, _need(_clf_path(cfg, kind, checkpoint), "train-clf"))
    recs, x, y, train = _split_arrays(cfg, kind)
    test = ~train
    if not test.any():
        raise DataError("no test records in the split")
    proba = model.predict_proba(x[test])
    pred = proba.argmax(axis=1)
    title = {"cnn": "CNN classifier", "stacked": "Stacked classifier"}[kind]
    report = evaluate_predictions(y[test], pred, CLASS_NAMES, title)
    rep_dir = out / "reports"
    rep_dir.mkdir(parents=True, exist_ok=True)
    txt = rep_dir / f"{kind}_report.txt"
    txt.write_text(report.to_text())
    conf = rep_dir / f"{kind}_confusion.csv"
    conf.write_text(report.confusion_csv())
    met = rep_dir / f"{kind}_metrics.csv"
    met.write_text(report.metrics_csv())
    test_recs = [r for r, t in zip(recs, test) if t]
    preds = _write_csv(rep_dir / f"{kind}_predictions.csv",
                       ["record", "label", "predicted", *[f"p_{c}" for c in CLASS_NAMES]],
                       [[r.name, r.label, CLASS_NAMES[p], *map(repr, pr)]
                        for r, p, pr in zip(test_recs, pred, proba)])
    return _finish(cfg, f"evaluate-{kind}", [txt, conf, met, preds],
                   f"{kind}: test accuracy {100 * report.accuracy:.2f}% on {int(test.sum())} records")


def evaluation_accuracy(cfg, kind: str) -> float:
    rows = _read_csv(_need(_out(cfg) / "reports" / f"{kind}_predictions.csv", "evaluate"))
    return float(np.mean([r["label"] == r["predicted"] for r in rows]))


# -- export ------------------------------------------------------------------------------------

def stage_export_embeddings(cfg: PipelineConfig) -> StageResult:
    """Flat latent maps (and RQA vectors when present) with labels, for
    external visualisation such as t-SNE."""
    cfg.validate()
    out = _out(cfg)
    recs, maps = read_latent(cfg)
    flat = maps.reshape(len(recs), -1)
    files = [_write_csv(out / "export" / "embeddings.csv",
                        ["record", "label", "split", *[f"e{i}" for i in range(flat.shape[1])]],
                        [[r.name, r.label, r.split, *map(repr, v)] for r, v in zip(recs, flat)])]
    if (out / "rqa" / "features.csv").exists():
        frecs, feats = read_features(cfg)
        files.append(_write_csv(out / "export" / "rqa_features.csv",
                                ["record", "label", "split", *rqa.FEATURE_CODES],
                                [[r.name, r.label, r.split, *map(_fmt, v)]
                                 for r, v in zip(frecs, feats)]))
    return _finish(cfg, "export-embeddings", files, f"{len(recs)} embeddings")


STAGES = {
    "ingest": stage_ingest,
    "embed-params": stage_embed_params,
    "rp": stage_rp,
    "train-ae": stage_train_ae,
    "encode": stage_encode,
    "rqa": stage_rqa,
    "stats": stage_stats,
    "train-clf": stage_train_clf,
    "evaluate": stage_evaluate,
    "export-embeddings": stage_export_embeddings,
}
