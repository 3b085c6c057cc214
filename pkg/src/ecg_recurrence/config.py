"""Pipeline configuration: one INI file whose sections mirror the dataclasses
below, overridden field by field from command-line flags."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class DataConfig:
    manifest: str = ""
    out_dir: str = "runs/default"
    target_rate_hz: float = 250.0
    window_seconds: float | None = None  # None keeps the full record
    raw_decimate: bool = False
    workers: int = 0  # 0: one per logical core


@dataclass
class EmbeddingConfig:
    auto: bool = True
    dim: int | None = None
    tau: int | None = None
    max_lag: int = 50
    m_max: int = 10


@dataclass
class RecurrenceConfig:
    image_size: int = 224
    resize_mode: str = "bilinear"
    epsilon: float | None = None
    target_rr: float | None = None
    dump_matrices: bool = False


@dataclass
class RqaConfig:
    source: str = "latent"  # latent | channels
    lmin: int = 2
    vmin: int = 2
    exclude_loi: bool = True
    latent_target_rr: float = 0.15
    latent_epsilon: float | None = None
    channel_target_rr: float = 0.1  # used for channel plots when neither epsilon nor target_rr is set


@dataclass
class AutoencoderConfig:
    epochs: int = 50
    batch: int = 16
    lr: float = 1e-3
    train_fraction: float = 0.8


@dataclass
class ClassifierConfig:
    kind: str = "cnn"  # cnn | stacked
    test_fraction: float = 0.2
    folds: int = 5
    in_sample_stacking: bool = False
    cnn_epochs: int = 150
    cnn_batch: int = 8
    cnn_lr: float = 1e-3


@dataclass
class StatsConfig:
    alpha: float = 0.05
    bonferroni: bool = False


@dataclass
class PipelineConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    recurrence: RecurrenceConfig = field(default_factory=RecurrenceConfig)
    rqa: RqaConfig = field(default_factory=RqaConfig)
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)

    SECTIONS = ("data", "embedding", "recurrence", "rqa", "autoencoder", "classifier", "stats")

    def validate(self, require_manifest: bool = False) -> "PipelineConfig":
        d, e, r, q, a, c = (self.data, self.embedding, self.recurrence, self.rqa,
                            self.autoencoder, self.classifier)
        checks = [
            ("data.target_rate_hz", d.target_rate_hz > 0),
            ("data.window_seconds", d.window_seconds is None or d.window_seconds > 0),
            ("data.workers", d.workers >= 0),
            ("embedding.dim", e.dim is None or e.dim >= 1),
            ("embedding.tau", e.tau is None or e.tau >= 1),
            ("embedding.max_lag", e.max_lag >= 1),
            ("embedding.m_max", e.m_max >= 2),
            # the latent map (size / 16) must survive the classifier's two 2x2 pools
            ("recurrence.image_size", r.image_size >= 64 and r.image_size % 16 == 0),
            ("recurrence.resize_mode", r.resize_mode in ("bilinear", "nearest")),
            ("recurrence.epsilon", r.epsilon is None or r.epsilon >= 0),
            ("recurrence.target_rr", r.target_rr is None or 0 < r.target_rr <= 1),
            ("rqa.source", q.source in ("latent", "channels")),
            ("rqa.lmin", q.lmin >= 1),
            ("rqa.vmin", q.vmin >= 1),
            ("rqa.latent_target_rr", 0 < q.latent_target_rr <= 1),
            ("rqa.channel_target_rr", 0 < q.channel_target_rr <= 1),
            ("autoencoder.epochs", a.epochs >= 0),
            ("autoencoder.batch", a.batch >= 1),
            ("autoencoder.lr", a.lr > 0),
            ("autoencoder.train_fraction", 0 < a.train_fraction < 1),
            ("classifier.kind", c.kind in ("cnn", "stacked")),
            ("classifier.test_fraction", 0 < c.test_fraction < 1),
            ("classifier.folds", c.folds >= 2),
            ("classifier.cnn_epochs", c.cnn_epochs >= 1),
            ("classifier.cnn_batch", c.cnn_batch >= 1),
            ("classifier.cnn_lr", c.cnn_lr > 0),
            ("stats.alpha", 0 < self.stats.alpha < 1),
        ]
        for name, ok in checks:
            if not ok:
                section, key = name.split(".")
                raise ConfigError(f"{name}: invalid value {getattr(getattr(self, section), key)!r}")
        if r.epsilon is not None and r.target_rr is not None:
            raise ConfigError("recurrence.epsilon and recurrence.target_rr are mutually exclusive")
        if not e.auto and (e.dim is None or e.tau is None):
            raise ConfigError("embedding.auto = false needs both embedding.dim and embedding.tau")
        if require_manifest:
            if not d.manifest:
                raise ConfigError("data.manifest: no manifest given")
            if not Path(d.manifest).is_file():
                raise ConfigError(f"data.manifest: {d.manifest} does not exist")
        return self

    def derive_seed(self, name: str) -> int:
        return derive_seed(self.seed, name)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser["pipeline"] = {"seed": str(self.seed)}
        for section in self.SECTIONS:
            obj = getattr(self, section)
            parser[section] = {f.name: "" if getattr(obj, f.name) is None else str(getattr(obj, f.name))
                               for f in dataclasses.fields(obj)}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)


def derive_seed(root: int, name: str) -> int:
    """Stable per-stage seed: first 4 bytes of sha256("<root>:<name>")."""
    digest = hashlib.sha256(f"{root}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _convert(raw: str, typ, where: str):
    args = typing.get_args(typ)
    optional = type(None) in args
    base = next((a for a in args if a is not type(None)), typ) if args else typ
    text = raw.strip()
    if optional and text.lower() in ("", "none"):
        return None
    try:
        if base is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return base(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {base.__name__}") from None


def _field_types(obj):
    hints = typing.get_type_hints(type(obj))
    return {f.name: hints[f.name] for f in dataclasses.fields(obj)}


def load_config(path: str | Path | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section == "pipeline":
            for key, raw in parser[section].items():
                if key != "seed":
                    raise ConfigError(f"[pipeline] {key}: unknown key")
                cfg.seed = _convert(raw, int, "pipeline.seed")
            continue
        if section not in PipelineConfig.SECTIONS:
            raise ConfigError(f"[{section}]: unknown section")
        obj = getattr(cfg, section)
        types = _field_types(obj)
        for key, raw in parser[section].items():
            if key not in types:
                raise ConfigError(f"{section}.{key}: unknown key")
            setattr(obj, key, _convert(raw, types[key], f"{section}.{key}"))
    return cfg


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, object]) -> PipelineConfig:
    """Set ``"section.key"`` (or ``"seed"``) entries whose value is not None."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        if dotted == "seed":
            cfg.seed = int(value)
            continue
        section, key = dotted.split(".")
        obj = getattr(cfg, section)
        if not hasattr(obj, key):
            raise ConfigError(f"{dotted}: unknown key")
        setattr(obj, key, value)
    return cfg
