"""Synthetic five-class, 15-lead records with distinct dynamics per class.

Each class is one signal family (sine, sine plus harmonic, chirp, a van der
Pol relaxation oscillator, sine in white noise). Every subject draws its own
base frequency from its family's band; each lead then gets its own gain, phase and a little
measurement noise. Records are written as WFDB format-16 files with a
``record_path,label`` manifest, and the output is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import chirp

from .dynamics import CANONICAL_CHANNELS
from .errors import ConfigError
from .ingest import CLASS_ORDER, ClassLabel, make_header, mv_to_adu, write_manifest, write_record

FAMILIES = {
    ClassLabel.HC: "sine",
    ClassLabel.MI: "sine+harmonic",
    ClassLabel.BBB: "chirp",
    ClassLabel.CM: "relaxation",
    ClassLabel.DR: "noisy-sine",
}
# per-family fundamental range in Hz; the bands do not overlap, so the
# spacing of the recurrence texture also differs between classes
F0_RANGE = {
    ClassLabel.HC: (1.0, 1.2),
    ClassLabel.MI: (2.0, 2.3),
    ClassLabel.BBB: (1.2, 1.4),
    ClassLabel.CM: (1.5, 1.7),
    ClassLabel.DR: (2.8, 3.2),
}
_REASON = {
    ClassLabel.HC: "Healthy control",
    ClassLabel.MI: "Myocardial infarction",
    ClassLabel.BBB: "Bundle branch block",
    ClassLabel.CM: "Cardiomyopathy",
    ClassLabel.DR: "Dysrhythmia",
}


@dataclass
class SynthConfig:
    n_per_class: int = 10
    seed: int = 0
    fs: float = 1000.0
    seconds: float = 8.0
    measurement_noise_mv: float = 0.01

    def __post_init__(self):
        if self.n_per_class < 4:
            raise ConfigError(f"n_per_class must be >= 4, got {self.n_per_class}")
        if self.seconds <= 0 or self.fs <= 0:
            raise ConfigError("seconds and fs must be positive")


_VDP_MU = 3.0
_VDP_PERIOD = 8.8591  # limit-cycle period at mu = 3, in oscillator time units
_VDP_WARMUP = 2000


def _van_der_pol(n: int, dt: float, mu: float, substeps: int = 4) -> np.ndarray:
    """x component of the van der Pol oscillator sampled every ``dt`` (RK4)."""
    h = dt / substeps
    x, v = 2.0, 0.0
    out = np.empty(n)
    for i in range(n):
        out[i] = x
        for _ in range(substeps):
            k1x, k1v = v, mu * (1 - x * x) * v - x
            x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
            k2x, k2v = v2, mu * (1 - x2 * x2) * v2 - x2
            x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
            k3x, k3v = v3, mu * (1 - x3 * x3) * v3 - x3
            x4, v4 = x + h * k3x, v + h * k3v
            k4x, k4v = v4, mu * (1 - x4 * x4) * v4 - x4
            x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return out


def _relaxation_base(n: int, fs: float, f0: float) -> np.ndarray:
    """Oscillator trace with fundamental near ``f0`` Hz, one period longer
    than ``n`` so leads can start at any phase."""
    per_samples = int(np.ceil(fs / f0))
    x = _van_der_pol(_VDP_WARMUP + n + per_samples, f0 * _VDP_PERIOD / fs, _VDP_MU)
    return 0.5 * x[_VDP_WARMUP:]


def family_signal(family: str, t: np.ndarray, f0: float, phase: float,
                  rng: np.random.Generator, base: np.ndarray | None = None) -> np.ndarray:
    """One lead in mV (the noisy-sine family adds its own noise here).

    ``relaxation`` reads a phase-shifted slice of ``base``, the trace from
    :func:`_relaxation_base`.
    """
    w = 2 * np.pi * f0
    if family == "sine":
        return np.sin(w * t + phase)
    if family == "sine+harmonic":
        return 0.7 * np.sin(w * t + phase) + 0.5 * np.sin(2 * (w * t + phase) + 0.8)
    if family == "chirp":
        dur = t[-1] if len(t) > 1 else 1.0
        return chirp(t, f0=0.6 * f0, f1=2.0 * f0, t1=dur, phi=np.degrees(phase))
    if family == "relaxation":
        fs = 1.0 / (t[1] - t[0])
        offset = int(phase / (2 * np.pi) * fs / f0)
        return base[offset: offset + len(t)]
    if family == "noisy-sine":
        return np.sin(w * t + phase) + rng.normal(0.0, 0.5, len(t))
    raise ValueError(f"unknown family {family!r}")


def subject_signals(label: ClassLabel, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """``(15, n)`` millivolt array for one subject of class ``label``."""
    n = int(round(cfg.seconds * cfg.fs))
    t = np.arange(n) / cfg.fs
    f0 = rng.uniform(*F0_RANGE[label])
    family = FAMILIES[label]
    base = _relaxation_base(n, cfg.fs, f0) if family == "relaxation" else None
    leads = []
    for _ in CANONICAL_CHANNELS:
        gain = rng.uniform(0.6, 1.4)
        phase = rng.uniform(0, 2 * np.pi)
        x = gain * family_signal(family, t, f0, phase, rng, base)
        leads.append(x + rng.normal(0.0, cfg.measurement_noise_mv, n))
    return np.stack(leads)


def synth_dataset(out_dir: str | Path, cfg: SynthConfig | None = None) -> Path:
    """Write ``5 * n_per_class`` records under ``out_dir/records`` and return
    the manifest path."""
    cfg = cfg or SynthConfig()
    out_dir = Path(out_dir)
    rec_dir = out_dir / "records"
    rec_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    labels = list(CANONICAL_CHANNELS)
    for ci, label in enumerate(CLASS_ORDER):
        for i in range(cfg.n_per_class):
            rng = np.random.default_rng([cfg.seed, ci, i])
            mv = subject_signals(label, cfg, rng)
            name = f"syn_{label.value.lower()}_{i:03d}"
            header = make_header(name, labels, cfg.fs, mv.shape[1],
                                 comments=[f"Reason for admission: {_REASON[label]}"])
            write_record(rec_dir, header, mv_to_adu(header, mv))
            rows.append((f"records/{name}.hea", label))
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
