"""WFDB record ingestion: header parsing, format-16 signal decoding, labels
and anti-aliased downsampling.

Only the subset of the WFDB format used by the PTB diagnostic database is
supported: single-segment records whose signals are stored as 16-bit
little-endian two's complement ("format 16"), possibly split over several
signal files (PTB keeps the Frank leads in a separate ``.xyz`` file).
"""

from __future__ import annotations

import csv
import io
import logging
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import signal as sps

from .errors import (
    DataError,
    HeaderParseError,
    MissingSampleError,
    TruncationError,
    UnsupportedFormatError,
    UnsupportedRateError,
)

log = logging.getLogger(__name__)

DEFAULT_GAIN = 200.0
DEFAULT_FS = 250.0
DEFAULT_ADC_RES = 12
INVALID_SAMPLE = -32768
MAX_INVALID_FRACTION = 0.01
SUPPORTED_FORMATS = (16,)

FIR_TAPS = 63
FIR_CUTOFF_FRACTION = 0.8


class ClassLabel(str, Enum):
    HC = "HC"
    MI = "MI"
    BBB = "BBB"
    CM = "CM"
    DR = "DR"

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise DataError(f"unknown class label {text!r}; expected one of "
                            f"{[c.value for c in cls]}") from None


CLASS_ORDER = [ClassLabel.HC, ClassLabel.MI, ClassLabel.BBB, ClassLabel.CM, ClassLabel.DR]

# PTB "Reason for admission" strings; heart failure and the excluded
# diagnoses stay unmapped.
_ADMISSION_LABELS = {
    "healthy control": ClassLabel.HC,
    "myocardial infarction": ClassLabel.MI,
    "bundle branch block": ClassLabel.BBB,
    "cardiomyopathy": ClassLabel.CM,
    "dysrhythmia": ClassLabel.DR,
}


@dataclass(frozen=True)
class ChannelSpec:
    label: str
    file_name: str
    gain_adu_per_mv: float = DEFAULT_GAIN
    baseline_adu: int = 0
    adc_resolution_bits: int = DEFAULT_ADC_RES
    storage_format: int = 16
    adc_zero: int = 0
    units: str = "mV"


@dataclass(frozen=True)
class RecordHeader:
    record_name: str
    n_channels: int
    sampling_rate_hz: float
    n_samples: int
    channels: tuple[ChannelSpec, ...]
    comments: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_channels < 1 or len(self.channels) != self.n_channels:
            raise DataError(f"{self.record_name}: expected {self.n_channels} channel "
                            f"descriptors, got {len(self.channels)}")
        if not self.sampling_rate_hz > 0:
            raise DataError(f"{self.record_name}: sampling rate must be positive")
        if self.n_samples < 0:
            raise DataError(f"{self.record_name}: negative sample count")

    @property
    def channel_labels(self) -> list[str]:
        return [c.label for c in self.channels]


@dataclass(frozen=True)
class SignalRecord:
    header: RecordHeader
    samples_mv: np.ndarray  # (n_channels, n_samples)
    class_label: ClassLabel | None = None
    n_interpolated: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples_mv, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != self.header.n_channels:
            raise DataError(f"sample matrix shape {arr.shape} does not match "
                            f"{self.header.n_channels} channels")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{self.header.record_name}: non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples_mv", arr)

    @property
    def sampling_rate_hz(self) -> float:
        return self.header.sampling_rate_hz

    @property
    def n_samples(self) -> int:
        return self.samples_mv.shape[1]

    def channel(self, label: str) -> np.ndarray:
        return self.samples_mv[self.header.channel_labels.index(label)]


# -- header ---------------------------------------------------------------

_FS_RE = re.compile(r"^([0-9.eE+-]+)(?:/([0-9.eE+-]+)(?:\(([0-9.eE+-]+)\))?)?$")
_FMT_RE = re.compile(r"^(\d+)(?:x\d+)?(?::\d+)?(?:\+\d+)?$")
_GAIN_RE = re.compile(r"^([0-9.eE+-]+)(?:\((-?\d+)\))?(?:/(\S+))?$")


def parse_header(raw: bytes | str) -> RecordHeader:
    """Parse the text of a WFDB ``.hea`` file.

    Unknown trailing fields are ignored. Lines are numbered from 1 in error
    messages, counting comments and blank lines.
    """
    text = raw.decode("latin-1") if isinstance(raw, (bytes, bytearray)) else raw
    lines = text.splitlines()
    comments = []
    content = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            comments.append(stripped[1:].strip())
            continue
        # inline comments are allowed after the fields
        content.append((lineno, stripped.split("#", 1)[0].split()))
    if not content:
        raise HeaderParseError("no record line found", 1)

    lineno, fields = content[0]
    if len(fields) < 2:
        raise HeaderParseError("record line needs at least a name and a signal count", lineno)
    name = fields[0]
    if "/" in name:
        raise UnsupportedFormatError(f"multi-segment record {name!r} is not supported")
    try:
        n_sig = int(fields[1])
    except ValueError:
        raise HeaderParseError(f"bad signal count {fields[1]!r}", lineno) from None
    if n_sig < 1:
        raise HeaderParseError("record declares no signals", lineno)
    fs = DEFAULT_FS
    if len(fields) > 2:
        m = _FS_RE.match(fields[2])
        if not m:
            raise HeaderParseError(f"bad sampling frequency {fields[2]!r}", lineno)
        fs = float(m.group(1))
    n_samples = 0
    if len(fields) > 3:
        try:
            n_samples = int(fields[3])
        except ValueError:
            raise HeaderParseError(f"bad sample count {fields[3]!r}", lineno) from None

    sig_lines = content[1:]
    if len(sig_lines) < n_sig:
        raise HeaderParseError(f"expected {n_sig} signal lines, found {len(sig_lines)}",
                               lines and len(lines))
    channels = tuple(_parse_signal_line(ln, flds, idx)
                     for idx, (ln, flds) in enumerate(sig_lines[:n_sig]))
    return RecordHeader(record_name=name, n_channels=n_sig, sampling_rate_hz=fs,
                        n_samples=n_samples, channels=channels, comments=tuple(comments))


def _parse_signal_line(lineno: int, fields: list[str], index: int) -> ChannelSpec:
    if len(fields) < 2:
        raise HeaderParseError("signal line needs a file name and a format", lineno)
    file_name = fields[0]
    m = _FMT_RE.match(fields[1])
    if not m:
        raise HeaderParseError(f"bad storage format {fields[1]!r}", lineno)
    fmt = int(m.group(1))
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormatError(f"line {lineno}: WFDB format {fmt} is not supported "
                                     f"(only format 16)")

    gain, baseline, units = DEFAULT_GAIN, None, "mV"
    if len(fields) > 2:
        g = _GAIN_RE.match(fields[2])
        if not g:
            raise HeaderParseError(f"bad gain field {fields[2]!r}", lineno)
        gain = float(g.group(1)) or DEFAULT_GAIN  # gain 0 means "uncalibrated"
        if g.group(2) is not None:
            baseline = int(g.group(2))
        if g.group(3):
            units = g.group(3)
    try:
        adc_res = int(fields[3]) if len(fields) > 3 else DEFAULT_ADC_RES
        adc_zero = int(fields[4]) if len(fields) > 4 else 0
    except ValueError:
        raise HeaderParseError("bad ADC resolution/zero field", lineno) from None
    if baseline is None:
        baseline = adc_zero
    # fields 5..7 are initial value, checksum, block size
    label = " ".join(fields[8:]) if len(fields) > 8 else f"ch{index}"
    if gain <= 0:
        raise HeaderParseError(f"gain must be positive, got {gain}", lineno)
    return ChannelSpec(label=label, file_name=file_name, gain_adu_per_mv=gain,
                       baseline_adu=baseline, adc_resolution_bits=adc_res or DEFAULT_ADC_RES,
                       storage_format=fmt, adc_zero=adc_zero, units=units)


def label_from_comments(header: RecordHeader) -> ClassLabel | None:
    """Map a PTB ``Reason for admission:`` comment onto a class label."""
    for c in header.comments:
        if c.lower().startswith("reason for admission:"):
            reason = c.split(":", 1)[1].strip().lower()
            return _ADMISSION_LABELS.get(reason)
    return None


# -- signals --------------------------------------------------------------

def _signal_files(header: RecordHeader) -> dict[str, list[int]]:
    files: dict[str, list[int]] = {}
    for i, ch in enumerate(header.channels):
        files.setdefault(ch.file_name, []).append(i)
    return files


def decode_adu(header: RecordHeader, raw: bytes | Mapping[str, bytes]) -> np.ndarray:
    """Decode format-16 payload(s) into an int32 ``(n_channels, n_samples)``
    matrix of ADC units. ``raw`` is the bytes of the single signal file, or a
    mapping from file name to bytes when channels span several files."""
    files = _signal_files(header)
    if isinstance(raw, (bytes, bytearray, memoryview)):
        if len(files) != 1:
            raise DataError(f"{header.record_name}: channels span {sorted(files)}; "
                            "pass a mapping of file name to bytes")
        raw = {next(iter(files)): bytes(raw)}
    out = None
    for fname, idx in files.items():
        if fname not in raw:
            raise DataError(f"{header.record_name}: signal file {fname} not supplied")
        buf = raw[fname]
        frame = 2 * len(idx)
        if len(buf) % frame:
            raise TruncationError(f"{fname}: {len(buf)} bytes is not a whole number of "
                                  f"{len(idx)}-channel frames")
        block = np.frombuffer(buf, dtype="<i2").reshape(-1, len(idx)).T.astype(np.int32)
        if out is None:
            out = np.empty((header.n_channels, block.shape[1]), dtype=np.int32)
        elif block.shape[1] != out.shape[1]:
            raise DataError(f"{header.record_name}: signal files disagree on length")
        out[idx] = block
    if header.n_samples and out.shape[1] < header.n_samples:
        raise TruncationError(f"{header.record_name}: header declares {header.n_samples} "
                              f"samples, files hold {out.shape[1]}")
    if header.n_samples:
        out = out[:, :header.n_samples]
    return out


def read_signals(header: RecordHeader, raw, class_label: ClassLabel | None = None,
                 max_invalid_fraction: float = MAX_INVALID_FRACTION) -> SignalRecord:
    """Decode the signal payload of ``header`` into millivolts.

    Physical value is ``(adu - baseline) / gain``. Samples equal to the WFDB
    invalid sentinel are linearly interpolated from their valid neighbours;
    a channel with more than ``max_invalid_fraction`` invalid samples raises
    :class:`MissingSampleError` (pass 0 to reject any invalid sample).
    """
    adu = decode_adu(header, raw)
    gains = np.array([c.gain_adu_per_mv for c in header.channels])[:, None]
    base = np.array([c.baseline_adu for c in header.channels], dtype=np.float64)[:, None]
    mv = (adu - base) / gains

    invalid = adu == INVALID_SAMPLE
    n_bad = int(invalid.sum())
    if n_bad:
        n = adu.shape[1]
        for ch in np.flatnonzero(invalid.any(axis=1)):
            bad = invalid[ch]
            frac = bad.sum() / n
            if frac > max_invalid_fraction or bad.all():
                raise MissingSampleError(
                    f"{header.record_name} channel {header.channels[ch].label}: "
                    f"{bad.sum()} invalid samples ({frac:.2%})")
            good = np.flatnonzero(~bad)
            mv[ch, bad] = np.interp(np.flatnonzero(bad), good, mv[ch, good])
        log.info("%s: interpolated %d invalid samples", header.record_name, n_bad)
    return SignalRecord(header=header, samples_mv=mv, class_label=class_label,
                        n_interpolated=n_bad)


def load_record(hea_path: str | Path, class_label: ClassLabel | None = None) -> SignalRecord:
    hea_path = Path(hea_path)
    if hea_path.suffix != ".hea":
        hea_path = hea_path.with_suffix(".hea")
    header = parse_header(hea_path.read_bytes())
    raw = {f: (hea_path.parent / f).read_bytes() for f in _signal_files(header)}
    if class_label is None:
        class_label = label_from_comments(header)
    return read_signals(header, raw, class_label=class_label)


# -- writing (synthetic data and round-trip tests) --------------------------

def format_header(header: RecordHeader) -> str:
    lines = [f"{header.record_name} {header.n_channels} {header.sampling_rate_hz:g} "
             f"{header.n_samples}"]
    for ch in header.channels:
        lines.append(f"{ch.file_name} {ch.storage_format} {ch.gain_adu_per_mv:g}"
                     f"({ch.baseline_adu})/{ch.units} {ch.adc_resolution_bits} {ch.adc_zero} "
                     f"0 0 0 {ch.label}")
    lines.extend(f"# {c}" for c in header.comments)
    return "\n".join(lines) + "\n"


def encode_adu(header: RecordHeader, adu: np.ndarray) -> dict[str, bytes]:
    adu = np.asarray(adu)
    if adu.shape[0] != header.n_channels:
        raise DataError("ADU matrix does not match header channel count")
    if adu.min(initial=0) < -32768 or adu.max(initial=0) > 32767:
        raise DataError("ADU values exceed the 16-bit range")
    return {fname: np.ascontiguousarray(adu[idx].T).astype("<i2").tobytes()
            for fname, idx in _signal_files(header).items()}


def mv_to_adu(header: RecordHeader, mv: np.ndarray) -> np.ndarray:
    gains = np.array([c.gain_adu_per_mv for c in header.channels])[:, None]
    base = np.array([c.baseline_adu for c in header.channels])[:, None]
    adu = np.rint(np.asarray(mv) * gains + base)
    # keep clear of the invalid-sample sentinel
    return np.clip(adu, -32767, 32767).astype(np.int32)


def write_record(directory: str | Path, header: RecordHeader, adu: np.ndarray) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hea = directory / f"{header.record_name}.hea"
    hea.write_text(format_header(header))
    for fname, payload in encode_adu(header, adu).items():
        (directory / fname).write_bytes(payload)
    return hea


def make_header(record_name: str, labels: list[str], fs: float, n_samples: int,
                gain: float = 2000.0, baseline: int = 0, comments=()) -> RecordHeader:
    chans = tuple(ChannelSpec(label=lab, file_name=f"{record_name}.dat", gain_adu_per_mv=gain,
                              baseline_adu=baseline, adc_resolution_bits=16)
                  for lab in labels)
    return RecordHeader(record_name=record_name, n_channels=len(labels), sampling_rate_hz=fs,
                        n_samples=n_samples, channels=chans, comments=tuple(comments))


# -- manifest ------------------------------------------------------------

def read_manifest(path: str | Path) -> list[tuple[Path, ClassLabel]]:
    """Read a ``record_path,label`` CSV. Relative record paths resolve against
    the manifest's directory."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"record_path", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: manifest needs record_path,label columns")
        for i, row in enumerate(reader, start=2):
            rec = Path(row["record_path"].strip())
            if not rec.is_absolute():
                rec = path.parent / rec
            try:
                rows.append((rec, ClassLabel.parse(row["label"])))
            except DataError as exc:
                raise DataError(f"{path} line {i}: {exc}") from None
    return rows


def write_manifest(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_path", "label"])
        for rec, lab in rows:
            w.writerow([str(rec), ClassLabel(lab).value])


def signals_to_csv(record: SignalRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(record.header.channel_labels)
    for row in record.samples_mv.T:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# -- downsampling ----------------------------------------------------------

def antialias_taps(source_hz: float, target_hz: float, numtaps: int = FIR_TAPS) -> np.ndarray:
    cutoff = FIR_CUTOFF_FRACTION * target_hz / 2.0
    taps = sps.firwin(numtaps, cutoff, window="hamming", fs=source_hz)
    return taps / taps.sum()


def decimation_factor(source_hz: float, target_hz: float) -> int:
    if target_hz <= 0 or target_hz > source_hz:
        raise UnsupportedRateError(f"cannot resample {source_hz:g} Hz to {target_hz:g} Hz")
    ratio = source_hz / target_hz
    factor = int(round(ratio))
    if abs(ratio - factor) > 1e-9 * ratio:
        raise UnsupportedRateError(f"{source_hz:g} Hz is not an integer multiple of "
                                   f"{target_hz:g} Hz")
    return factor


def downsample(record: SignalRecord, target_rate_hz: float, raw_decimate: bool = False
               ) -> SignalRecord:
    """Low-pass filter (63-tap Hamming FIR, cutoff at 0.8 of the new Nyquist)
    and keep every ``factor``-th sample. ``raw_decimate`` skips the filter."""
    factor = decimation_factor(record.sampling_rate_hz, target_rate_hz)
    if factor == 1:
        return record
    x = record.samples_mv
    n_out = x.shape[1] // factor
    if not raw_decimate and x.shape[1]:
        taps = antialias_taps(record.sampling_rate_hz, target_rate_hz)
        half = len(taps) // 2
        # edge padding keeps constant signals constant at the boundaries
        padded = np.pad(x, ((0, 0), (half, half)), mode="edge")
        x = np.stack([np.convolve(row, taps, mode="valid") for row in padded])
    y = x[:, : n_out * factor : factor]
    header = replace(record.header, sampling_rate_hz=float(target_rate_hz), n_samples=n_out)
    return SignalRecord(header=header, samples_mv=y.copy(), class_label=record.class_label,
                        n_interpolated=record.n_interpolated)


def window(record: SignalRecord, seconds: float | None) -> SignalRecord:
    """Keep the first ``seconds`` of the record (``None`` keeps everything)."""
    if seconds is None:
        return record
    n = int(round(seconds * record.sampling_rate_hz))
    if n >= record.n_samples:
        return record
    header = replace(record.header, n_samples=n)
    return replace(record, header=header, samples_mv=record.samples_mv[:, :n].copy())
