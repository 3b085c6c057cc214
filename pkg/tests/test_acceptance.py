"""Acceptance checks 1-9, each printing one PASS/FAIL line.

    pytest tests/test_acceptance.py -v -s

Check 7 runs the full synthetic pipeline twice (about 15 minutes per run on
one core). Check 8 needs real PTB files: set ECG_PTB_DIR to a directory
holding the ``.hea``/``.dat``/``.xyz`` records.
"""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ecg_recurrence import cli, ingest, rqa, stats
from ecg_recurrence import dynamics as dyn
from ecg_recurrence.neural import ssim
from gradchecks import CHECKS
from oracles import brute_rank_sum_p, naive_distances, naive_rqa

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return report


def _close(a, b, rel=1e-12):
    if b is None:
        return math.isnan(a)
    return a == b or abs(a - b) <= rel * abs(b)


def test_1_rqa_oracle(verdict):
    r = np.random.default_rng(1)
    start = time.perf_counter()
    bad = []
    for i in range(200):
        k = int(r.integers(5, 61))
        bits = r.uniform(size=(k, k)) < r.uniform(0.05, 0.95)
        got = rqa.compute_rqa(bits).vector()
        want = naive_rqa(bits)
        bad += [(i, name) for name, g, e in zip(rqa.FEATURE_NAMES, got, want) if not _close(g, e)]
    elapsed = time.perf_counter() - start
    verdict(1, not bad and elapsed < 10,
            f"200 matrices, {len(bad)} mismatching features, {elapsed:.2f} s")


def test_2_recurrence_matrix(verdict):
    r = np.random.default_rng(2)
    worst, ok = 0.0, True
    for k in list(range(2, 101, 7)) + [100]:
        s = r.standard_normal((k, int(r.integers(1, 6))))
        dm = dyn.distance_matrix(s)
        ref = naive_distances(s)
        ok &= bool(np.array_equal(dm, dm.T) and np.all(np.diag(dm) == 0))
        nz = ref > 0
        worst = max(worst, float(np.max(np.abs(dm[nz] - ref[nz]) / ref[nz], initial=0)))
    dm = dyn.distance_matrix(r.standard_normal((60, 3)))
    eps = np.quantile(dm[dm > 0], [0.05, 0.2, 0.4, 0.6, 0.8])
    plots = [dyn.threshold(dm, e).bits for e in eps]
    mono = all(np.all(b | ~a) for a, b in zip(plots, plots[1:]))
    verdict(2, ok and worst <= 1e-12 and mono,
            f"symmetric/zero diagonal {ok}, worst relative error {worst:.1e}, monotone {mono}")


def test_3_embedding_law(verdict):
    r = np.random.default_rng(3)
    law = 0
    for _ in range(1000):
        m, tau = int(r.integers(1, 11)), int(r.integers(1, 30))
        n = (m - 1) * tau + int(r.integers(2, 300))
        law += dyn.embed(np.arange(n, dtype=float), m, tau).shape == (n - (m - 1) * tau, m)
    t = np.arange(4000)
    m_sine = dyn.cao_dimension(np.sin(2 * np.pi * t / 40), tau=10, m_max=8).m
    e2_dev = max(float(np.max(np.abs(dyn.cao_statistics(
        np.random.default_rng(s).uniform(size=2000), tau=1, m_max=6)[1] - 1))) for s in range(20))
    verdict(3, law == 1000 and abs(m_sine - 2) <= 1 and e2_dev < 0.1,
            f"shape law {law}/1000, sine m={m_sine}, max |E2-1| over 20 noise seeds {e2_dev:.3f}")


def test_4_gradient_checks(verdict):
    start = time.perf_counter()
    worst = {name: max(check(seed) for seed in range(50)) for name, check in CHECKS.items()}
    elapsed = time.perf_counter() - start
    name = max(worst, key=worst.get)
    verdict(4, worst[name] < 1e-4 and elapsed < 60,
            f"{len(CHECKS)} kernels x 50 seeds, worst {name} {worst[name]:.1e}, {elapsed:.1f} s")


def test_5_mssim(verdict):
    r = np.random.default_rng(5)
    ident = sym = 0.0
    for _ in range(20):
        x, y = r.uniform(size=(2, 32, 32)), r.uniform(size=(2, 32, 32))
        ident = max(ident, abs(ssim.mssim(x, x) - 1))
        sym = max(sym, abs(ssim.mssim(x, y) - ssim.mssim(y, x)))
    c1 = 0.01 ** 2
    a, b = np.full((16, 16), 0.2), np.full((16, 16), 0.9)
    expected = (2 * 0.2 * 0.9 + c1) / (0.2 ** 2 + 0.9 ** 2 + c1)  # contrast term is c2/c2
    const = abs(ssim.mssim(a, b) - expected)
    verdict(5, ident <= 1e-12 and sym <= 1e-12 and const <= 1e-9,
            f"|mssim(x,x)-1| {ident:.1e}, asymmetry {sym:.1e}, constant patch error {const:.1e}")


def test_6_wilcoxon_exact(verdict):
    r = np.random.default_rng(6)
    pairs = mismatches = 0
    for n1 in range(1, 10):
        for n2 in range(1, 11 - n1):
            pairs += 1
            samples = [np.arange(n1 + n2, dtype=float)]
            samples += [r.integers(0, 4, n1 + n2).astype(float) for _ in range(3)]
            for z in samples:
                z = r.permutation(z)
                a, b = z[:n1], z[n1:]
                if np.all(z == z[0]):
                    continue
                mismatches += stats.exact_p_value(a, b)[1] != brute_rank_sum_p(a, b)
    p = stats.rank_sum_test([1, 2], [3, 4]).p_two_sided
    verdict(6, mismatches == 0 and p == pytest.approx(1 / 3, abs=1e-15),
            f"{pairs} size pairs, {mismatches} mismatches, p({{1,2}} vs {{3,4}}) = {p!r}")


@pytest.mark.slow
def test_7_synthetic_end_to_end(verdict, tmp_path):
    script = ROOT / "scripts" / "run_synthetic.py"
    summaries = []
    for run in ("a", "b"):
        subprocess.run([sys.executable, str(script), "--out", str(tmp_path / run), "--seed", "0",
                        "--n-per-class", "10"], check=True, cwd=ROOT)
        summaries.append(json.loads((tmp_path / run / "summary.json").read_text()))
    a, b = summaries
    same = (a["report_sha256"] == b["report_sha256"]
            and a["cnn_accuracy"] == b["cnn_accuracy"]
            and a["stacked_accuracy"] == b["stacked_accuracy"])
    slowest = max(a["seconds_total"], b["seconds_total"])
    ok = (a["cnn_accuracy"] >= 0.9 and a["stacked_accuracy"] >= 0.8 and same
          and slowest < 1800 and not a["manifest_mismatches"])
    verdict(7, ok, f"cnn {100 * a['cnn_accuracy']:.0f}%, stacked {100 * a['stacked_accuracy']:.0f}%, "
                   f"identical runs {same}, slowest run {slowest:.0f} s")


def _ptb_manifest(ptb_dir: Path, out: Path) -> Path:
    rows = []
    for hea in sorted(ptb_dir.rglob("*.hea")):
        label = ingest.label_from_comments(ingest.parse_header(hea.read_text()))
        if label is not None:
            rows.append((hea, label))
    path = out / "ptb_manifest.csv"
    ingest.write_manifest(path, rows)
    return path


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("ECG_PTB_DIR"), reason="set ECG_PTB_DIR to the PTB records")
def test_8_ptb_smoke(verdict, tmp_path):
    manifest = _ptb_manifest(Path(os.environ["ECG_PTB_DIR"]), tmp_path)
    run = tmp_path / "run"
    common = ["--manifest", str(manifest), "--out", str(run), "--window-seconds", "8",
              "--epochs", "2", "--cnn-epochs", "5"]
    codes = {s: cli.main([s, *common]) for s in ["ingest", "embed-params", "rp", "train-ae",
                                                 "encode", "rqa", "stats", "train-clf", "evaluate"]}
    labels = [lab for _, lab in ingest.read_manifest(manifest)]
    counts = {c.value: labels.count(c) for c in ingest.CLASS_ORDER}
    recs = len(labels)
    pngs = len(list((run / "rp").glob("*.png")))
    lines = (run / "stats" / "significance.csv").read_text().strip().splitlines()
    cells = sum(len(line.split(",")) - 1 for line in lines[1:])
    report = (run / "reports" / "cnn_report.txt").read_text()
    ok = (all(c == 0 for c in codes.values())
          and counts == {"HC": 62, "MI": 60, "BBB": 19, "CM": 15, "DR": 14}
          and pngs == 15 * recs and cells == 100 and "Accuracy" in report)
    verdict(8, ok, f"exit codes {set(codes.values())}, counts {counts}, {pngs} PNGs for {recs} "
                   f"records, {cells} significance cells")


def test_9_wfdb_round_trip(verdict, tmp_path):
    r = np.random.default_rng(9)
    leads = ["i", "ii", "iii", "avr", "avl", "avf", "v1", "v2", "v3", "v4", "v5", "v6",
             "vx", "vy", "vz"]
    h = ingest.make_header("rt", leads, 1000.0, 700)
    adu = r.integers(-32767, 32768, size=(15, 700)).astype(np.int32)
    hea = ingest.write_record(tmp_path, h, adu)
    rec = ingest.load_record(hea)
    files = {f: (tmp_path / f).read_bytes() for f in {c.file_name for c in h.channels}}
    identical = (rec.header == h and np.array_equal(ingest.decode_adu(h, files), adu)
                 and np.array_equal(rec.samples_mv, adu / 2000.0))
    one = ingest.make_header("r", ["i"], 1000.0, 1, gain=2000.0)
    mv = ingest.read_signals(one, np.array([32767], "<i2").tobytes()).samples_mv[0, 0]
    verdict(9, identical and abs(mv - 16.3835) <= 1e-12,
            f"round trip bit-identical {identical}, raw 32767 at gain 2000 -> {float(mv)!r} mV")
