"""CLI and stage plumbing on a tiny synthetic set (64 px, a few epochs)."""

import csv
import json
import shutil

import numpy as np
import pytest
from PIL import Image

from ecg_recurrence import cli, pipeline
from ecg_recurrence.config import load_config

STAGES = ["ingest", "embed-params", "rp", "train-ae", "encode", "rqa", "stats",
          "train-clf", "evaluate", "export-embeddings"]


def _args(root, run="run"):
    return ["--manifest", str(root / "data" / "manifest.csv"), "--out", str(root / run),
            "--image-size", "64", "--epochs", "2", "--cnn-epochs", "5", "--workers", "1",
            "--seed", "3"]


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--out", str(root / "data"), "--n-per-class", "4",
                     "--seconds", "2"]) == 0
    for s in STAGES:
        assert cli.main([s, *_args(root)]) == 0, s
    for s in ["train-clf", "evaluate"]:
        assert cli.main([s, *_args(root), "--classifier", "stacked"]) == 0
    return root


def _manifest(run_dir):
    return json.loads((run_dir / pipeline.MANIFEST_NAME).read_text())


def test_outputs_per_record(tiny):
    run = tiny / "run"
    pngs = sorted((run / "rp").glob("*.png"))
    assert len(pngs) == 20 * 15
    with Image.open(pngs[0]) as im:
        assert im.size == (64, 64) and im.mode == "L"
    rows = list(csv.DictReader(open(run / "ingest" / "split.csv")))
    assert sum(r["split"] == "test" for r in rows) == 5  # one per class at 0.2 of 4
    latent = list(csv.DictReader(open(run / "latent" / "latent_maps.csv")))
    assert len(latent) == 20


def test_significance_table_has_100_cells(tiny):
    lines = (tiny / "run" / "stats" / "significance.csv").read_text().strip().splitlines()
    cells = [c for line in lines[1:] for c in line.split(",")[1:]]
    assert len(cells) == 100


def test_reports_written(tiny):
    rep = tiny / "run" / "reports"
    for kind in ("cnn", "stacked"):
        text = (rep / f"{kind}_report.txt").read_text()
        for c in ("HC", "MI", "BBB", "CM", "DR", "Accuracy"):
            assert c in text
        conf = np.loadtxt(rep / f"{kind}_confusion.csv", delimiter=",", skiprows=1,
                          usecols=range(1, 6))
        assert conf.sum() == 5 and (conf.sum(axis=1) == 1).all()


def test_manifest_lists_every_file_and_verifies(tiny):
    run = tiny / "run"
    man = pipeline.RunManifest(run)
    on_disk = {p.relative_to(run).as_posix() for p in run.rglob("*")
               if p.is_file() and p.name != pipeline.MANIFEST_NAME}
    assert on_disk == set(man.files)
    assert man.verify() == []
    expected = (set(STAGES) - {"train-clf", "evaluate"}) | {"train-clf-cnn", "evaluate-stacked"}
    assert expected <= set(man.stages)


def test_rerun_is_byte_identical(tiny, capsys):
    before = _manifest(tiny / "run")["files"]
    for s in ["rp", "train-ae", "encode", "rqa"]:
        assert cli.main([s, *_args(tiny)]) == 0
    out = capsys.readouterr().out
    assert "changed since last run" not in out
    assert _manifest(tiny / "run")["files"] == before


def test_tampered_file_detected(tiny, tmp_path):
    run = tmp_path / "copy"
    shutil.copytree(tiny / "run", run)
    target = run / "rqa" / "features.csv"
    target.write_text(target.read_text() + "\n")
    assert pipeline.RunManifest(run).verify() == ["rqa/features.csv"]


def test_missing_artifact_names_producer(tiny, capsys):
    assert cli.main(["encode", *_args(tiny, "fresh")]) == 3
    err = capsys.readouterr().err
    assert "MissingArtifactError" in err and "`train-ae`" in err


def test_config_error_exit_code(tiny, capsys):
    assert cli.main(["ingest", *_args(tiny, "bad"), "--image-size", "100"]) == 2
    assert "recurrence.image_size" in capsys.readouterr().err


def test_unknown_config_key_exit_code(tiny, tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[rqa]\nlmin = 2\nbogus = 1\n")
    assert cli.main(["ingest", *_args(tiny, "bad"), "--config", str(ini)]) == 2


def test_divergence_exit_code(tiny, tmp_path, capsys):
    run = tmp_path / "div"
    shutil.copytree(tiny / "run", run)
    args = _args(tiny) + ["--out", str(run), "--lr", "1e30"]
    with np.errstate(all="ignore"):
        assert cli.main(["train-ae", *args]) == 4
    assert "DivergenceError" in capsys.readouterr().err


def test_config_file_and_flags(tiny, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[rqa]\nlmin = 3\n[recurrence]\nimage_size = 128\n")
    args = cli.build_parser().parse_args(["rqa", "--config", str(ini), "--image-size", "64"])
    cfg = cli.config_from_args(args)
    assert cfg.rqa.lmin == 3 and cfg.recurrence.image_size == 64
    # the archived config re-creates the run
    archived = load_config(tiny / "run" / "configs" / "ingest.ini")
    assert archived.recurrence.image_size == 64 and archived.seed == 3


def test_pinned_embedding_flags(tiny):
    args = cli.build_parser().parse_args(["embed-params", "--dim", "3", "--tau", "5"])
    cfg = cli.config_from_args(args)
    assert not cfg.embedding.auto and (cfg.embedding.dim, cfg.embedding.tau) == (3, 5)


def test_checkpoint_flag(tiny, tmp_path):
    ck = tmp_path / "ae.rqae"
    run = tmp_path / "ck"
    shutil.copytree(tiny / "run", run)
    args = _args(tiny) + ["--out", str(run), "--checkpoint", str(ck)]
    assert cli.main(["train-ae", *args]) == 0
    assert ck.read_bytes() == (tiny / "run" / "models" / "autoencoder.rqae").read_bytes()
    assert cli.main(["encode", *args]) == 0


def test_synth_subcommand(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path), "--n-per-class", "4",
                     "--seconds", "1"]) == 0
    rows = list(csv.reader(open(tmp_path / "manifest.csv")))
    assert len(rows) == 1 + 20
    assert cli.main(["synth", "--out", str(tmp_path), "--n-per-class", "2"]) == 2
