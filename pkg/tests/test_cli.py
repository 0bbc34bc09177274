import json
from pathlib import Path

import numpy as np
import pytest

from pulsega.analysis import husimi
from pulsega.cli import EXIT_CONFIG, EXIT_FS, EXIT_LOG, EXIT_OK, evaluation_threads, main
from pulsega.config import load_config
from pulsega.field import GeneLayout
from pulsega.records import (
    EliteRecord,
    LogError,
    read_elites,
    read_matrix_tsv,
    read_runlog,
)

SHIPPED = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[engine]
population_size = 16
generations = 6
seed = 5

[genome]
num_components = 64
num_phase_genes = 20
num_amplitude_genes = 8

[landscape]
name = shg
"""

DERIVED = ["convergence.csv", "operator_weights.csv", "variation.tsv", "elites.jsonl",
           "spectrum.csv", "husimi.tsv"]
FIGURES = ["convergence.png", "operator_weights.png", "variation.png", "spectrum.png",
           "husimi.png"]


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write(root / "small.ini", SMALL)
    out = root / "run"
    assert main(["--quiet", "run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    return cfg, out


@pytest.fixture(scope="module")
def shg_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("shg") / "out"
    code = main(["--quiet", "run", "--config", str(SHIPPED / "shg_max.ini"), "--out", str(out)])
    assert code == EXIT_OK
    return out


def test_run_writes_every_artifact(small_run):
    _, out = small_run
    for name in DERIVED + FIGURES + ["runlog.jsonl", "config.ini"]:
        assert (out / name).stat().st_size > 0, name


def test_convergence_has_one_row_per_generation(small_run):
    _, out = small_run
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "generation,best,mean,std"
    assert len(lines) == 1 + 7
    best = [float(l.split(",")[1]) for l in lines[1:]]
    assert best == sorted(best)


def test_delimited_formats(small_run):
    _, out = small_run
    raw = (out / "variation.tsv").read_bytes()
    assert b"\r" not in raw
    header, matrix = read_matrix_tsv(out / "variation.tsv")
    assert header == "generation=0:6:7\tgene=0:27:28"
    assert matrix.shape == (7, 28)
    header, q = read_matrix_tsv(out / "husimi.tsv")
    assert header.startswith("freq_thz=") and "\ttime_fs=" in header
    assert q.shape == (127, 64)
    spec = (out / "spectrum.csv").read_text().splitlines()
    assert spec[0] == "frequency_thz,counts" and len(spec) == 65
    weights = (out / "operator_weights.csv").read_text().splitlines()
    assert weights[0].split(",")[0] == "generation" and len(weights) == 8
    for row in weights[1:]:
        assert sum(float(v) for v in row.split(",")[1:]) == pytest.approx(1.0, abs=1e-12)


def test_same_seed_reproduces_every_file(small_run, tmp_path):
    cfg, out = small_run
    again = tmp_path / "again"
    assert main(["--quiet", "run", "--config", str(cfg), "--out", str(again)]) == EXIT_OK
    for name in DERIVED + FIGURES:
        assert (again / name).read_bytes() == (out / name).read_bytes(), name
    # the log header records the output directory; everything after it matches
    a = (again / "runlog.jsonl").read_text().splitlines()
    b = (out / "runlog.jsonl").read_text().splitlines()
    assert a[1:] == b[1:]


def test_seed_flag_overrides_config(small_run, tmp_path):
    cfg, out = small_run
    other = tmp_path / "other"
    assert main(["--quiet", "run", "--config", str(cfg), "--seed", "6", "--out",
                 str(other)]) == EXIT_OK
    assert (other / "convergence.csv").read_bytes() != (out / "convergence.csv").read_bytes()
    assert "seed = 6" in (other / "config.ini").read_text()


def test_replay_reproduces_artifacts_elsewhere(small_run, tmp_path):
    _, out = small_run
    before = {n: (out / n).read_bytes() for n in DERIVED + FIGURES}
    dest = tmp_path / "replayed"
    assert main(["--quiet", "replay", str(out / "runlog.jsonl"), "--out", str(dest)]) == EXIT_OK
    for name in DERIVED + FIGURES:
        assert (dest / name).read_bytes() == before[name], name
        assert (out / name).read_bytes() == before[name]


def test_replay_rejects_truncated_log(small_run, tmp_path):
    _, out = small_run
    text = (out / "runlog.jsonl").read_text()
    cut = write(tmp_path / "cut.jsonl", text[: len(text) // 2])
    assert main(["--quiet", "replay", str(cut), "--out", str(tmp_path / "x")]) == EXIT_LOG
    lines = text.splitlines(keepends=True)
    no_end = write(tmp_path / "noend.jsonl", "".join(lines[:-1]))
    assert main(["--quiet", "replay", str(no_end), "--out", str(tmp_path / "y")]) == EXIT_LOG
    gap = write(tmp_path / "gap.jsonl", "".join(lines[:2] + lines[3:]))
    with pytest.raises(LogError):
        read_runlog(gap)


def test_replay_rejects_other_versions(small_run, tmp_path):
    _, out = small_run
    lines = (out / "runlog.jsonl").read_text().splitlines(keepends=True)
    header = json.loads(lines[0])
    header["version"] = 99
    bad = write(tmp_path / "v99.jsonl", json.dumps(header) + "\n" + "".join(lines[1:]))
    assert main(["--quiet", "replay", str(bad), "--out", str(tmp_path / "x")]) == EXIT_LOG
    junk = write(tmp_path / "junk.jsonl", "not json\n")
    assert main(["--quiet", "replay", str(junk)]) == EXIT_LOG


def test_runlog_round_trip(small_run):
    _, out = small_run
    record = read_runlog(out / "runlog.jsonl")
    assert [g.generation for g in record.generations] == list(range(7))
    assert record.layout == GeneLayout(64, 20, 8)
    elites = read_elites(out / "elites.jsonl")
    assert [e.id for e in elites] == [e.id for e in record.elites]
    assert elites[0].fitness == max(record.generations[-1].fitness)


def test_missing_landscape_name_exits_2(tmp_path, capsys):
    cfg = write(tmp_path / "bad.ini", "[landscape]\ngoal = maximize\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "landscape.name" in capsys.readouterr().err


def test_unreadable_config_exits_2(tmp_path):
    assert main(["--quiet", "run", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG


def test_output_path_blocked_by_file_exits_3(tmp_path):
    cfg = write(tmp_path / "small.ini", SMALL)
    blocker = write(tmp_path / "blocker", "")
    code = main(["--quiet", "run", "--config", str(cfg), "--out", str(blocker / "sub")])
    assert code == EXIT_FS


def test_analyze_flat_genome_peaks_at_centre(small_run, tmp_path):
    cfg, _ = small_run
    layout = GeneLayout(64, 20, 8)
    flat = layout.flat()
    rec = EliteRecord(0, 0, 0.0, layout, flat.phases, flat.levels)
    genome = write(tmp_path / "flat.jsonl", json.dumps(rec.to_json()) + "\n")
    out = tmp_path / "a"
    assert main(["--quiet", "analyze", str(genome), "--config", str(cfg), "--out",
                 str(out)]) == EXIT_OK
    header, q = read_matrix_tsv(out / "husimi.tsv")
    times = np.linspace(*map(float, header.split("time_fs=")[1].split(":")[:2]), q.shape[1])
    r, k = np.unravel_index(np.argmax(q), q.shape)
    assert times[k] == 0.0
    # single lobe: the time profile falls off monotonically on both sides of the peak
    profile = q[r]
    lobe = np.nonzero(profile > 1e-6 * profile.max())[0]
    assert np.all(np.diff(lobe) == 1)
    assert np.all(np.diff(profile[lobe[0]: k + 1]) > 0)
    assert np.all(np.diff(profile[k: lobe[-1] + 1]) < 0)
    first = {n: (out / n).read_bytes() for n in ("husimi.tsv", "spectrum.csv")}
    assert main(["--quiet", "analyze", str(genome), "--config", str(cfg), "--out",
                 str(out)]) == EXIT_OK
    for n, data in first.items():
        assert (out / n).read_bytes() == data


def test_analyze_rejects_garbage(small_run, tmp_path):
    cfg, _ = small_run
    bad = write(tmp_path / "bad.jsonl", '{"phases": [1, 2]}\n')
    assert main(["--quiet", "analyze", str(bad), "--config", str(cfg)]) == EXIT_CONFIG
    wrong = EliteRecord(0, 0, 0.0, GeneLayout(), GeneLayout().flat().phases,
                        GeneLayout().flat().levels)
    other = write(tmp_path / "m128.jsonl", json.dumps(wrong.to_json()) + "\n")
    assert main(["--quiet", "analyze", str(other), "--config", str(cfg)]) == EXIT_CONFIG
    rec = wrong.to_json()
    rec["phases"][0] = 7.0
    out_of_range = write(tmp_path / "range.jsonl", json.dumps(rec) + "\n")
    assert main(["--quiet", "analyze", str(out_of_range), "--config", str(cfg)]) == EXIT_CONFIG


def test_elite_of_shg_run_looks_like_flat_phase(shg_run):
    _, q = read_matrix_tsv(shg_run / "husimi.tsv")
    cfg = load_config(SHIPPED / "shg_max.ini")
    ref = husimi(cfg.landscape.carrier(128)).values
    q, ref = q / q.sum(), ref / ref.sum()
    # the landscape ignores delay, so align in time before comparing
    dist = min(np.abs(np.roll(q, s, axis=1) - ref).sum() for s in range(q.shape[1]))
    assert dist < 0.15
    best = float((shg_run / "convergence.csv").read_text().splitlines()[-1].split(",")[1])
    assert best >= 0.95 * cfg.landscape.build(128)(GeneLayout().flat())


def test_thread_cap_from_environment(monkeypatch):
    monkeypatch.setenv("PULSE_THREADS", "1")
    assert evaluation_threads() == 1
    monkeypatch.setenv("PULSE_THREADS", "lots")
    assert evaluation_threads() >= 1
