"""Run logs and the delimited artifacts derived from them.

A run log is JSON Lines: a header, one line per generation holding the whole
population, and a closing line with the final elites. Every derived file is
rebuilt from this record alone, which is what makes replay byte-identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pulsega.analysis import TFGrid, husimi, variation_map
from pulsega.engine import RunLog, fitness_stats
from pulsega.field import GeneLayout, GeneString, SpectralField
from pulsega.physics import Landscape, spectrum_counts

LOG_FORMAT = "pulsega-runlog"
LOG_VERSION = 1


class LogError(ValueError):
    """Unreadable, truncated or wrong-version run log."""


def fnum(x) -> str:
    return repr(float(x))


@dataclass
class GenerationRecord:
    generation: int
    ids: list[int]
    fitness: np.ndarray
    phases: np.ndarray
    levels: np.ndarray
    weights: dict[str, float]
    credits: dict[str, int]
    operator_counts: dict[str, int]

    def genomes(self, layout: GeneLayout) -> list[GeneString]:
        return [GeneString(layout, p, l) for p, l in zip(self.phases, self.levels)]

    def to_json(self) -> dict:
        return {
            "generation": self.generation,
            "ids": self.ids,
            "fitness": [float(v) for v in self.fitness],
            "phases": self.phases.tolist(),
            "levels": self.levels.tolist(),
            "weights": self.weights,
            "credits": self.credits,
            "operator_counts": self.operator_counts,
        }

    @classmethod
    def from_json(cls, d: dict, layout: GeneLayout) -> GenerationRecord:
        n = len(d["ids"])
        return cls(
            generation=int(d["generation"]),
            ids=[int(i) for i in d["ids"]],
            fitness=np.array(d["fitness"], dtype=float),
            phases=np.array(d["phases"], dtype=float).reshape(n, layout.num_phase_genes),
            levels=np.array(d["levels"], dtype=int).reshape(n, layout.num_amplitude_genes),
            weights={k: float(v) for k, v in d["weights"].items()},
            credits={k: int(v) for k, v in d["credits"].items()},
            operator_counts={k: int(v) for k, v in d["operator_counts"].items()},
        )


@dataclass
class EliteRecord:
    id: int
    generation: int
    fitness: float
    layout: GeneLayout
    phases: np.ndarray
    levels: np.ndarray

    @property
    def genes(self) -> GeneString:
        return GeneString(self.layout, self.phases, self.levels)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "generation": self.generation,
            "fitness": float(self.fitness),
            "num_components": self.layout.num_components,
            "num_phase_genes": self.layout.num_phase_genes,
            "num_amplitude_genes": self.layout.num_amplitude_genes,
            "num_levels": self.layout.num_levels,
            "phases": [float(v) for v in self.phases],
            "levels": [int(v) for v in self.levels],
        }

    @classmethod
    def from_json(cls, d: dict) -> EliteRecord:
        layout = GeneLayout(int(d["num_components"]), int(d["num_phase_genes"]),
                            int(d["num_amplitude_genes"]), int(d["num_levels"]))
        return cls(int(d["id"]), int(d["generation"]), float(d["fitness"]), layout,
                   np.array(d["phases"], dtype=float), np.array(d["levels"], dtype=int))


@dataclass
class RunRecord:
    config_text: str
    layout: GeneLayout
    generations: list[GenerationRecord]
    elites: list[EliteRecord]

    @classmethod
    def from_runlog(cls, runlog: RunLog, config_text: str) -> RunRecord:
        layout = runlog.config.layout
        gens = []
        for pop, rep in zip(runlog.populations, runlog.reports):
            gens.append(GenerationRecord(
                generation=pop.generation,
                ids=[m.id for m in pop.members],
                fitness=pop.fitness,
                phases=np.stack([m.genes.phases for m in pop.members]),
                levels=np.stack([m.genes.levels for m in pop.members]).reshape(
                    len(pop.members), layout.num_amplitude_genes),
                weights=dict(rep.weights),
                credits=dict(rep.credits),
                operator_counts=dict(rep.operator_counts),
            ))
        elites = [EliteRecord(m.id, m.lineage.birth, m.fitness, layout,
                              m.genes.phases, m.genes.levels) for m in runlog.elites]
        return cls(config_text, layout, gens, elites)


def write_runlog(record: RunRecord, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {"format": LOG_FORMAT, "version": LOG_VERSION, "config": record.config_text,
                  "layout": [record.layout.num_components, record.layout.num_phase_genes,
                             record.layout.num_amplitude_genes, record.layout.num_levels]}
        fh.write(json.dumps(header) + "\n")
        for g in record.generations:
            fh.write(json.dumps(g.to_json()) + "\n")
        fh.write(json.dumps({"end": True, "elites": [e.to_json() for e in record.elites]}) + "\n")


def read_runlog(path) -> RunRecord:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.endswith("\n"):
        raise LogError("run log is truncated (no final newline)")
    lines = text.splitlines()
    try:
        rows = [json.loads(line) for line in lines]
    except json.JSONDecodeError as exc:
        raise LogError(f"run log is corrupt: {exc}") from exc
    if not rows or rows[0].get("format") != LOG_FORMAT:
        raise LogError("not a pulsega run log")
    if rows[0].get("version") != LOG_VERSION:
        raise LogError(f"run log version {rows[0].get('version')!r}, expected {LOG_VERSION}")
    if len(rows) < 3 or not rows[-1].get("end"):
        raise LogError("run log is truncated (missing end record)")
    try:
        layout = GeneLayout(*(int(v) for v in rows[0]["layout"]))
        gens = [GenerationRecord.from_json(r, layout) for r in rows[1:-1]]
        elites = [EliteRecord.from_json(e) for e in rows[-1]["elites"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise LogError(f"run log is malformed: {exc}") from exc
    expected = list(range(len(gens)))
    if [g.generation for g in gens] != expected:
        raise LogError("run log generations are not contiguous from 0")
    return RunRecord(rows[0]["config"], layout, gens, elites)


# -- delimited artifacts -------------------------------------------------

def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def convergence_csv(record: RunRecord) -> str:
    rows = ["generation,best,mean,std"]
    for g in record.generations:
        best, mean, std = fitness_stats(g.fitness)
        rows.append(f"{g.generation},{fnum(best)},{fnum(mean)},{fnum(std)}")
    return "\n".join(rows) + "\n"


def operator_weights_csv(record: RunRecord) -> str:
    names = list(record.generations[0].weights)
    rows = ["generation," + ",".join(names)]
    for g in record.generations:
        rows.append(f"{g.generation}," + ",".join(fnum(g.weights[n]) for n in names))
    return "\n".join(rows) + "\n"


def variation_matrix(record: RunRecord) -> np.ndarray:
    return np.stack([variation_map(g.genomes(record.layout)) for g in record.generations])


def _axis(name: str, axis) -> str:
    fmt = str if np.issubdtype(np.asarray(axis).dtype, np.integer) else fnum
    return f"{name}={fmt(axis[0])}:{fmt(axis[-1])}:{len(axis)}"


def matrix_tsv(header: str, values: np.ndarray) -> str:
    rows = ["# " + header]
    rows += ["\t".join(fnum(v) for v in row) for row in values]
    return "\n".join(rows) + "\n"


def variation_tsv(matrix: np.ndarray) -> str:
    gens = np.arange(matrix.shape[0])
    genes = np.arange(matrix.shape[1])
    return matrix_tsv(f"{_axis('generation', gens)}\t{_axis('gene', genes)}", matrix)


def tfgrid_tsv(grid: TFGrid) -> str:
    """Rows are frequencies, columns times."""
    header = f"{_axis('freq_thz', grid.freq_axis)}\t{_axis('time_fs', grid.time_axis)}"
    return matrix_tsv(header, grid.values)


def read_matrix_tsv(path) -> tuple[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().lstrip("# ").rstrip("\n")
        values = np.loadtxt(fh, delimiter="\t", ndmin=2)
    return header, values


def spectrum_csv(f: SpectralField) -> str:
    rows = ["frequency_thz,counts"]
    rows += [f"{fnum(nu)},{fnum(c)}" for nu, c in zip(f.frequencies, spectrum_counts(f))]
    return "\n".join(rows) + "\n"


def elites_jsonl(elites: list[EliteRecord]) -> str:
    return "".join(json.dumps(e.to_json()) + "\n" for e in elites)


def read_elites(path) -> list[EliteRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(EliteRecord.from_json(json.loads(line)))
    return out


def write_genome_artifacts(genes: GeneString, landscape: Landscape, outdir, spectrum=True,
                           husimi_grid=True, figures=False) -> dict[str, Path]:
    """Spectrum after the medium and Husimi portrait of the shaped pulse."""
    outdir = Path(outdir)
    written = {}
    out_spec = landscape.output_spectrum(genes)
    grid = husimi(landscape.shaped(genes))
    if spectrum:
        written["spectrum"] = outdir / "spectrum.csv"
        _write(written["spectrum"], spectrum_csv(out_spec))
    if husimi_grid:
        written["husimi"] = outdir / "husimi.tsv"
        _write(written["husimi"], tfgrid_tsv(grid))
    if figures:
        from pulsega import figures as figs
        written["husimi_png"] = figs.plot_husimi(grid, outdir / "husimi.png")
        written["spectrum_png"] = figs.plot_spectrum(out_spec, outdir / "spectrum.png")
    return written


def write_artifacts(record: RunRecord, landscape: Landscape, outdir, output) -> dict[str, Path]:
    """Every derived file selected in ``output`` (an ``OutputConfig``)."""
    outdir = Path(outdir)
    os.makedirs(outdir, exist_ok=True)
    written: dict[str, Path] = {}
    if output.convergence:
        written["convergence"] = outdir / "convergence.csv"
        _write(written["convergence"], convergence_csv(record))
    if output.operator_weights:
        written["operator_weights"] = outdir / "operator_weights.csv"
        _write(written["operator_weights"], operator_weights_csv(record))
    vmat = variation_matrix(record) if (output.variation or output.figures) else None
    if output.variation:
        written["variation"] = outdir / "variation.tsv"
        _write(written["variation"], variation_tsv(vmat))
    if output.elites:
        written["elites"] = outdir / "elites.jsonl"
        _write(written["elites"], elites_jsonl(record.elites))
    if record.elites:
        written.update(write_genome_artifacts(record.elites[0].genes, landscape, outdir,
                                              output.spectrum, output.husimi, output.figures))
    if output.figures:
        from pulsega import figures as figs
        best = np.array([fitness_stats(g.fitness)[0] for g in record.generations])
        mean = np.array([fitness_stats(g.fitness)[1] for g in record.generations])
        written["convergence_png"] = figs.plot_convergence(best, mean, outdir / "convergence.png")
        weights = {n: [g.weights[n] for g in record.generations]
                   for n in record.generations[0].weights}
        written["operator_weights_png"] = figs.plot_operator_weights(
            weights, outdir / "operator_weights.png")
        written["variation_png"] = figs.plot_variation(
            vmat, record.layout.num_phase_genes, outdir / "variation.png")
    return written
