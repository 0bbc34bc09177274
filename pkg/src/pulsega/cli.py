"""Command line entry point: ``pulsega run | analyze | replay``.

Exit codes: 0 success, 2 bad configuration or genome, 3 filesystem
failure, 4 unreadable or incompatible run log.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from pulsega.config import RunConfig, load_config, parse_config, serialize_config
from pulsega.engine import ConfigError, run
from pulsega.field import InvalidGenomeError
from pulsega.records import (
    LogError,
    RunRecord,
    read_elites,
    read_runlog,
    write_artifacts,
    write_genome_artifacts,
    write_runlog,
)

log = logging.getLogger("pulsega")

EXIT_OK, EXIT_CONFIG, EXIT_FS, EXIT_LOG = 0, 2, 3, 4


def evaluation_threads() -> int:
    """Worker count for fitness evaluation, capped by ``PULSE_THREADS``."""
    n = os.cpu_count() or 1
    cap = os.environ.get("PULSE_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer PULSE_THREADS=%r", cap)
    return n


def _read_config(path) -> RunConfig:
    try:
        return load_config(path)
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc


def cmd_run(config_path, seed: int | None = None, out: str | None = None) -> int:
    cfg = _read_config(config_path)
    if seed is not None:
        cfg = replace(cfg, engine=replace(cfg.engine, seed=seed))
    if out is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=out))
    cfg.validate()
    outdir = Path(cfg.output.directory)
    os.makedirs(outdir, exist_ok=True)

    landscape = cfg.landscape.build(cfg.engine.layout.num_components)
    engine_cfg = replace(cfg.engine, threads=evaluation_threads())

    def progress(pop, report):
        log.info("generation %d  best %.6g  mean %.6g", report.generation, report.best,
                 report.mean)

    runlog = run(engine_cfg, landscape, on_generation=progress)
    text = serialize_config(cfg)
    record = RunRecord.from_runlog(runlog, text)
    with open(outdir / "config.ini", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    write_runlog(record, outdir / "runlog.jsonl")
    written = write_artifacts(record, landscape, outdir, cfg.output)
    log.info("wrote %s", ", ".join(sorted(p.name for p in written.values())))
    return EXIT_OK


def cmd_analyze(genome_path, config_path, out: str | None = None, index: int = 0) -> int:
    cfg = _read_config(config_path)
    try:
        elites = read_elites(genome_path)
        record = elites[index]
    except FileNotFoundError as exc:
        raise ConfigError("genome", f"cannot read {genome_path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError("genome", f"unparsable genome record: {exc}") from exc
    if record.layout.num_components != cfg.engine.layout.num_components:
        raise ConfigError("genome", "genome grid does not match the configured carrier")
    landscape = cfg.landscape.build(record.layout.num_components)
    outdir = Path(out or cfg.output.directory)
    os.makedirs(outdir, exist_ok=True)
    written = write_genome_artifacts(record.genes, landscape, outdir, figures=cfg.output.figures)
    log.info("wrote %s", ", ".join(sorted(p.name for p in written.values())))
    return EXIT_OK


def cmd_replay(runlog_path, out: str | None = None) -> int:
    record = read_runlog(runlog_path)
    try:
        cfg = parse_config(record.config_text)
    except ConfigError as exc:
        raise LogError(f"embedded config is invalid: {exc}") from exc
    outdir = Path(out) if out else Path(runlog_path).parent
    os.makedirs(outdir, exist_ok=True)
    landscape = cfg.landscape.build(record.layout.num_components)
    written = write_artifacts(record, landscape, outdir, cfg.output)
    log.info("wrote %s", ", ".join(sorted(p.name for p in written.values())))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulsega",
                                description="Adaptive GA pulse shaping on simulated landscapes")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an optimisation and write its artifacts")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="override the configured seed")
    r.add_argument("--out", help="override the output directory")

    a = sub.add_parser("analyze", help="Husimi portrait and spectrum of one genome")
    a.add_argument("genome", help="elite records (JSON lines)")
    a.add_argument("--config", required=True, help="run config defining the carrier")
    a.add_argument("--index", type=int, default=0, help="record to analyse (default: best)")
    a.add_argument("--out")

    y = sub.add_parser("replay", help="regenerate derived artifacts from a run log")
    y.add_argument("runlog")
    y.add_argument("--out")

    for s in (r, a, y):
        s.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.seed, args.out)
        if args.command == "analyze":
            return cmd_analyze(args.genome, args.config, args.out, args.index)
        return cmd_replay(args.runlog, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidGenomeError as exc:
        print(f"error: invalid genome: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FS


if __name__ == "__main__":
    sys.exit(main())
