"""INI run configuration: parsing, validation and a lossless writer."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from pulsega.engine import ConfigError, EngineConfig
from pulsega.field import GeneLayout, SpectralField, gaussian_spectrum
from pulsega.operators import OPERATORS, OperatorParams
from pulsega.physics import Landscape, ShgLandscape, SpmMedium, StokesGoal, StokesLandscape

LANDSCAPES = ("shg", "stokes")


@dataclass(frozen=True)
class LandscapeConfig:
    name: str = ""
    goal: str = "maximize"
    b_integral: float = 0.0
    phase_only: bool = True
    carrier_fwhm_bins: float | None = None
    carrier_fwhm_thz: float = 4.41
    center_thz: float = 379.5
    band_low: int = 0
    band_high: int = 0
    weight: int = 2
    max_phase_step: float | None = None

    def carrier(self, num_components: int) -> SpectralField:
        return gaussian_spectrum(num_components, self.carrier_fwhm_bins,
                                 self.center_thz, self.carrier_fwhm_thz)

    def build(self, num_components: int) -> Landscape:
        carrier = self.carrier(num_components)
        common = dict(medium=SpmMedium(self.b_integral), phase_only=self.phase_only,
                      max_phase_step=self.max_phase_step)
        if self.name == "shg":
            return ShgLandscape(carrier, self.goal, **common)
        if self.name == "stokes":
            goal = StokesGoal(self.band_low, self.band_high, self.weight, num_components)
            return StokesLandscape(carrier, goal, **common)
        raise ConfigError("landscape.name", f"unknown landscape {self.name!r}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    convergence: bool = True
    operator_weights: bool = True
    variation: bool = True
    elites: bool = True
    spectrum: bool = True
    husimi: bool = True
    figures: bool = True


@dataclass(frozen=True)
class RunConfig:
    engine: EngineConfig = EngineConfig()
    landscape: LandscapeConfig = LandscapeConfig()
    output: OutputConfig = OutputConfig()

    def validate(self) -> RunConfig:
        try:
            self.engine.validate()
        except ConfigError as exc:
            raise ConfigError(f"engine.{exc.field}", str(exc).split(": ", 1)[1]) from exc
        lc = self.landscape
        if lc.name not in LANDSCAPES:
            raise ConfigError("landscape.name",
                              f"expected one of {', '.join(LANDSCAPES)}, got {lc.name!r}")
        if lc.goal not in ("maximize", "minimize"):
            raise ConfigError("landscape.goal", "must be maximize or minimize")
        try:
            lc.build(self.engine.layout.num_components)
        except ValueError as exc:
            raise ConfigError("landscape", str(exc)) from exc
        return self


_ENGINE_KEYS = ("population_size", "elite_count", "generations", "seed", "operators",
                "operator_weights", "min_operator_weight", "base_fraction", "credit_horizon",
                "adapt_after", "credit_mode", "noise_sigma")
_PARAM_KEYS = tuple(f.name for f in fields(OperatorParams))
_GENOME_KEYS = tuple(f.name for f in fields(GeneLayout))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(v)
    if isinstance(v, dict):
        return ", ".join(f"{k}:{_fmt(float(w))}" for k, w in v.items())
    return str(v)


def _convert(section: str, key: str, raw: str, default):
    raw = raw.strip()
    where = f"{section}.{key}"
    try:
        if section == "engine" and key == "operators":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if section == "engine" and key == "operator_weights":
            if not raw:
                return None
            out = {}
            for item in raw.split(","):
                name, _, w = item.partition(":")
                out[name.strip()] = float(w)
            return out
        if key in ("carrier_fwhm_bins", "max_phase_step"):
            return float(raw) if raw else None
        if isinstance(default, bool):
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("must be finite")
            return v
        return raw
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from exc


def _section(cp: configparser.ConfigParser, name: str, allowed, defaults: dict) -> dict:
    if not cp.has_section(name):
        return {}
    out = {}
    for key, raw in cp.items(name):
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "unknown key")
        out[key] = _convert(name, key, raw, defaults[key])
    return out


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from exc
    for s in cp.sections():
        if s not in ("engine", "genome", "landscape", "output"):
            raise ConfigError(s, "unknown section")
    if not cp.has_section("landscape"):
        raise ConfigError("landscape", "section is required")

    e_def = EngineConfig()
    engine_defaults = {k: getattr(e_def, k) for k in _ENGINE_KEYS}
    engine_defaults.update({k: getattr(e_def.params, k) for k in _PARAM_KEYS})
    engine_vals = _section(cp, "engine", engine_defaults, engine_defaults)
    params = replace(e_def.params, **{k: engine_vals.pop(k) for k in _PARAM_KEYS
                                      if k in engine_vals})

    g_def = GeneLayout()
    genome_defaults = {k: getattr(g_def, k) for k in _GENOME_KEYS}
    genome_defaults["max_phase_step"] = None
    genome_vals = _section(cp, "genome", genome_defaults, genome_defaults)
    max_step = genome_vals.pop("max_phase_step", None)
    try:
        layout = GeneLayout(**genome_vals)
    except ValueError as exc:
        raise ConfigError("genome", str(exc)) from exc

    l_def = LandscapeConfig()
    l_defaults = {f.name: getattr(l_def, f.name) for f in fields(LandscapeConfig)
                  if f.name != "max_phase_step"}
    l_vals = _section(cp, "landscape", l_defaults, l_defaults)
    if not l_vals.get("name"):
        raise ConfigError("landscape.name", "is required")
    landscape = replace(l_def, max_phase_step=max_step, **l_vals)

    o_def = OutputConfig()
    o_defaults = {f.name: getattr(o_def, f.name) for f in fields(OutputConfig)}
    output = replace(o_def, **_section(cp, "output", o_defaults, o_defaults))

    engine = replace(e_def, layout=layout, params=params, **engine_vals)
    return RunConfig(engine, landscape, output).validate()


def serialize_config(cfg: RunConfig) -> str:
    e = cfg.engine
    lines = ["[engine]"]
    for k in _ENGINE_KEYS:
        lines.append(f"{k} = {_fmt(getattr(e, k))}")
    for k in _PARAM_KEYS:
        lines.append(f"{k} = {_fmt(getattr(e.params, k))}")
    lines += ["", "[genome]"]
    for k in _GENOME_KEYS:
        lines.append(f"{k} = {_fmt(getattr(e.layout, k))}")
    lines.append(f"max_phase_step = {_fmt(cfg.landscape.max_phase_step)}")
    lines += ["", "[landscape]"]
    for f in fields(LandscapeConfig):
        if f.name != "max_phase_step":
            lines.append(f"{f.name} = {_fmt(getattr(cfg.landscape, f.name))}")
    lines += ["", "[output]"]
    for f in fields(OutputConfig):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.output, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
