"""Mating operators acting on gene strings.

Every operator is a pure function of its parents and a numpy ``Generator``.
Windowed operators draw two cut points ``0 <= j < k <= M`` on the shaper's
component axis and act on the genes whose anchor (phase) or block start
(amplitude) falls in ``[j, k)``; passing ``window=(j, k)`` pins the cuts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from pulsega.field import (
    TWO_PI,
    GeneString,
    SpectralField,
    apply_mask,
    decode,
    to_frequency,
    to_time,
    wrap_phase,
)


class IncompatibleParentsError(ValueError):
    pass


class InsufficientGenesError(ValueError):
    pass


def random_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``; same key, same draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF,
                                                         *(int(k) for k in key)]))


@dataclass(frozen=True)
class OperatorParams:
    mutation_rate: float = 0.1
    creep_rate: float = 0.10
    creep_step: float = 0.25
    poly_scale: float = TWO_PI
    poly_noise: float = 1.0
    poly_max_order: int = 5


def _check_pair(p1: GeneString, p2: GeneString):
    if p1.layout != p2.layout:
        raise IncompatibleParentsError("parents have different gene layouts")


def draw_window(num_components: int, rng: np.random.Generator) -> tuple[int, int]:
    j, k = np.sort(rng.choice(num_components + 1, size=2, replace=False))
    return int(j), int(k)


def _masks(genes: GeneString, window: tuple[int, int]):
    j, k = window
    anchors = genes.layout.anchors
    starts = genes.layout.block_edges[:-1]
    return (anchors >= j) & (anchors < k), (starts >= j) & (starts < k)


def two_point_crossover(p1: GeneString, p2: GeneString, rng: np.random.Generator,
                        window: tuple[int, int] | None = None):
    _check_pair(p1, p2)
    if window is None:
        window = draw_window(p1.layout.num_components, rng)
    ph, amp = _masks(p1, window)
    c1 = p1.replace(np.where(ph, p2.phases, p1.phases), np.where(amp, p2.levels, p1.levels))
    c2 = p2.replace(np.where(ph, p1.phases, p2.phases), np.where(amp, p1.levels, p2.levels))
    return c1, c2


def average_crossover(p1: GeneString, p2: GeneString, rng: np.random.Generator,
                      window: tuple[int, int] | None = None) -> GeneString:
    """Average the parents inside the window, copy ``p1`` outside it.

    Averaged amplitude levels round half up to the next level.
    """
    _check_pair(p1, p2)
    if window is None:
        window = draw_window(p1.layout.num_components, rng)
    ph, amp = _masks(p1, window)
    mean_phase = 0.5 * (p1.phases + p2.phases)
    mean_level = np.floor(0.5 * (p1.levels + p2.levels) + 0.5).astype(int)
    return p1.replace(np.where(ph, mean_phase, p1.phases),
                      np.where(amp, mean_level, p1.levels))


def mutation(p: GeneString, rng: np.random.Generator, rate: float = 0.1) -> GeneString:
    layout = p.layout
    pick_ph = rng.random(layout.num_phase_genes) < rate
    pick_amp = rng.random(layout.num_amplitude_genes) < rate
    new_ph = rng.uniform(0.0, TWO_PI, layout.num_phase_genes)
    new_amp = rng.integers(0, layout.num_levels, layout.num_amplitude_genes)
    return p.replace(np.where(pick_ph, new_ph, p.phases), np.where(pick_amp, new_amp, p.levels))


def creep(p: GeneString, rng: np.random.Generator, rate: float = 0.10,
          step: float = 0.25) -> GeneString:
    layout = p.layout
    pick_ph = rng.random(layout.num_phase_genes) < rate
    pick_amp = rng.random(layout.num_amplitude_genes) < rate
    nudged = wrap_phase(p.phases + step * rng.random(layout.num_phase_genes))
    stepped = np.clip(p.levels + rng.integers(-1, 2, layout.num_amplitude_genes),
                      0, layout.num_levels - 1)
    return p.replace(np.where(pick_ph, nudged, p.phases), np.where(pick_amp, stepped, p.levels))


def smooth(p: GeneString, rng: np.random.Generator | None = None) -> GeneString:
    """Three-point running mean of the phase genes; the edges repeat themselves."""
    if p.layout.num_phase_genes < 3:
        raise InsufficientGenesError("smoothing needs at least three phase genes")
    padded = np.pad(p.phases, 1, mode="edge")
    avg = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    # a mean of values in [0, 2pi) stays there, up to rounding at the top edge
    return p.replace(phases=np.minimum(avg, np.nextafter(TWO_PI, 0.0)))


def _phase_genes_from_field(field: SpectralField, genes: GeneString,
                            fallback: GeneString) -> np.ndarray:
    anchors = genes.layout.anchors
    a = field.amplitudes[anchors]
    mag = np.abs(field.amplitudes)
    # phases of (numerically) dark components are noise; inherit instead
    dark = np.abs(a) <= 1e-9 * max(mag.max(), np.finfo(float).tiny)
    return np.where(dark, fallback.phases, wrap_phase(np.angle(a)))


def time_domain_crossover(p1: GeneString, p2: GeneString, rng: np.random.Generator,
                          carrier: SpectralField,
                          window: tuple[int, int] | None = None):
    """Two-point crossover on the time samples of the shaped pulses.

    Both parents are shaped onto ``carrier`` and transformed to time; the
    samples in the window are exchanged and each child is transformed back.
    Children keep their own parent's amplitude genes and re-read their phase
    genes at the anchors. Where a child's spectrum is dark at an anchor the
    gene is inherited from whichever parent supplied most time samples.
    """
    _check_pair(p1, p2)
    m = p1.layout.num_components
    if carrier.size != m:
        raise IncompatibleParentsError(f"carrier has {carrier.size} components, genome {m}")
    if window is None:
        window = draw_window(m, rng)
    j, k = window
    e1 = to_time(apply_mask(carrier, decode(p1)))
    e2 = to_time(apply_mask(carrier, decode(p2)))
    inside = np.zeros(m, dtype=bool)
    inside[j:k] = True
    t1 = np.where(inside, e2.amplitudes, e1.amplitudes)
    t2 = np.where(inside, e1.amplitudes, e2.amplitudes)
    f1 = to_frequency(e1.with_amplitudes(t1))
    f2 = to_frequency(e2.with_amplitudes(t2))
    majority_swapped = (k - j) * 2 > m
    fb1, fb2 = (p2, p1) if majority_swapped else (p1, p2)
    c1 = p1.replace(phases=_phase_genes_from_field(f1, p1, fb1))
    c2 = p2.replace(phases=_phase_genes_from_field(f2, p2, fb2))
    return c1, c2


def polynomial_phase_mutation(p: GeneString, rng: np.random.Generator,
                              scale: float = TWO_PI, noise: float = 1.0,
                              max_order: int = 5,
                              window: tuple[int, int] | None = None,
                              order: int | None = None) -> GeneString:
    """Overwrite a contiguous run of phase genes with ``c * x**n + eps``.

    ``x`` is the anchor's offset from the band centre scaled to [-1, 1],
    ``n`` is drawn from 1..max_order, ``c`` from [0, scale) and each
    ``eps`` from [0, noise).
    """
    layout = p.layout
    if window is None:
        window = draw_window(layout.num_components, rng)
    n = int(rng.integers(1, max_order + 1)) if order is None else order
    c = rng.uniform(0.0, scale)
    eps = rng.uniform(0.0, 1.0, layout.num_phase_genes) * noise
    ph, _ = _masks(p, window)
    x = 2.0 * layout.anchors / (layout.num_components - 1) - 1.0
    poly = wrap_phase(c * x ** n + eps)
    return p.replace(phases=np.where(ph, poly, p.phases))


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    arity: int
    children: int


OPERATORS: dict[str, OperatorSpec] = {
    spec.name: spec for spec in [
        OperatorSpec("two_point_crossover", 2, 2),
        OperatorSpec("average_crossover", 2, 1),
        OperatorSpec("mutation", 1, 1),
        OperatorSpec("creep", 1, 1),
        OperatorSpec("smooth", 1, 1),
        OperatorSpec("time_domain_crossover", 2, 2),
        OperatorSpec("polynomial_phase_mutation", 1, 1),
    ]
}


def apply_operator(name: str, parents: list[GeneString], rng: np.random.Generator,
                   carrier: SpectralField, params: OperatorParams = OperatorParams()
                   ) -> list[GeneString]:
    """Dispatch a named operator; always returns a list of children."""
    fns: dict[str, Callable[[], object]] = {
        "two_point_crossover": lambda: two_point_crossover(parents[0], parents[1], rng),
        "average_crossover": lambda: average_crossover(parents[0], parents[1], rng),
        "mutation": lambda: mutation(parents[0], rng, params.mutation_rate),
        "creep": lambda: creep(parents[0], rng, params.creep_rate, params.creep_step),
        "smooth": lambda: smooth(parents[0], rng),
        "time_domain_crossover": lambda: time_domain_crossover(parents[0], parents[1], rng, carrier),
        "polynomial_phase_mutation": lambda: polynomial_phase_mutation(
            parents[0], rng, params.poly_scale, params.poly_noise, params.poly_max_order),
    }
    if name not in fns:
        raise KeyError(f"unknown operator {name!r}")
    out = fns[name]()
    return list(out) if isinstance(out, tuple) else [out]
