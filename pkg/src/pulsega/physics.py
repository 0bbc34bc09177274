"""Simulated feedback signals: second-harmonic yield, self-phase modulation
and a band-contrast score on spectrometer counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pulsega.field import (
    GeneString,
    SpectralField,
    TemporalField,
    apply_mask,
    decode,
    to_frequency,
    to_time,
)


class InvalidGoalError(ValueError):
    pass


def shg_signal(t: TemporalField) -> float:
    """Integrated second-harmonic yield, proportional to the integral of |E(t)|^4."""
    return float(np.sum(t.intensity() ** 2) * t.spacing)


@dataclass(frozen=True)
class SpmMedium:
    """Kerr medium reduced to its peak nonlinear phase ``b_integral`` (rad)."""

    b_integral: float = 0.0
    n0: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.b_integral) or self.b_integral < 0:
            raise ValueError("b_integral must be finite and nonnegative")


def spm_propagate(t: TemporalField, medium: SpmMedium) -> TemporalField:
    """Imprint ``exp(i B I(t) / I_peak)``; the temporal intensity is untouched."""
    i = t.intensity()
    peak = i.max() if i.size else 0.0
    if peak == 0.0 or medium.b_integral == 0.0:
        return t
    return t.with_amplitudes(t.amplitudes * np.exp(1j * medium.b_integral * i / peak))


def spectrum_counts(f: SpectralField) -> np.ndarray:
    return f.power_spectrum()


@dataclass(frozen=True)
class StokesGoal:
    """Target band ``[low, high)`` in bins of a ``bandwidth``-bin spectrometer."""

    low: int
    high: int
    weight: int = 2
    bandwidth: int = 128

    def __post_init__(self):
        width = self.high - self.low
        if width <= 0 or width >= self.bandwidth:
            raise InvalidGoalError(
                f"band [{self.low}, {self.high}) is degenerate for {self.bandwidth} bins")
        if self.low < 0 or self.high > self.bandwidth:
            raise InvalidGoalError("band must lie inside the spectrometer range")
        if self.weight < 1:
            raise InvalidGoalError("weight N must be a positive integer")


def stokes_contrast_fitness(counts, goal: StokesGoal) -> float:
    """Weighted in-band mean minus out-of-band mean of spectrometer counts.

    ``sum_in N*C / (b - r) - sum_out C / (bandwidth - (b - r))``
    """
    c = np.asarray(counts, dtype=float)
    if c.shape != (goal.bandwidth,):
        raise InvalidGoalError(f"expected {goal.bandwidth} count bins, got {c.shape}")
    width = goal.high - goal.low
    inside = np.zeros(goal.bandwidth, dtype=bool)
    inside[goal.low:goal.high] = True
    return float(goal.weight * c[inside].sum() / width
                 - c[~inside].sum() / (goal.bandwidth - width))


class Landscape:
    """A fitness function over gene strings built on a fixed carrier.

    With ``phase_only`` the genome's amplitude genes are ignored and every
    shaped pulse carries the carrier's energy.
    """

    name = "landscape"

    def __init__(self, carrier: SpectralField, medium: SpmMedium = SpmMedium(),
                 phase_only: bool = True, max_phase_step: float | None = None):
        self.carrier = carrier
        self.medium = medium
        self.phase_only = phase_only
        self.max_phase_step = max_phase_step

    def shaped(self, genes: GeneString) -> SpectralField:
        if genes.layout.num_components != self.carrier.size:
            raise ValueError(
                f"genome has {genes.layout.num_components} components, carrier {self.carrier.size}")
        mask = decode(genes, self.max_phase_step)
        if self.phase_only:
            mask = type(mask)(mask.phase, np.ones_like(mask.transmission))
        return apply_mask(self.carrier, mask)

    def pulse(self, genes: GeneString) -> TemporalField:
        """The pulse after the medium, in time."""
        return spm_propagate(to_time(self.shaped(genes)), self.medium)

    def output_spectrum(self, genes: GeneString) -> SpectralField:
        return to_frequency(self.pulse(genes))

    def signal(self, genes: GeneString) -> float:
        raise NotImplementedError

    def __call__(self, genes: GeneString) -> float:
        return self.signal(genes)


class ShgLandscape(Landscape):
    name = "shg"

    def __init__(self, carrier: SpectralField, goal: str = "maximize", **kw):
        super().__init__(carrier, **kw)
        if goal not in ("maximize", "minimize"):
            raise ValueError(f"goal must be 'maximize' or 'minimize', got {goal!r}")
        self.goal = goal

    def signal(self, genes: GeneString) -> float:
        s = shg_signal(self.pulse(genes))
        return s if self.goal == "maximize" else -s


class StokesLandscape(Landscape):
    """Band contrast of the spectrum emerging from the Kerr medium."""

    name = "stokes"

    def __init__(self, carrier: SpectralField, goal: StokesGoal, **kw):
        super().__init__(carrier, **kw)
        if goal.bandwidth != carrier.size:
            raise InvalidGoalError("spectrometer bins must match the carrier grid")
        self.goal = goal

    def signal(self, genes: GeneString) -> float:
        return stokes_contrast_fitness(spectrum_counts(self.output_spectrum(genes)), self.goal)


def landscape_fitness(genes: GeneString, landscape: Landscape) -> float:
    return landscape(genes)
