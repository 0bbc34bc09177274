"""Gene strings, shaper masks and the frequency/time representation of a pulse.

Frequencies are in THz and times in fs. A field of ``M`` samples lives on a
centred grid: component ``i`` sits at ``center + (i - M/2) * dnu`` and time
sample ``k`` at ``(k - M/2) * dt`` with ``dt * dnu * M = 1`` (dnu in THz gives
dt in ps, so times are scaled by 1e3 to fs).

The transform pair uses the ``exp(-i w t)`` convention::

    E(t_k)  = dnu * sum_i E(nu_i) exp(-2 pi i (nu_i - center) t_k)
    E(nu_i) = dt  * sum_k E(t_k)  exp(+2 pi i (nu_i - center) t_k)

so a spectral phase ``exp(+i w tau)`` delays the envelope by ``tau`` and
``sum |E(t)|^2 dt == sum |E(nu)|^2 dnu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi
FS_PER_PS = 1e3


class InvalidGenomeError(ValueError):
    """Raised when a gene string violates its layout invariants."""


class DimensionError(ValueError):
    """Raised on length mismatches and non power-of-two grids."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GeneLayout:
    """Shape of a genome: how many genes and where they sit on the shaper."""

    num_components: int = 128
    num_phase_genes: int = 40
    num_amplitude_genes: int = 16
    num_levels: int = 8

    def __post_init__(self):
        m = self.num_components
        if m < 2:
            raise InvalidGenomeError("num_components must be at least 2")
        if not 2 <= self.num_phase_genes <= m:
            raise InvalidGenomeError(
                f"num_phase_genes must lie in [2, {m}], got {self.num_phase_genes}")
        if not 0 <= self.num_amplitude_genes <= m:
            raise InvalidGenomeError(
                f"num_amplitude_genes must lie in [0, {m}], got {self.num_amplitude_genes}")
        if not 2 <= self.num_levels <= 256:
            raise InvalidGenomeError(f"num_levels must lie in [2, 256], got {self.num_levels}")

    @property
    def anchors(self) -> np.ndarray:
        """Component indices carrying a phase gene; first 0, last M-1."""
        a = np.rint(np.linspace(0, self.num_components - 1, self.num_phase_genes)).astype(int)
        return a

    @property
    def block_edges(self) -> np.ndarray:
        """Boundaries of the amplitude blocks, length ``num_amplitude_genes + 1``."""
        k = self.num_amplitude_genes
        return (np.arange(k + 1) * self.num_components) // max(k, 1)

    @property
    def num_genes(self) -> int:
        return self.num_phase_genes + self.num_amplitude_genes

    def gene_ranges(self) -> np.ndarray:
        """Span of each gene position (phase genes first), used to normalise variation."""
        return np.concatenate([
            np.full(self.num_phase_genes, TWO_PI),
            np.full(self.num_amplitude_genes, float(self.num_levels - 1)),
        ])

    def random(self, rng: np.random.Generator) -> GeneString:
        phases = rng.uniform(0.0, TWO_PI, self.num_phase_genes)
        levels = rng.integers(0, self.num_levels, self.num_amplitude_genes)
        return GeneString(self, phases, levels)

    def flat(self, phase: float = 0.0, level: int | None = None) -> GeneString:
        """Constant-phase genome; amplitude levels default to full transmission."""
        lvl = self.num_levels - 1 if level is None else level
        return GeneString(
            self,
            np.full(self.num_phase_genes, float(phase)),
            np.full(self.num_amplitude_genes, lvl, dtype=int),
        )


@dataclass(frozen=True, eq=False)
class GeneString:
    """Phase genes at fixed anchor components plus discrete amplitude levels."""

    layout: GeneLayout
    phases: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float)
        levels = np.array(self.levels, dtype=int)
        if phases.shape != (self.layout.num_phase_genes,):
            raise InvalidGenomeError(
                f"expected {self.layout.num_phase_genes} phase genes, got {phases.shape}")
        if levels.shape != (self.layout.num_amplitude_genes,):
            raise InvalidGenomeError(
                f"expected {self.layout.num_amplitude_genes} amplitude genes, got {levels.shape}")
        if not np.all(np.isfinite(phases)) or np.any(phases < 0.0) or np.any(phases >= TWO_PI):
            raise InvalidGenomeError("phase genes must lie in [0, 2pi)")
        if np.any(levels < 0) or np.any(levels >= self.layout.num_levels):
            raise InvalidGenomeError(f"amplitude levels must lie in [0, {self.layout.num_levels - 1}]")
        phases.flags.writeable = False
        levels.flags.writeable = False
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "levels", levels)

    @property
    def anchors(self) -> np.ndarray:
        return self.layout.anchors

    def values(self) -> np.ndarray:
        """All gene values as one float vector, phase genes first."""
        return np.concatenate([self.phases, self.levels.astype(float)])

    def replace(self, phases=None, levels=None) -> GeneString:
        return GeneString(
            self.layout,
            self.phases if phases is None else phases,
            self.levels if levels is None else levels,
        )

    def __eq__(self, other):
        if not isinstance(other, GeneString):
            return NotImplemented
        return (self.layout == other.layout
                and np.array_equal(self.phases, other.phases)
                and np.array_equal(self.levels, other.levels))

    def __hash__(self):
        return hash((self.layout, self.phases.tobytes(), self.levels.tobytes()))


def wrap_phase(phi):
    """Map phases into [0, 2pi), guarding the float edge case that rounds to 2pi."""
    w = np.mod(phi, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w)


@dataclass(frozen=True, eq=False)
class ShaperMask:
    phase: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        if np.shape(self.phase) != np.shape(self.transmission):
            raise DimensionError("phase and transmission lengths differ")
        t = np.asarray(self.transmission)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError("transmission must lie in [0, 1]")

    @property
    def size(self) -> int:
        return len(self.phase)


def decode(genes: GeneString, max_phase_step: float | None = None) -> ShaperMask:
    """Expand a gene string into a per-component phase and transmission mask.

    Phase is linearly interpolated between anchors on the raw gene values.
    Transmission is ``level / (L - 1)`` over each amplitude block, or unity
    when the layout carries no amplitude genes.

    ``max_phase_step`` optionally caps the phase change between adjacent
    components, mimicking a modulator that cannot realise steeper gradients.
    """
    layout = genes.layout
    m = layout.num_components
    anchors = layout.anchors
    if anchors[0] != 0 or anchors[-1] != m - 1 or np.any(np.diff(anchors) <= 0):
        raise InvalidGenomeError("anchor indices must increase strictly from 0 to M-1")
    phase = np.interp(np.arange(m), anchors, genes.phases)
    if max_phase_step is not None:
        steps = np.clip(np.diff(phase), -max_phase_step, max_phase_step)
        phase = phase[0] + np.concatenate([[0.0], np.cumsum(steps)])
    if layout.num_amplitude_genes == 0:
        transmission = np.ones(m)
    else:
        edges = layout.block_edges
        per_block = genes.levels / (layout.num_levels - 1)
        transmission = np.repeat(per_block, np.diff(edges))
    return ShaperMask(phase, transmission)


@dataclass(frozen=True, eq=False)
class SpectralField:
    center_frequency: float  # THz
    spacing: float  # THz
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def size(self) -> int:
        return len(self.amplitudes)

    @property
    def frequencies(self) -> np.ndarray:
        m = self.size
        return self.center_frequency + (np.arange(m) - m // 2) * self.spacing

    @property
    def time_spacing(self) -> float:
        """Sample spacing of the reciprocal time grid in fs."""
        return FS_PER_PS / (self.size * self.spacing)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.spacing)

    def power_spectrum(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def with_amplitudes(self, amplitudes) -> SpectralField:
        return SpectralField(self.center_frequency, self.spacing, amplitudes)


@dataclass(frozen=True, eq=False)
class TemporalField:
    spacing: float  # fs
    amplitudes: np.ndarray
    center_frequency: float = 0.0  # carried along so the round trip is lossless

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def size(self) -> int:
        return len(self.amplitudes)

    @property
    def times(self) -> np.ndarray:
        m = self.size
        return (np.arange(m) - m // 2) * self.spacing

    @property
    def frequency_spacing(self) -> float:
        return FS_PER_PS / (self.size * self.spacing)

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def energy(self) -> float:
        # fs -> ps so that energies match the THz-weighted spectral sum
        return float(np.sum(self.intensity()) * self.spacing / FS_PER_PS)

    def with_amplitudes(self, amplitudes) -> TemporalField:
        return TemporalField(self.spacing, amplitudes, self.center_frequency)


def apply_mask(spectrum: SpectralField, mask: ShaperMask) -> SpectralField:
    if mask.size != spectrum.size:
        raise DimensionError(f"mask has {mask.size} components, field has {spectrum.size}")
    out = spectrum.amplitudes * np.asarray(mask.transmission) * np.exp(1j * np.asarray(mask.phase))
    return spectrum.with_amplitudes(out)


def to_time(f: SpectralField) -> TemporalField:
    m = f.size
    if not _is_power_of_two(m):
        raise DimensionError(f"grid length {m} is not a power of two")
    e_t = f.spacing * np.fft.fftshift(np.fft.fft(np.fft.ifftshift(f.amplitudes)))
    return TemporalField(f.time_spacing, e_t, f.center_frequency)


def to_frequency(t: TemporalField) -> SpectralField:
    m = t.size
    if not _is_power_of_two(m):
        raise DimensionError(f"grid length {m} is not a power of two")
    dt_ps = t.spacing / FS_PER_PS
    e_w = dt_ps * m * np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(t.amplitudes)))
    return SpectralField(t.center_frequency, t.frequency_spacing, e_w)


def gaussian_spectrum(num_components: int = 128, fwhm_bins: float | None = None,
                      center_frequency: float = 379.5, fwhm_thz: float = 4.41,
                      energy: float = 1.0) -> SpectralField:
    """Transform-limited Gaussian carrier centred on the grid.

    ``fwhm_bins`` is the intensity FWHM in grid bins (default 5M/16, so the
    shaper window spans a little over three FWHM) and
    ``fwhm_thz`` fixes the physical bandwidth, which sets the bin spacing.
    The defaults give a ~100 fs pulse at 790 nm.
    """
    m = num_components
    if fwhm_bins is None:
        fwhm_bins = 5 * m / 16
    spacing = fwhm_thz / fwhm_bins
    x = (np.arange(m) - m // 2) / fwhm_bins
    amp = np.exp(-2.0 * np.log(2.0) * x ** 2)
    f = SpectralField(center_frequency, spacing, amp.astype(complex))
    return f.with_amplitudes(amp * np.sqrt(energy / f.energy()))
