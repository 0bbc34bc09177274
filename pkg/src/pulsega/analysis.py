"""Time-frequency portraits of pulses and population diversity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pulsega.field import FS_PER_PS, SpectralField, to_time


class InsufficientPopulationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TFGrid:
    """A real distribution sampled on (frequency row, time column).

    ``values[r, k]`` belongs to ``freq_axis[r]`` and ``time_axis[k]``.
    Frequency rows are spaced by half a spectral bin.
    """

    time_axis: np.ndarray  # fs
    freq_axis: np.ndarray  # THz
    values: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.time_axis[1] - self.time_axis[0])

    @property
    def dnu(self) -> float:
        return float(self.freq_axis[1] - self.freq_axis[0])

    def time_marginal(self) -> np.ndarray:
        """Integral over frequency, comparable with ``|E(t)|^2``."""
        return self.values.sum(axis=0) * self.dnu

    def frequency_marginal(self) -> np.ndarray:
        """Integral over time, rebinned onto the spectral grid of the field.

        Each field component collects its own row plus half of each
        neighbouring half-bin row.
        """
        fine = self.values.sum(axis=1) * self.dt / FS_PER_PS
        padded = np.concatenate([[0.0], fine, [0.0]])
        coarse = padded[1::2] + 0.5 * (padded[0:-1:2] + padded[2::2])
        return coarse * 0.5


def wigner(f: SpectralField) -> TFGrid:
    """Discrete Wigner function of a field computed from its spectrum.

    Every pair of components ``(p, q)`` contributes at the centre
    frequency ``(p + q) / 2`` with a time oscillation set by ``p - q``.
    Lags reach ``M - 1``, so the time axis is sampled at half the field's
    spacing (``2M`` columns over the same periodic window); on the field's
    own grid the even-lag rows would repeat every half window and show a
    ghost of the pulse. Both marginals are exact: summing rows gives
    ``|E(t)|^2`` (the band-limited intensity between samples) and summing
    columns gives ``|E(nu)|^2`` on integer rows and zero on half-bin rows.

    A sampled spectrum describes a pulse train with the window as period, so
    the grid also holds the interference between neighbouring pulses half a
    window away. It alternates in sign from row to row, carries no energy
    and is removed by :func:`husimi`.
    """
    m = f.size
    cols = 2 * m
    e = f.amplitudes
    p, q = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    lag = p - q
    # (-1)^lag moves the DFT origin to the centred time sample
    prod = np.outer(e, np.conj(e)) * np.where(lag % 2 == 0, 1.0, -1.0)
    acc = np.zeros((2 * m - 1, cols), dtype=complex)
    np.add.at(acc, ((p + q).ravel(), lag.ravel() % cols), prod.ravel())
    values = np.fft.fft(acc, axis=1).real * (2.0 * f.spacing)
    time_axis = (np.arange(cols) - m) * (f.time_spacing / 2.0)
    freq_axis = f.center_frequency + (np.arange(2 * m - 1) / 2.0 - m // 2) * f.spacing
    return TFGrid(time_axis, freq_axis, values)


def rms_duration(f: SpectralField) -> float:
    """RMS width in fs of ``|E(t)|^2`` for the given field."""
    t = to_time(f)
    i = t.intensity()
    if i.sum() == 0.0:
        return 0.0
    w = i / i.sum()
    mu = np.sum(w * t.times)
    return float(np.sqrt(np.sum(w * (t.times - mu) ** 2)))


def default_husimi_scales(f: SpectralField) -> tuple[float, float]:
    """Kernel widths (fs, THz) matched to the transform-limited pulse.

    The pair satisfies ``t0 * nu0 = 1 / (2 pi)``, the minimum-uncertainty
    product for which Gaussian smoothing of a Wigner function is
    guaranteed nonnegative.
    """
    tl = f.with_amplitudes(np.abs(f.amplitudes))
    t0 = np.sqrt(2.0) * rms_duration(tl)
    if t0 == 0.0:
        t0 = 4.0 * f.time_spacing
    # t0 in fs, nu0 in THz: the product carries a factor 1e3
    nu0 = FS_PER_PS / (2.0 * np.pi * t0)
    return float(t0), float(nu0)


def _gaussian_kernel(axis: np.ndarray, scale: float, period: float | None = None) -> np.ndarray:
    d = axis[:, None] - axis[None, :]
    if period is not None:
        d = (d + period / 2.0) % period - period / 2.0
    return np.exp(-(d / scale) ** 2)


def husimi(f: SpectralField, time_scale: float | None = None,
           freq_scale: float | None = None) -> TFGrid:
    """Gaussian-smoothed Wigner function, sampled at the field's time points.

    The smoothing kernel is ``exp(-((t - t')/t0)^2 - ((nu - nu')/nu0)^2)``;
    time is treated as periodic, matching the field's DFT window. Scales
    default to :func:`default_husimi_scales`. Choosing ``t0 * nu0`` below
    ``1 / (2 pi)`` (in fs*THz/1e3 units) forfeits positivity.
    """
    w = wigner(f)
    t0, nu0 = default_husimi_scales(f)
    if time_scale is not None:
        t0 = time_scale
    if freq_scale is not None:
        nu0 = freq_scale
    period = f.size * f.time_spacing
    kt = _gaussian_kernel(w.time_axis, t0, period) * w.dt / FS_PER_PS
    kf = _gaussian_kernel(w.freq_axis, nu0) * w.dnu
    # smooth on the fine Wigner grid, report on the field's time samples
    q = kf @ w.values @ kt[::2].T
    return TFGrid(w.time_axis[::2], w.freq_axis, q)


def genetic_variation(values, gene_range: float) -> float:
    """Mean absolute pairwise difference of one gene across a population,
    divided by the gene's range so that the result lies in [0, 1].

    ``values`` holds that gene's value for every individual.
    """
    g = np.sort(np.asarray(values, dtype=float))
    n = len(g)
    if n < 2:
        raise InsufficientPopulationError("genetic variation needs at least two individuals")
    # sum_{i<j} |g_i - g_j| over sorted values; offsets keep clones at exactly 0
    total = max(float(np.sum((2 * np.arange(n) - n + 1) * (g - g[0]))), 0.0)
    pairs = n * (n - 1) / 2
    return float(total / (pairs * gene_range))


def variation_map(genomes) -> np.ndarray:
    """Per-gene variation for a list of gene strings sharing one layout."""
    genomes = list(genomes)
    if len(genomes) < 2:
        raise InsufficientPopulationError("genetic variation needs at least two individuals")
    matrix = np.stack([g.values() for g in genomes])
    ranges = genomes[0].layout.gene_ranges()
    return np.array([genetic_variation(matrix[:, j], ranges[j]) for j in range(matrix.shape[1])])
