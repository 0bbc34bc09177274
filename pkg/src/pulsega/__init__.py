"""Adaptive evolutionary optimisation of shaped ultrafast pulses."""

from pulsega.analysis import TFGrid, genetic_variation, husimi, variation_map, wigner
from pulsega.engine import (
    CreditLedger,
    EngineConfig,
    Individual,
    OperatorPool,
    Population,
    RunLog,
    assign_credit,
    run,
    scale_fitness,
    select_operator,
    select_parent,
    step_generation,
    update_operator_weights,
)
from pulsega.field import (
    GeneLayout,
    GeneString,
    ShaperMask,
    SpectralField,
    TemporalField,
    apply_mask,
    decode,
    gaussian_spectrum,
    to_frequency,
    to_time,
)
from pulsega.physics import (
    ShgLandscape,
    SpmMedium,
    StokesGoal,
    StokesLandscape,
    landscape_fitness,
    shg_signal,
    spectrum_counts,
    spm_propagate,
    stokes_contrast_fitness,
)

__version__ = "0.1.0"
