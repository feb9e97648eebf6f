"""Exact Fock-space model of resonance-fluorescence light in a Franson interferometer."""

from .analysis import (
    ChshSettings,
    CorrelationCounts,
    FringeFit,
    FringeModel,
    PowerScanRow,
    chsh_from_model,
    chsh_S,
    closed_form_S,
    correlation_E,
    find_crossing,
    fit_fringe,
    power_scan,
)
from .coincidence import (
    HistogramParams,
    PeakId,
    PhaseClass,
    closed_form_C,
    coincidence_probability,
    hbt_g2,
    peak_table,
    synthesize_histogram,
)
from .fock import DensityMatrix, FockState, ModeId, reduced_density
from .network import (
    NetworkSpec,
    forward_coincidence_probability,
    heisenberg_coincidence_probability,
    port_d_density,
    prepare_output_state,
)
from .source import CalibrationParams, RfParams, p1_of_nbar, rf_input_state

__version__ = "0.1.0"

__all__ = [
    "CalibrationParams",
    "ChshSettings",
    "CorrelationCounts",
    "DensityMatrix",
    "FockState",
    "FringeFit",
    "FringeModel",
    "HistogramParams",
    "ModeId",
    "NetworkSpec",
    "PeakId",
    "PhaseClass",
    "PowerScanRow",
    "RfParams",
    "chsh_S",
    "chsh_from_model",
    "closed_form_C",
    "closed_form_S",
    "coincidence_probability",
    "correlation_E",
    "find_crossing",
    "fit_fringe",
    "forward_coincidence_probability",
    "hbt_g2",
    "heisenberg_coincidence_probability",
    "p1_of_nbar",
    "peak_table",
    "port_d_density",
    "power_scan",
    "prepare_output_state",
    "reduced_density",
    "rf_input_state",
    "synthesize_histogram",
]
