"""Monitored free fermions: QSD and quantum-jump trajectories of a dephased
tight-binding chain in Slater-determinant form."""

from .ensemble import EnsembleReport, RunConfig, emit_outputs, run_ensemble, verify
from .gaussian import (
    RenormalizationError,
    SlaterState,
    correlation_matrix,
    entanglement_entropy,
    ipr_instant,
    neel_state,
    occupations,
    renormalize,
)
from .lattice import (
    HoppingMatrix,
    Propagator,
    build_hopping,
    qj_effective_propagator,
    spectral_decompose,
    unitary_propagator,
)
from .noise import NoiseStream
from .stats import (
    Histogram,
    MaximaReport,
    PowerLawFit,
    bifurcation_scan,
    find_maxima,
    fit_power_law,
    ks_distance,
    merge,
    normalized_density,
)
from .unravelings import (
    StepEvent,
    TrajectoryConfig,
    TrajectoryRecord,
    qj_step,
    qsd_step,
    run_trajectory,
)

__version__ = "0.1.0"
