"""Preconditioned Matsubara-mode samplers for quantum thermal averages.

The imaginary-time loop of a quantum particle is expanded in real Fourier
(Matsubara) modes. Langevin dynamics on these modes, preconditioned so that
every mode relaxes on the same time scale, samples the loop distribution
whose observable averages converge to quantum thermal averages as the
number of modes grows.
"""

from .dynamics import (
    MATSUBARA_OVERDAMPED,
    MATSUBARA_UNDERDAMPED,
    STANDARD_UNDERDAMPED,
    PhaseState,
    RateBounds,
    Sampler,
    SamplerConfig,
    TrajectorySummary,
    baoab_step,
    initial_state,
    make_rng,
    overdamped_step,
    rate_bounds,
    run_trajectory,
)
from .errors import (
    ConvergenceError,
    InsufficientDataError,
    UndefinedCorrelationError,
    WrongVariantError,
)
from .estimators import (
    LoopAverage,
    ModeRecorder,
    RadialHistogram,
    autocorrelation,
    batch_means_stderr,
    decay_rate_fit,
    get_observable,
    loop_observable,
    radial_histogram,
    time_average,
)
from .modes import (
    FrequencySpectrum,
    GridLoop,
    LoopTransform,
    ModeCoordinates,
    basis_value,
    grid_to_modes,
    matsubara_frequencies,
    mode_to_grid,
    normal_mode_frequencies,
    project_force,
)
from .oracle import classical_average, quantum_average_1d
from .potentials import (
    LoopPotentialContext,
    PotentialSpec,
    builtin_potential,
    loop_force,
    loop_potential,
)

__version__ = "0.1.0"
