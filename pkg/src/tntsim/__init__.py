"""Twist-and-turn and one-axis-twisting spin squeezing in two-mode bosonic
ensembles: exact Dicke-manifold dynamics, classical phase-space analysis,
Monte Carlo wave-function trajectories with losses and technical noise, and
the full squeezing-estimation pipeline.
"""

__version__ = "0.1.0"

from .analysis import (
    ShotTable,
    TomographyResult,
    apply_detection_noise,
    array_scaling,
    differential_squeezing,
    exponential_fit,
    jackknife,
    mean_spin_length,
    number_squeezing,
    spin_squeezing,
    subtract_detection_noise,
    to_db,
    tomography,
    visibility,
    wineland_squeezing,
)
from .config import ExperimentConfig, parse_config, parse_config_file
from .hamiltonian import (
    PhysicalParams,
    build_hamiltonian,
    evolve,
    unstable_phase,
)
from .mcwf import (
    DEFAULT_CHANNELS,
    JumpChannel,
    NoiseModel,
    TrajectoryEnsemble,
    apply_jump,
    run_ensemble,
    step_trajectory,
)
from .meanfield import (
    ClassicalPoint,
    FixedPoint,
    classical_rhs,
    classify_region,
    find_fixed_points,
    integrate_classical,
)
from .sequences import (
    CoupledPulse,
    FreeEvolution,
    InstantRotation,
    PulseSequence,
    TomographyRotation,
    pulsed_tnt_sequence,
    run_sequence,
    tnt_sequence,
)
from .spins import (
    SpinMoments,
    SpinState,
    coherent_state,
    moments,
    overlap,
    rotate,
    sample_jz,
)
