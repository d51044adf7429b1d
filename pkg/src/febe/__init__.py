"""Free electrons driving and probing two-level quantum emitters."""

__version__ = "0.1.0"

from .beam import (
    BeamParams,
    EffectiveHamiltonian,
    Evolution,
    PhaseBudget,
    RabiReport,
    decay_matrix,
    discrete_fixed_point,
    effective_hamiltonian,
    evolve,
    excited_state_vs_current,
    phase_uncertainty,
    rabi_from_eigenvalues,
    rabi_report,
    saturation_current,
    steady_state_closed_form,
    steady_state_nullspace,
)
from .core import (
    PARALLEL,
    PERPENDICULAR,
    CouplingGeometry,
    ElectronKinematics,
    TwoLevelSystem,
    coupling_g,
    kinematics_from_energy,
    snv_center,
)
from .entanglement import (
    PostSelectedPair,
    TwoAtomJointState,
    concurrence,
    mixed_concurrence,
    postselect,
    postselect_mixed,
    sequential_scatter,
)
from .errors import (
    ConfigError,
    CutoffError,
    DomainError,
    FebeError,
    GridResolutionError,
    OffResonanceError,
    PerturbativeWarning,
    RegimeWarning,
    StepSizeError,
)
from .scattering import (
    DensityChange,
    DensityMatrix2,
    PerturbationMatrix,
    SidebandChange,
    SpectrumChange,
    antisymmetric_signal,
    apply_to_atom,
    average_energy_change,
    eels_change,
    eels_modulated_closed_form,
    max_signal_over_drift,
    optimal_modulation_search,
    perturbation_matrix,
    phase_matched_gm_phase,
    spectrum_first_moment,
)
from .wavepacket import (
    ModulationParams,
    MomentumGrid,
    build_momentum_grid,
    dispersion_period,
    ladder_expectation_analytic,
    ladder_expectation_grid,
    ladder_expectations,
    max_s_over_drift,
    quarter_period,
)
