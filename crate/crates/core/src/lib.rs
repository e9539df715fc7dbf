//! Numerical laboratory for extended-phase-space quantum mechanics.
//!
//! Elementary states here carry joint values of non-commuting magnitudes;
//! standard quantum states arise by summing amplitudes over discarded
//! labels. The modules cover quaternion spin lattices over many directions,
//! singlet pairs, α-parametrized phase-space operators, quasi-probability
//! tables with joint-distribution feasibility, and a two-slit amplitude model
//! with statistical decoherence.

pub mod entanglement;
pub mod error;
pub mod phase_space;
pub mod quasiprob;
pub mod quaternion;
pub mod spin_lattice;
pub mod twoslit;

pub use entanglement::{
    build_singlet_entangled, build_singlet_factorized, evolve_bilinear_interaction, models_agree, BilinearInteraction,
    SingletEntangled, SingletFactorized, SingletModel, Trials,
};
pub use error::{Error, Result};
pub use phase_space::{
    apply_p_beta, apply_q_alpha, commutator_residual, lift, lift_momentum, project_to_momentum, project_to_position,
    q_invariant_subspace_check, AlphaSplit, AxisWavefunction, ExtendedWavefunction, MomentumWavefunction, PhaseGrid,
    PositionWavefunction,
};
pub use quasiprob::{
    eqm_observability_residual, feasible_nonnegative_joint, min_entry, symmetrized_quasiprob, verify_marginals,
    wigner_pair, FarkasCertificate, Feasibility, FiniteState, Marginal, MarginalSystem, MeasBasis, QuasiProbTable,
};
pub use quaternion::{quat_inner, quat_mul, unit_quat_from_direction, Direction, Quaternion};
pub use spin_lattice::{
    born_probabilities, build_eigenstate, build_isotropic, elementary_amplitude, interference_residual_3,
    marginal_consistency_residual, marginal_probabilities, project_marginal, DirectionFrame, ExtendedSpinState,
    MarginalAmplitudeTable, OutcomeTable, SpinConfig,
};
pub use twoslit::{
    coherent_intensity, decohered_run, ensemble_histogram, negative_detection_condition, path_amplitude,
    phase_averaged_intensity, slit_probabilities, DecoherenceModel, EnsembleHistogram, PhaseDistribution, Screen, Slit,
    SlitAmplitude, SlitGeometry,
};
