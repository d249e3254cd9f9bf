//! Quadratic storage certificates: the block inequality, the matching
//! equations, the generator along the joint process and the linear gains.

mod certificate;
mod dissipation;
mod gains;
mod generator;

pub use certificate::{
    assumption_blocks, check_assumption, check_structural_equations, AssumptionReport,
    EquationResidual, FactorCheck, SeedCertificate, StorageCertificate, StructuralReport,
};
pub use dissipation::{
    dissipation_check, DissipationReport, DissipationWitness, SampleBoxes, DISSIPATION_SLACK,
};
pub use gains::{
    default_rate_grid, default_splits, gain_summary, gain_summary_search, jump_matching,
    GainSummary, JumpMatch,
};
pub use generator::{
    aux_input, compute_rtilde, generator_value, interface_input, storage_value, JointPoint,
};
pub(crate) use generator::interface_unchecked;
