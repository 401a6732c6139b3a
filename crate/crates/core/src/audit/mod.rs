//! Verification of the energy, entropy and maximum-principle statements on
//! solver output.

mod diagnostics;
mod entropy;
mod first_law;
mod ledger;
mod weak;

pub use diagnostics::{dissipation_density, record_diagnostics, DiagnosticsRecord, CSV_COLUMNS};
pub use entropy::{
    entropy_inequality_residual, psi2_catalog, ConcaveTestFn, EntropyAccumulator, EntropyResidual, Psi2,
    SpatialWeight, CONCAVE_CATALOG,
};
pub use first_law::first_law_pointwise_residual;
pub use ledger::{
    energy_law_residual, max_principle_monitor, EnergyLawResiduals, MaxPrincipleReport, MAX_PRINCIPLE_SLACK,
};
pub use weak::{
    sample_point_fields, weak_residuals, DirectorTestFn, PointFields, TestFieldSet, VelocityTestFn, WeakAccumulator,
    WeakResiduals,
};
