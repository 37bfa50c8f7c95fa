//! End-to-end experiments: the ψ/ρ equivalence under shared innovations,
//! equilibrium under collapse, Born-rule collapse statistics and the
//! discrete-to-continuous limit.

pub mod collapse;
pub mod continuum;
pub mod cosim;
pub mod equilibrium;
pub mod equivalence;
pub mod oracle;
pub mod report;
pub mod runs;
pub mod scenario;
pub mod verify;

pub use collapse::{run_collapse_statistics, CollapseModel};
pub use continuum::{run_continuum_limit, run_rate_law, ContinuumOptions, RateLawOptions};
pub use equilibrium::{run_equilibrium_under_collapse, EquilibriumOptions};
pub use equivalence::{run_equivalence, run_equivalence_convergence, EquivalenceOptions};
pub use oracle::{run_oracle_triangle, OracleOptions};
pub use report::{
    Artifacts, Assertion, MetricSeries, Relation, RunOutput, RunReport, SeedManifest, Snapshot,
};
pub use runs::{run_bohm, run_filter, run_grw_continuous, run_grw_discrete, run_schrodinger};
pub use scenario::{presets, Gaussian1d, GrwSettings, InitialState, ScenarioSpec};
pub use verify::{run_criterion, run_suite, CriterionOutcome, Mode, CRITERIA};
