pub mod phasespace;
pub mod quasiprob;
pub mod singlet;
pub mod spin;
pub mod twoslit;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;
use crate::output::RunContext;

/// One subcommand: a parameter block validated up front, then a run that
/// writes its artifacts into the context.
pub trait Experiment {
    type Params: DeserializeOwned + Serialize;
    type Prepared;

    /// Builds every domain object; failures here are config errors and
    /// happen before anything is written.
    fn prepare(params: &Self::Params) -> Result<Self::Prepared, CliError>;

    fn execute(prepared: &Self::Prepared, ctx: &mut RunContext) -> Result<(), CliError>;
}
