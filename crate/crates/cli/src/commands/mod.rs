//! One module per subcommand. Each `cmd_*` function writes its reports and
//! returns a short summary for logging and tests.

pub mod ingest;
pub mod predict;
pub mod stance;
pub mod state_model;
pub mod synth;
pub mod top_terms;
