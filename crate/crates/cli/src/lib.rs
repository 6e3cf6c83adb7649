//! Problem files and the solve / oracle / compare pipelines behind the `jmsos` binary.

pub mod file;
pub mod run;

pub use file::{parse_problem_file, parse_problem_text, DensityRequest, MarginalDecl, ProblemFile};
pub use run::{run_compare, run_oracle, run_solve, RunOptions, RunStatus, SolveReport};
