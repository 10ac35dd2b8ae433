//! Likelihood, maximum likelihood fitting, standard errors and reports.

mod fit;
mod gof;
mod hessian;
mod likelihood;
pub mod optimize;
pub mod params;
mod report;

pub use fit::{fit_mle, FitOptions, FitResult, StartOutcome};
pub use gof::{gof_summaries, GofRow};
pub use hessian::{standard_errors, ParamStatus, StdError};
pub use likelihood::{fit_migration, log_likelihood, migration_log_likelihood, LikelihoodData};
pub use report::{deviance, p_value, rescale, Alternative, RescaledReport};
