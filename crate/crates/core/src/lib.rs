//! Small-time local attainability of smooth targets for nonlinear control
//! systems, certified from point data through switched-trajectory Taylor
//! coefficients.
//!
//! Layers, bottom up: [`expr`] and [`jet`] supply derivative data,
//! [`hamiltonian`] the ⊞-calculus, [`span`] and [`petrov`] the linear
//! algebra, [`engine`] the certificates, [`lab`] numerical evidence, and
//! [`config`] with [`report`] the batch front end.

pub mod config;
pub mod engine;
pub mod expr;
pub mod hamiltonian;
pub mod identities;
pub mod jet;
pub mod lab;
pub mod lp;
pub mod petrov;
pub mod report;
pub mod sampling;
pub mod span;

pub use config::{load_config, parse_config, AnalysisConfig, ConfigError, Task};
pub use engine::{
    certify, search_and_certify, ControlSystem, EngineError, EngineOptions, GroupSpec, ManifoldVariant,
    StlaCertificate, Structure, TargetDef, TargetKind,
};
pub use expr::{parse, Expr, ExprError};
pub use jet::JetError;
pub use lab::LabError;
pub use report::{run, write_report, Report};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
