use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Systems(#[from] mdlsys::systems::SystemsError),
    #[error(transparent)]
    Stein(#[from] mdlsys::stein::SteinError),
    #[error(transparent)]
    Spaces(#[from] mdlsys::spaces::SpacesError),
    #[error(transparent)]
    Kernels(#[from] mdlsys::kernels::KernelsError),
    #[error(transparent)]
    Applications(#[from] mdlsys::applications::ApplicationsError),
    #[error(transparent)]
    Combinatorics(#[from] mdlsys::combinatorics::CombinatoricsError),
    #[error(transparent)]
    Numerics(#[from] mdlsys::numerics::NumericsError),
}

use mdlsys::applications::ApplicationsError;
use mdlsys::kernels::KernelsError;
use mdlsys::numerics::NumericsError;
use mdlsys::spaces::SpacesError;
use mdlsys::stein::SteinError;
use mdlsys::systems::SystemsError;

fn systems_hypothesis(e: &SystemsError) -> bool {
    matches!(
        e,
        SystemsError::NonCommutative { .. } | SystemsError::SingularResolvent
    )
}

fn numerics_hypothesis(e: &NumericsError) -> bool {
    matches!(e, NumericsError::Indefinite { .. })
}

fn stein_hypothesis(e: &SteinError) -> bool {
    match e {
        SteinError::NotContractive { .. } | SteinError::NotConverged(_) => true,
        SteinError::Numerics(n) => numerics_hypothesis(n),
        SteinError::Systems(s) => systems_hypothesis(s),
        _ => false,
    }
}

fn spaces_hypothesis(e: &SpacesError) -> bool {
    match e {
        SpacesError::NotInvariant { .. } | SpacesError::Divergent(_) => true,
        SpacesError::Numerics(n) => numerics_hypothesis(n),
        SpacesError::Stein(s) => stein_hypothesis(s),
        SpacesError::Systems(s) => systems_hypothesis(s),
        _ => false,
    }
}

impl CliError {
    /// True when the input was well formed but a mathematical hypothesis
    /// of the requested analysis failed.
    pub fn is_hypothesis_failure(&self) -> bool {
        match self {
            CliError::Systems(e) => systems_hypothesis(e),
            CliError::Stein(e) => stein_hypothesis(e),
            CliError::Spaces(e) => spaces_hypothesis(e),
            CliError::Numerics(e) => numerics_hypothesis(e),
            CliError::Kernels(e) => match e {
                KernelsError::IndefiniteWeight { .. }
                | KernelsError::SingularGramian { .. }
                | KernelsError::Boundary { .. }
                | KernelsError::Unobservable { .. } => true,
                KernelsError::Numerics(n) => numerics_hypothesis(n),
                KernelsError::Stein(s) => stein_hypothesis(s),
                KernelsError::Systems(s) => systems_hypothesis(s),
                _ => false,
            },
            CliError::Applications(e) => match e {
                ApplicationsError::NotStrict { .. } | ApplicationsError::SingularGramian => true,
                ApplicationsError::Numerics(n) => numerics_hypothesis(n),
                ApplicationsError::Spaces(s) => spaces_hypothesis(s),
                ApplicationsError::Systems(s) => systems_hypothesis(s),
                _ => false,
            },
            _ => false,
        }
    }
}
