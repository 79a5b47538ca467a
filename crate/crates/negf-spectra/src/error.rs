use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid scheme: {}", join(.0))]
    InvalidScheme(Vec<Violation>),
    #[error("degenerate levels {0} and {1} are dipole coupled; raising/lowering split undefined")]
    DegenerateCoupling(usize, usize),
    #[error("physics: {0}")]
    Physics(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::InvalidScheme(_) | Error::DegenerateCoupling(..) | Error::Physics(_) => 3,
            Error::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::InvalidScheme(_) => "invalid_scheme",
            Error::DegenerateCoupling(..) => "degenerate_coupling",
            Error::Physics(_) => "physics",
            Error::Numerical(_) => "numerical",
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
