use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the simulator and the analysis routines.
///
/// Messages carry the name of the module that raised them so that a
/// front end can surface them verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("params: {0}")]
    Params(String),

    #[error("lattice: coordinate {coords:?} outside torus {sides:?}")]
    Coordinate { coords: Vec<i64>, sides: Vec<usize> },

    #[error("lattice: site index {site} outside torus with {len} sites")]
    SiteIndex { site: usize, len: usize },

    #[error("lattice: site {site} is {actual}, expected {expected}")]
    State {
        site: usize,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("lattice: site {target} is not a neighbor of {parent}")]
    Topology { parent: usize, target: usize },

    #[error("lattice: malformed occupancy dump: {0}")]
    Dump(String),

    #[error("engine: total rate is zero, the configuration is absorbing")]
    Absorbing,

    #[error("engine: {0}")]
    Stop(String),

    #[error("{module}: unsupported: {what}")]
    Unsupported { module: &'static str, what: String },

    #[error("coupling: parameter order violated: {0}")]
    ParameterOrder(String),

    #[error("meanfield: {0}")]
    MeanField(String),

    #[error("experiments: {0}")]
    Experiment(String),
}

impl Error {
    pub(crate) fn unsupported(module: &'static str, what: impl Into<String>) -> Self {
        Error::Unsupported {
            module,
            what: what.into(),
        }
    }
}
