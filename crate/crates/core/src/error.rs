use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid geometry, topology, workload or sweep parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A trace line that does not follow the `<core_id> <address>` grammar.
    #[error("trace parse error at line {line}: {reason}: {text:?}")]
    Parse {
        line: usize,
        text: String,
        reason: String,
    },

    /// The engine hit its cycle cap before every core retired its stream.
    #[error("deadlock: no completion after {cycle} cycles (per-core cursors {cursors:?})")]
    Deadlock { cycle: u64, cursors: Vec<usize> },

    /// A sweep point failed; wraps the underlying error.
    #[error("sharing degree {degree}: {source}")]
    Sweep {
        degree: usize,
        #[source]
        source: Box<SimError>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
