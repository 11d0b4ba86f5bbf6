use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("model: {0}")]
    Model(String),
    #[error("conjugate window too small: {0}")]
    ConjugateWindow(String),
    #[error("trace undefined here: {0}")]
    TraceUndefined(String),
    #[error("A5 violated: g({x:?}) = {g} exceeds the boundary minimum {bbar}")]
    CompatibilityViolated { x: [f64; 2], g: f64, bbar: f64 },
    #[error("grid: {0}")]
    Grid(String),
    #[error("CFL violated: foot reach {reach} exceeds one cell {h}")]
    Cfl { reach: f64, h: f64 },
    #[error("admissible grid graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("field was solved without traceback enabled")]
    NoTraceback,
    #[error("query: {0}")]
    Query(String),
    #[error("window too small for the reachable cone: {0}")]
    WindowTooSmall(String),
    #[error("node budget exceeded: {needed} nodes requested, budget {budget}")]
    NodeBudget { needed: usize, budget: usize },
    #[error("velocity {0:?} outside the table range")]
    OutOfTable([f64; 2]),
    #[error("search does not cover the cone: {0}")]
    ConeNotCovered(String),
    #[error("experiment: {0}")]
    Experiment(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },
    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
