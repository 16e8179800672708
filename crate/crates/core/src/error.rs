use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("direction is not a unit vector (|t| = {norm}); normalize it first")]
    NotUnit { norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spacing h = {0} is not of the form 1/k for a positive integer k")]
    Spacing(f64),

    #[error("lattice would hold {count} nodes, above the cap of {cap}")]
    TooManyNodes { count: usize, cap: usize },

    #[error(
        "no lattice path within distance {bound} of the line; best achievable deviation is {best}"
    )]
    NoStaircase { bound: f64, best: f64 },

    #[error("chain has nonzero boundary at {nodes} node(s)")]
    NotClosed { nodes: usize },

    #[error("push-forward breaks adjacency: edge {u}->{v} maps to non-adjacent nodes {fu}, {fv}")]
    NotAdjacent {
        u: usize,
        v: usize,
        fu: usize,
        fv: usize,
    },

    #[error("push-forward map is not injective on node {0}")]
    NotInjective(usize),

    #[error("operation unsupported: {0}")]
    Unsupported(String),

    #[error("flow problem infeasible: {0}")]
    Infeasible(String),

    #[error("exact solver caps exceeded: {free_edges} free edges (cap {edge_cap}), {states} states per edge (cap {state_cap})")]
    ExactCapExceeded {
        free_edges: usize,
        edge_cap: usize,
        states: usize,
        state_cap: usize,
    },

    #[error("table has no entry for b = {b:?}, t = {t:?}")]
    MissingEntry { b: Vec<i64>, t: Vec<f64> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{0} verification suites failed")]
    VerificationFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
