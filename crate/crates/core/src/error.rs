use std::path::PathBuf;

use thiserror::Error;

use crate::env::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),
    #[error("clock cycle length must be at least 1")]
    ZeroKappa,
    #[error("no outbox supplied for correct node {0}")]
    MissingOutbox(usize),
    #[error("outbox of node {node} has {got} destinations, expected {expected}")]
    OutboxShape {
        node: usize,
        got: usize,
        expected: usize,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(String),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
