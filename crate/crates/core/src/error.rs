// Copyright 2026 The metadyn-close authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("atom count mismatch: expected {expected}, found {found}")]
    AtomCountMismatch { expected: usize, found: usize },

    #[error("degenerate fit: eigenvalue gap {gap:e} too small for rotation derivatives")]
    DegenerateFit { gap: f64 },

    #[error("reference index {index} out of range (N = {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty active set")]
    EmptyActiveSet,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("CV {dim} value {value} outside grid bounds [{min}, {max}]")]
    OutOfGrid {
        dim: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("close-structure state has no fit to the current structure")]
    StateNotReady,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
