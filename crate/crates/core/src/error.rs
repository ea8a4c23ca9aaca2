// Copyright 2026 The qdrift Developers
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("fit did not converge: {message} (residual rms {residual_rms:.3e})")]
    Fit { message: String, residual_rms: f64 },

    #[error("ensemble stopped after {completed} of {total} realizations: {source}")]
    Partial {
        completed: u64,
        total: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short category name, used for CLI exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Geometry(_) => "geometry",
            Error::Internal(_) => "internal",
            Error::Fit { .. } => "fit",
            Error::Partial { .. } => "partial",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
