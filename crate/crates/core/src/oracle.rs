//! Black-box classifier abstraction and query accounting.

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};
use core::time::Duration;

use thiserror::Error;

use crate::image::{Image, Shape};

/// Tolerance on the probability sum of a valid response.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Remote replies summing to 1 within this are renormalised; others are
/// rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("input shape mismatch: oracle expects {expected}, got {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("reply id mismatch: expected {expected}, got {found}")]
    IdMismatch { expected: u64, found: u64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("probability {index} is invalid ({value})")]
    InvalidProbability { index: usize, value: f64 },
    #[error("empty probability vector")]
    Empty,
    #[error("oracle reported an error: {0}")]
    Remote(String),
}

/// Class probabilities returned for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResponse {
    probabilities: Vec<f64>,
    class: usize,
    latency: Option<Duration>,
}

impl OracleResponse {
    /// Validates a probability vector: nonempty, finite, nonnegative and
    /// summing to 1 within [`SUM_TOLERANCE`]. The argmax takes the first
    /// maximum.
    pub fn new(probabilities: Vec<f64>) -> Result<Self, OracleError> {
        if probabilities.is_empty() {
            return Err(OracleError::Empty);
        }
        if let Some((index, &value)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(OracleError::InvalidProbability { index, value });
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(OracleError::NotNormalized { sum });
        }
        let class = argmax(&probabilities);
        Ok(OracleResponse {
            probabilities,
            class,
            latency: None,
        })
    }

    /// Like [`OracleResponse::new`], but first rescales vectors whose sum
    /// is within [`RENORMALIZE_TOLERANCE`] of 1.
    pub fn renormalized(mut probabilities: Vec<f64>) -> Result<Self, OracleError> {
        if let Some((index, &value)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(OracleError::InvalidProbability { index, value });
        }
        let sum: f64 = probabilities.iter().sum();
        if probabilities.is_empty() {
            return Err(OracleError::Empty);
        }
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(OracleError::NotNormalized { sum });
        }
        for p in &mut probabilities {
            *p /= sum;
        }
        Self::new(probabilities)
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Predicted class (argmax).
    pub fn class(&self) -> usize {
        self.class
    }

    pub fn confidence(&self) -> f64 {
        self.probabilities[self.class]
    }

    /// Probability of `class`, 0 when the class is outside the label space.
    pub fn probability(&self, class: usize) -> f64 {
        self.probabilities.get(class).copied().unwrap_or(0.0)
    }

    pub fn num_classes(&self) -> usize {
        self.probabilities.len()
    }

    pub fn latency(&self) -> Option<Duration> {
        self.latency
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Whether an oracle may serve several queries at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    Serial,
    Parallel { max_in_flight: usize },
}

pub trait Oracle: Sync {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError>;

    /// Declared input shape, if the oracle has one.
    fn input_shape(&self) -> Option<Shape> {
        None
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serial
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        (**self).classify(image)
    }

    fn input_shape(&self) -> Option<Shape> {
        (**self).input_shape()
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

impl<O: Oracle + ?Sized + Send> Oracle for alloc::boxed::Box<O> {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        (**self).classify(image)
    }

    fn input_shape(&self) -> Option<Shape> {
        (**self).input_shape()
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

/// Counts every `classify` call, including failed ones.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    queries: AtomicU64,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            queries: AtomicU64::new(0),
        }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn classify(&self, image: &Image) -> Result<OracleResponse, OracleError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.inner.classify(image)
    }

    fn input_shape(&self) -> Option<Shape> {
        self.inner.input_shape()
    }

    fn concurrency(&self) -> Concurrency {
        self.inner.concurrency()
    }
}

/// Runs a batch of independent queries. Results must come back in input
/// order whatever the execution strategy.
pub trait QueryExecutor {
    fn classify_all(&self, oracle: &dyn Oracle, images: &[Image]) -> Vec<Result<OracleResponse, OracleError>>;
}

/// One query at a time, in order. Stops at the first failure.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl QueryExecutor for SerialExecutor {
    fn classify_all(&self, oracle: &dyn Oracle, images: &[Image]) -> Vec<Result<OracleResponse, OracleError>> {
        let mut out = Vec::with_capacity(images.len());
        for image in images {
            let r = oracle.classify(image);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    }
}
