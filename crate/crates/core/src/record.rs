//! Per-iteration convergence log shared by both solvers.

/// One logged iterate. Iteration `0` is the initial guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconRecord {
    pub iter: usize,
    pub objective: f64,
    pub datafit: f64,
    pub penalty: f64,
    pub rmse: Option<f64>,
    pub seconds: f64,
}

/// Source of elapsed time for the log. The core has no clock of its own.
pub trait Clock {
    fn elapsed_seconds(&mut self) -> f64;
}

/// Reports zero elapsed time; keeps logs bit-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn elapsed_seconds(&mut self) -> f64 {
        0.0
    }
}

impl<F: FnMut() -> f64> Clock for F {
    fn elapsed_seconds(&mut self) -> f64 {
        self()
    }
}
