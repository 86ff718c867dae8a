//! Training configuration.

use crate::error::{Error, Result};

/// Which trainer processes the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    /// Scalar lock-free updates: one dot product and one row write per
    /// (context word, sample) pair.
    Hogwild,
    /// Minibatched updates: the context words of a window share the window's
    /// negative samples, scores are computed as a small matrix product, and
    /// each touched row is written once per batch.
    Hogbatch,
}

impl std::fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainerKind::Hogwild => f.write_str("hogwild"),
            TrainerKind::Hogbatch => f.write_str("hogbatch"),
        }
    }
}

impl std::str::FromStr for TrainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hogwild" => Ok(TrainerKind::Hogwild),
            "hogbatch" => Ok(TrainerKind::Hogbatch),
            other => Err(Error::Config(format!(
                "unknown trainer {other:?}, expected \"hogwild\" or \"hogbatch\""
            ))),
        }
    }
}

/// How the logistic function is evaluated during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmoidMode {
    /// `1 / (1 + exp(-x))` computed directly. Default, and the mode every
    /// correctness test uses.
    #[default]
    Exact,
    /// Piecewise-linear lookup over \[-6, 6\] with 1000 bins, clamped to 0/1
    /// outside. Gradient contributions are skipped entirely when the score
    /// magnitude exceeds 6, matching classic lookup-table trainers.
    Table,
}

impl std::fmt::Display for SigmoidMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmoidMode::Exact => f.write_str("exact"),
            SigmoidMode::Table => f.write_str("table"),
        }
    }
}

impl std::str::FromStr for SigmoidMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SigmoidMode::Exact),
            "table" => Ok(SigmoidMode::Table),
            other => Err(Error::Config(format!(
                "unknown sigmoid mode {other:?}, expected \"exact\" or \"table\""
            ))),
        }
    }
}

/// Hyperparameters shared by every trainer.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    /// Embedding dimensionality.
    pub dim: usize,
    /// Negative samples per (window) target.
    pub negative: usize,
    /// Maximum window half-width; the effective half-width is drawn per
    /// position from `1..=window`.
    pub window: u32,
    /// Frequent-word subsampling threshold (0 disables subsampling).
    pub sample: f64,
    /// Minimum corpus frequency for a token to enter the vocabulary.
    pub min_count: u64,
    /// Initial learning rate; decays linearly to a floor of 1e-4 of itself.
    pub alpha0: f64,
    /// Number of passes over the corpus.
    pub iterations: usize,
    /// Trainer threads (per worker, when combined with the distributed
    /// simulator).
    pub threads: usize,
    /// Which trainer to run.
    pub trainer: TrainerKind,
    /// Consecutive windows fused into one batched step (hogbatch only).
    pub batch_windows: usize,
    /// Logistic evaluation mode.
    pub sigmoid_mode: SigmoidMode,
    /// Exponent applied to counts when building the negative-sample table.
    pub negative_power: f64,
    /// Number of slots in the negative-sample table.
    pub table_size: usize,
    /// Seed for all pseudo-randomness; thread `t` uses `seed + t`.
    pub seed: u64,
    /// Allow a drawn negative sample to equal the window's target word
    /// instead of redrawing.
    pub allow_target_negative: bool,
    /// Save vectors in the binary format instead of text.
    pub binary_output: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 100,
            negative: 5,
            window: 5,
            sample: 1e-4,
            min_count: 5,
            alpha0: 0.025,
            iterations: 5,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            trainer: TrainerKind::Hogbatch,
            batch_windows: 1,
            sigmoid_mode: SigmoidMode::Exact,
            negative_power: 0.75,
            table_size: 100_000_000,
            seed: 1,
            allow_target_negative: false,
            binary_output: false,
        }
    }
}

impl TrainingConfig {
    /// Rejects configurations no trainer can run with.
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: impl Into<String>) -> Result<()> {
            Err(Error::Config(msg.into()))
        }
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.iterations == 0 {
            return bad("iter must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.batch_windows == 0 {
            return bad("batch-windows must be at least 1");
        }
        if self.table_size == 0 {
            return bad("table-size must be at least 1");
        }
        if !(self.sample >= 0.0) {
            return bad("sample must be non-negative");
        }
        if !(self.alpha0 > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.negative_power > 0.0) {
            return bad("negative-power must be positive");
        }
        Ok(())
    }
}
