//! In-process simulation of data-parallel training: W full model replicas
//! train on disjoint corpus shards and periodically meet at a barrier
//! where every parameter is replaced by its across-replica mean.
//!
//! The simulation is barrier-synchronous and the workers' rounds run one
//! after another inside the caller's process, so a run is deterministic
//! for a fixed configuration (with one trainer thread per worker); what
//! is being simulated is the information flow of periodic model
//! averaging, not cluster timing. All workers share one global
//! learning-rate counter, so the rate decays with overall progress
//! exactly as in a single-process run. A single worker with any sync
//! period reproduces the non-distributed trainer bit for bit.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::TrainingConfig;
use crate::corpus::{partition_byte_ranges, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{EmbeddingModel, LearningRate};
use crate::sampling::NegativeSampleTable;
use crate::scalar::Scalar;
use crate::trainer::{RoundLimit, Session, TrainingReport};

/// When replicas meet for averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncPeriod {
    /// After every epoch of every worker.
    EveryEpoch,
    /// After each worker processes this many words (checked at line
    /// boundaries).
    Words(u64),
}

/// How replicas are combined at a barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reducer {
    /// Element-wise arithmetic mean.
    #[default]
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncPolicy {
    pub period: SyncPeriod,
    pub reducer: Reducer,
}

impl SyncPolicy {
    pub fn every_epoch() -> SyncPolicy {
        SyncPolicy { period: SyncPeriod::EveryEpoch, reducer: Reducer::Average }
    }

    pub fn words(period: u64) -> SyncPolicy {
        SyncPolicy { period: SyncPeriod::Words(period), reducer: Reducer::Average }
    }

    pub fn validate(&self) -> Result<()> {
        if let SyncPeriod::Words(0) = self.period {
            return Err(Error::Config("sync period must be at least 1 word".into()));
        }
        Ok(())
    }
}

/// One synchronization barrier in a run's log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoundLog {
    pub round: usize,
    /// Seconds since the run started.
    pub at_seconds: f64,
    /// Global words processed when the barrier fired.
    pub words_total: u64,
}

/// Per-worker training reports plus the synchronization history.
#[derive(Debug, Clone, Serialize)]
pub struct DistributedReport {
    pub workers: usize,
    /// Sum over workers; always shard words x epochs, independent of W.
    pub words_processed: u64,
    pub wall_seconds: f64,
    pub worker_reports: Vec<TrainingReport>,
    pub sync_rounds: Vec<RoundLog>,
}

/// Replaces every parameter of every replica with the across-replica
/// mean.
///
/// The mean of each element is computed over a sorted copy of the W
/// values, making the result exactly independent of worker order. Cells
/// on which all replicas already agree are left untouched, so averaging
/// a set of identical replicas is exactly the identity and synchronizing
/// twice in a row changes nothing.
pub fn synchronize<F: Scalar>(replicas: &[EmbeddingModel<F>]) -> Result<()> {
    let Some(first) = replicas.first() else {
        return Ok(());
    };
    for (w, r) in replicas.iter().enumerate() {
        if r.vocab_size() != first.vocab_size() || r.dim() != first.dim() {
            return Err(Error::ShapeMismatch(format!(
                "replica 0 is {}x{}, replica {w} is {}x{}",
                first.vocab_size(),
                first.dim(),
                r.vocab_size(),
                r.dim()
            )));
        }
    }
    if replicas.len() == 1 {
        return Ok(());
    }
    let count = F::from_f64(replicas.len() as f64);
    let mut values: Vec<F> = Vec::with_capacity(replicas.len());
    for matrix in 0..2 {
        for r in 0..first.vocab_size() as u32 {
            for d in 0..first.dim() {
                values.clear();
                for m in replicas {
                    let mat = if matrix == 0 { &m.input } else { &m.output };
                    values.push(mat.get(r, d));
                }
                if values.windows(2).all(|w| w[0] == w[1]) {
                    continue;
                }
                values.sort_unstable_by(|a, b| {
                    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
                });
                let sum = values.iter().fold(F::zero(), |acc, &v| acc + v);
                let mean = sum / count;
                for m in replicas {
                    let mat = if matrix == 0 { &m.input } else { &m.output };
                    mat.set(r, d, mean);
                }
            }
        }
    }
    Ok(())
}

/// Trains `workers` model replicas over disjoint shards of `corpus`,
/// averaging them on `policy`'s period and once more at the end. On
/// return `model` holds the final averaged parameters.
pub fn run_distributed<F: Scalar>(
    model: &EmbeddingModel<F>,
    vocab: &Vocabulary,
    table: &NegativeSampleTable,
    corpus: impl AsRef<Path>,
    config: &TrainingConfig,
    workers: usize,
    policy: &SyncPolicy,
) -> Result<DistributedReport> {
    let corpus = corpus.as_ref();
    config.validate()?;
    policy.validate()?;
    if workers == 0 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let Reducer::Average = policy.reducer;

    let shards = partition_byte_ranges(corpus, workers)?;
    let replicas: Vec<EmbeddingModel<F>> = (0..workers).map(|_| model.clone()).collect();
    let lr = LearningRate::new(
        config.alpha0,
        config.iterations as u64 * vocab.total_words(),
    );
    let mut sessions: Vec<Session<'_, F>> = Vec::with_capacity(workers);
    for (w, (&shard, replica)) in shards.iter().zip(&replicas).enumerate() {
        sessions.push(Session::new(
            replica,
            vocab,
            table,
            corpus,
            shard,
            config,
            &lr,
            (w * config.threads) as u64,
        )?);
    }

    let limit = match policy.period {
        SyncPeriod::EveryEpoch => RoundLimit::Epoch,
        SyncPeriod::Words(p) => {
            let threads = config.threads as u64;
            RoundLimit::Words(((p + threads - 1) / threads).max(1))
        }
    };

    let started = Instant::now();
    let mut sync_rounds = Vec::new();
    let mut round = 0usize;
    while sessions.iter().any(|s| !s.finished()) {
        for session in sessions.iter_mut() {
            if !session.finished() {
                session.run_round(limit)?;
            }
        }
        synchronize(&replicas)?;
        sync_rounds.push(RoundLog {
            round,
            at_seconds: started.elapsed().as_secs_f64(),
            words_total: lr.words_done(),
        });
        round += 1;
    }

    model.copy_from(&replicas[0]);
    let worker_reports: Vec<TrainingReport> = sessions.iter().map(|s| s.report()).collect();
    Ok(DistributedReport {
        workers,
        words_processed: worker_reports.iter().map(|r| r.words_processed).sum(),
        wall_seconds: started.elapsed().as_secs_f64(),
        worker_reports,
        sync_rounds,
    })
}
