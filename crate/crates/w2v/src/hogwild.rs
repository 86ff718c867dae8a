//! Baseline trainer: the classic per-pair skip-gram negative-sampling
//! update, applied window by window with lock-free writes to the shared
//! model.
//!
//! For every input (context) word the kernel runs `K+1` rounds - the real
//! target first, then `K` freshly sampled negatives - and for each round
//! computes one dot product and writes one output row. The input row is
//! written once per input word, after its rounds. Parallelism comes from
//! running this kernel on disjoint corpus shards with unsynchronized
//! writes; see the module-level notes on [`crate::model`].

use crate::config::TrainingConfig;
use crate::corpus::Vocabulary;
use crate::error::Result;
use crate::model::EmbeddingModel;
use crate::sampling::{NegativeSampleTable, Rng, Sigmoid};
use crate::scalar::Scalar;
use crate::trainer::{self, TrainingReport};
use std::path::Path;

/// One training position: the word at the position (`target`) plus the
/// surviving context words around it (`inputs`). The position itself is
/// never in `inputs`, though the same token id may legitimately recur.
#[derive(Debug, Clone, Copy)]
pub struct WindowTask<'a> {
    pub target: u32,
    pub inputs: &'a [u32],
}

/// Work counters for one or more training steps.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct StepStats {
    /// Dot products evaluated (one per round).
    pub dot_products: u64,
    /// Model rows written back (each `+=` of a full row counts once).
    pub rows_written: u64,
    /// Batched multiply calls issued (always zero for this trainer).
    pub gemm_calls: u64,
}

impl StepStats {
    pub fn merge(&mut self, other: StepStats) {
        self.dot_products += other.dot_products;
        self.rows_written += other.rows_written;
        self.gemm_calls += other.gemm_calls;
    }
}

/// Applies the per-pair update for every input word of `task`.
///
/// Per input word: a temporary gradient buffer is zeroed; then `K+1`
/// rounds run, round 0 against `task.target` with label 1 and rounds
/// `1..=K` against freshly drawn negatives with label 0. Each round takes
/// the dot product of the live input and output rows, forms
/// `err = label - sigmoid(dot)`, accumulates `err * output_row` into the
/// temporary *before* updating the output row by `alpha * err *
/// input_row`. After the rounds the input row is updated by `alpha *
/// temporary`. When the sigmoid runs in table mode, rounds whose dot
/// falls outside the table range contribute nothing.
///
/// `temp` is a caller-owned scratch buffer (resized to `dim` here) so the
/// hot loop never allocates.
pub fn train_window<F: Scalar>(
    model: &EmbeddingModel<F>,
    sigmoid: &Sigmoid<F>,
    table: &NegativeSampleTable,
    rng: &mut Rng,
    alpha: F,
    task: WindowTask,
    negative: u32,
    allow_target_negative: bool,
    temp: &mut Vec<F>,
) -> StepStats {
    let dim = model.dim();
    temp.resize(dim, F::zero());
    let mut stats = StepStats::default();
    debug_assert!(!task.inputs.is_empty());

    for &input in task.inputs {
        let in_row = model.input.row(input);
        for t in temp.iter_mut() {
            *t = F::zero();
        }
        for k in 0..=negative {
            let (chosen, positive) = if k == 0 {
                (task.target, true)
            } else if allow_target_negative {
                (table.sample(rng), false)
            } else {
                (table.sample_excluding(rng, task.target), false)
            };
            let out_row = model.output.row(chosen);
            let mut inn = F::zero();
            for d in 0..dim {
                inn = inn + F::load(&in_row[d]) * F::load(&out_row[d]);
            }
            stats.dot_products += 1;
            let Some(err) = sigmoid.error(positive, inn) else {
                continue;
            };
            for (d, t) in temp.iter_mut().enumerate() {
                *t = *t + err * F::load(&out_row[d]);
            }
            let g = alpha * err;
            for d in 0..dim {
                let cell = &out_row[d];
                F::store(cell, F::load(cell) + g * F::load(&in_row[d]));
            }
            stats.rows_written += 1;
        }
        for (d, t) in temp.iter().enumerate() {
            let cell = &in_row[d];
            F::store(cell, F::load(cell) + alpha * *t);
        }
        stats.rows_written += 1;
    }
    stats
}

/// Trains `model` on `corpus` with the per-pair kernel, using
/// `config.threads` shard-parallel threads.
pub fn run_hogwild(
    model: &EmbeddingModel<f32>,
    vocab: &Vocabulary,
    table: &NegativeSampleTable,
    corpus: impl AsRef<Path>,
    config: &TrainingConfig,
) -> Result<TrainingReport> {
    let mut config = config.clone();
    config.trainer = crate::config::TrainerKind::Hogwild;
    trainer::run(model, vocab, table, corpus.as_ref(), &config)
}
