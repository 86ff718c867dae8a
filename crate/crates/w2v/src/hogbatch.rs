//! Batched trainer: one sentence position becomes a small dense problem -
//! the N context rows against the target row plus K shared negative rows -
//! so the inner loop runs as matrix multiplies and each touched model row
//! is written back exactly once per batch.
//!
//! Compared with the per-pair kernel this changes two things. First, the
//! K negatives are drawn once per position and shared by every context
//! word, instead of per (context, round). Second, all reads come from row
//! snapshots taken when the batch is gathered, so updates within a batch
//! see batch-start values ("stale reads"); writeback to the shared model
//! is lock-free, exactly like the baseline, just at batch granularity.
//!
//! For a batch of N inputs and K negatives the row writes drop from
//! `N*(K+1) + N` to `N + (K+1)`.

use crate::config::TrainingConfig;
use crate::corpus::Vocabulary;
use crate::error::Result;
use crate::hogwild::StepStats;
use crate::model::EmbeddingModel;
use crate::sampling::{NegativeSampleTable, Rng, Sigmoid};
use crate::scalar::Scalar;
use crate::trainer::{self, TrainingReport};
use std::path::Path;

/// One position's batch: N input (context) word ids against K+1 output
/// word ids, where `output_ids[0]` is the true target (label 1) and the
/// rest are shared negatives (label 0).
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub input_ids: Vec<u32>,
    pub output_ids: Vec<u32>,
    /// `labels[j]` is true only for `j = 0`.
    pub labels: Vec<bool>,
}

impl Minibatch {
    /// `output_ids[0]` is taken as the positive target; all later ids are
    /// negatives.
    pub fn new(input_ids: Vec<u32>, output_ids: Vec<u32>) -> Minibatch {
        assert!(!input_ids.is_empty());
        assert!(!output_ids.is_empty());
        let mut labels = vec![false; output_ids.len()];
        labels[0] = true;
        Minibatch {
            input_ids,
            output_ids,
            labels,
        }
    }

    pub fn n(&self) -> usize {
        self.input_ids.len()
    }

    pub fn outputs(&self) -> usize {
        self.output_ids.len()
    }
}

/// Extracts the batch for `sentence[position]`: inputs are the words
/// within `reach` positions on either side (the position itself excluded),
/// outputs are the target plus `negative` samples drawn once and shared.
///
/// Returns `None` without consuming any randomness when no context
/// survives, so the caller's random stream stays aligned with the
/// per-pair trainer, which also draws nothing for an empty window.
pub fn build_minibatch(
    sentence: &[u32],
    position: usize,
    reach: u32,
    negative: u32,
    table: &NegativeSampleTable,
    rng: &mut Rng,
    allow_target_negative: bool,
) -> Option<Minibatch> {
    let reach = reach as usize;
    let lo = position.saturating_sub(reach);
    let hi = (position + reach).min(sentence.len().saturating_sub(1));
    if lo == hi {
        return None;
    }
    let mut input_ids = Vec::with_capacity(hi - lo);
    for p in lo..=hi {
        if p != position {
            input_ids.push(sentence[p]);
        }
    }
    let target = sentence[position];
    let mut output_ids = Vec::with_capacity(negative as usize + 1);
    output_ids.push(target);
    for _ in 0..negative {
        let neg = if allow_target_negative {
            table.sample(rng)
        } else {
            table.sample_excluding(rng, target)
        };
        output_ids.push(neg);
    }
    Some(Minibatch::new(input_ids, output_ids))
}

/// Span of one batch inside the workspace's concatenated buffers: `a_row`
/// and `b_row` are row offsets into the snapshot/id vectors, `c_start` an
/// element offset into the score/error vectors.
#[derive(Debug, Clone, Copy)]
struct Block {
    a_row: usize,
    n: usize,
    b_row: usize,
    m: usize,
    c_start: usize,
}

/// Thread-private scratch for one or more gathered batches.
///
/// Several consecutive positions' batches can be loaded before a single
/// forward/error/update pass; their score matrices are independent blocks
/// (a position's inputs never score against another position's outputs),
/// evaluated together as one batched multiply.
pub struct BatchWorkspace<F: Scalar> {
    dim: usize,
    /// Input-row snapshots, concatenated, row-major.
    a: Vec<F>,
    /// Output-row snapshots, concatenated, row-major.
    b: Vec<F>,
    /// Score blocks, concatenated; block p is `n_p x m_p`, row-major.
    c: Vec<F>,
    /// Error blocks, same layout as `c`.
    e: Vec<F>,
    input_ids: Vec<u32>,
    output_ids: Vec<u32>,
    positive: Vec<bool>,
    blocks: Vec<Block>,
    g_in: Vec<F>,
    g_out: Vec<F>,
}

impl<F: Scalar> BatchWorkspace<F> {
    pub fn new(dim: usize) -> BatchWorkspace<F> {
        BatchWorkspace {
            dim,
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            e: Vec::new(),
            input_ids: Vec::new(),
            output_ids: Vec::new(),
            positive: Vec::new(),
            blocks: Vec::new(),
            g_in: Vec::new(),
            g_out: Vec::new(),
        }
    }

    /// Drops all pending batches, keeping allocations.
    pub fn clear(&mut self) {
        self.a.clear();
        self.b.clear();
        self.c.clear();
        self.e.clear();
        self.input_ids.clear();
        self.output_ids.clear();
        self.positive.clear();
        self.blocks.clear();
    }

    pub fn pending_batches(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Gathers value snapshots of the batch's rows. All snapshots for a
    /// flush are taken here, before any of the flush's writes.
    pub fn load(&mut self, model: &EmbeddingModel<F>, batch: &Minibatch) {
        let dim = self.dim;
        debug_assert_eq!(model.dim(), dim);
        let block = Block {
            a_row: self.input_ids.len(),
            n: batch.n(),
            b_row: self.output_ids.len(),
            m: batch.outputs(),
            c_start: self.c.len(),
        };
        for &id in &batch.input_ids {
            let row = model.input.row(id);
            for d in 0..dim {
                self.a.push(F::load(&row[d]));
            }
        }
        for &id in &batch.output_ids {
            let row = model.output.row(id);
            for d in 0..dim {
                self.b.push(F::load(&row[d]));
            }
        }
        self.input_ids.extend_from_slice(&batch.input_ids);
        self.output_ids.extend_from_slice(&batch.output_ids);
        self.positive.extend_from_slice(&batch.labels);
        let cells = block.n * block.m;
        self.c.resize(self.c.len() + cells, F::zero());
        self.e.resize(self.e.len() + cells, F::zero());
        self.blocks.push(block);
    }

    /// Fills every score block: `C[i][j] = dot(A_i, B_j)` on the
    /// snapshots. Each cell accumulates its products in ascending
    /// dimension order, like the per-pair kernel's dot product; the loop
    /// runs the batch dimension innermost so it vectorizes.
    pub fn forward_scores(&mut self) {
        let dim = self.dim;
        for blk in &self.blocks {
            let c = &mut self.c[blk.c_start..blk.c_start + blk.n * blk.m];
            for v in c.iter_mut() {
                *v = F::zero();
            }
            let b = &self.b[blk.b_row * dim..(blk.b_row + blk.m) * dim];
            for i in 0..blk.n {
                let a_row = &self.a[(blk.a_row + i) * dim..(blk.a_row + i + 1) * dim];
                let c_row = &mut c[i * blk.m..(i + 1) * blk.m];
                for (d, &a_id) in a_row.iter().enumerate() {
                    for (j, cell) in c_row.iter_mut().enumerate() {
                        *cell = *cell + a_id * b[j * dim + d];
                    }
                }
            }
        }
    }

    /// `E[i][j] = label_j - sigmoid(C[i][j])`, or exactly zero where the
    /// table-mode sigmoid skips out-of-range scores.
    pub fn compute_errors(&mut self, sigmoid: &Sigmoid<F>) {
        for blk in &self.blocks {
            for i in 0..blk.n {
                for j in 0..blk.m {
                    let idx = blk.c_start + i * blk.m + j;
                    let positive = self.positive[blk.b_row + j];
                    self.e[idx] = sigmoid.error(positive, self.c[idx]).unwrap_or(F::zero());
                }
            }
        }
    }

    /// Scatter-adds the batch gradients into the shared model and returns
    /// the number of rows written.
    ///
    /// Per block, in load order: the input-side gradient rows are `G_in[i]
    /// = sum_j E[i][j] * B_j` (raw errors; scaled by `alpha` only at the
    /// scatter), the output-side rows are `G_out[j] = sum_i (alpha *
    /// E[i][j]) * A_i` (alpha folded per term). Both are computed wholly
    /// from the snapshots, then added to the model - input rows in batch
    /// order, then output rows in batch order. A row id appearing twice
    /// receives both occurrences' gradients, one add each.
    pub fn apply_updates(&mut self, model: &EmbeddingModel<F>, alpha: F) -> u64 {
        let dim = self.dim;
        let mut rows_written = 0u64;
        for blk in &self.blocks {
            self.g_in.clear();
            self.g_in.resize(blk.n * dim, F::zero());
            self.g_out.clear();
            self.g_out.resize(blk.m * dim, F::zero());
            for i in 0..blk.n {
                let e_row = &self.e[(blk.c_start + i * blk.m)..(blk.c_start + (i + 1) * blk.m)];
                let a_row = &self.a[(blk.a_row + i) * dim..(blk.a_row + i + 1) * dim];
                let g_in_row = &mut self.g_in[i * dim..(i + 1) * dim];
                for (j, &err) in e_row.iter().enumerate() {
                    let b_row = &self.b[(blk.b_row + j) * dim..(blk.b_row + j + 1) * dim];
                    for d in 0..dim {
                        g_in_row[d] = g_in_row[d] + err * b_row[d];
                    }
                    let g = alpha * err;
                    let g_out_row = &mut self.g_out[j * dim..(j + 1) * dim];
                    for d in 0..dim {
                        g_out_row[d] = g_out_row[d] + g * a_row[d];
                    }
                }
            }
            for i in 0..blk.n {
                let id = self.input_ids[blk.a_row + i];
                let row = model.input.row(id);
                let g_in_row = &self.g_in[i * dim..(i + 1) * dim];
                for d in 0..dim {
                    F::store(&row[d], F::load(&row[d]) + alpha * g_in_row[d]);
                }
                rows_written += 1;
            }
            for j in 0..blk.m {
                let id = self.output_ids[blk.b_row + j];
                let row = model.output.row(id);
                let g_out_row = &self.g_out[j * dim..(j + 1) * dim];
                for d in 0..dim {
                    F::store(&row[d], F::load(&row[d]) + g_out_row[d]);
                }
                rows_written += 1;
            }
        }
        rows_written
    }

    /// Score block `p` as `(rows, cols, values)`.
    pub fn scores(&self, p: usize) -> (usize, usize, &[F]) {
        let blk = &self.blocks[p];
        (blk.n, blk.m, &self.c[blk.c_start..blk.c_start + blk.n * blk.m])
    }

    /// Error block `p` as `(rows, cols, values)`.
    pub fn errors(&self, p: usize) -> (usize, usize, &[F]) {
        let blk = &self.blocks[p];
        (blk.n, blk.m, &self.e[blk.c_start..blk.c_start + blk.n * blk.m])
    }
}

/// Runs one fused pass - gather, forward, errors, update - over a group
/// of batches and reports its work counters. The whole group counts as a
/// single batched-multiply call.
pub fn train_positions<F: Scalar>(
    model: &EmbeddingModel<F>,
    batches: &[Minibatch],
    workspace: &mut BatchWorkspace<F>,
    sigmoid: &Sigmoid<F>,
    alpha: F,
) -> StepStats {
    let mut stats = StepStats::default();
    if batches.is_empty() {
        return stats;
    }
    workspace.clear();
    for batch in batches {
        workspace.load(model, batch);
        stats.dot_products += (batch.n() * batch.outputs()) as u64;
    }
    workspace.forward_scores();
    stats.gemm_calls += 1;
    workspace.compute_errors(sigmoid);
    stats.rows_written += workspace.apply_updates(model, alpha);
    stats
}

/// Trains `model` on `corpus` with the batched kernel, using
/// `config.threads` shard-parallel threads.
pub fn run_hogbatch(
    model: &EmbeddingModel<f32>,
    vocab: &Vocabulary,
    table: &NegativeSampleTable,
    corpus: impl AsRef<Path>,
    config: &TrainingConfig,
) -> Result<TrainingReport> {
    let mut config = config.clone();
    config.trainer = crate::config::TrainerKind::Hogbatch;
    trainer::run(model, vocab, table, corpus.as_ref(), &config)
}
