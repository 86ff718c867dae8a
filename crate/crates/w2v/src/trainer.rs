//! Shared training driver for both trainers.
//!
//! A [`Session`] owns per-thread cursors over a byte-sharded corpus and
//! advances them in rounds. A round runs every thread in parallel until a
//! limit is hit - a word budget, the end of the current epoch, or full
//! completion - and threads pause only at line boundaries so a later round
//! resumes exactly where the previous one stopped. Running a session to
//! completion in one round or in many produces the same model bit for bit
//! (single-threaded), which is what lets the distributed simulation
//! interleave training rounds with synchronization barriers without
//! perturbing the underlying trainer.
//!
//! Both trainers share one traversal: per sentence, words are counted and
//! subsampled; per surviving position, one window-size draw is made and
//! then either the per-pair kernel runs directly or a minibatch is queued
//! for a batched flush. Keeping the draw discipline identical is what
//! makes the two trainers comparable run-for-run under one seed.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::config::{TrainerKind, TrainingConfig};
use crate::corpus::{partition_range, SentenceReader, Vocabulary, MAX_SENTENCE_WORDS};
use crate::error::{Error, Result};
use crate::hogbatch::{build_minibatch, train_positions, BatchWorkspace, Minibatch};
use crate::hogwild::{train_window, StepStats, WindowTask};
use crate::model::{EmbeddingModel, LearningRate};
use crate::sampling::{dynamic_window, NegativeSampleTable, Rng, Sigmoid};
use crate::scalar::Scalar;

/// A thread pushes its private word count into the shared learning-rate
/// counter and refreshes its local rate once this many words accumulate.
pub const ALPHA_REFRESH_WORDS: u64 = 10_000;

/// Summary of a training run, emitted as JSON by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingReport {
    pub trainer: TrainerKind,
    pub threads: usize,
    /// Completed epochs (minimum across threads).
    pub epochs: usize,
    /// In-vocabulary words processed, before subsampling, summed over
    /// threads and epochs.
    pub words_processed: u64,
    pub wall_seconds: f64,
    pub words_per_sec: f64,
    /// Model rows written back across all steps.
    pub total_row_updates: u64,
    /// Batched-multiply calls (batched trainer only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gemm_calls: Option<u64>,
    /// Alias of `total_row_updates` (batched trainer only), for direct
    /// comparison against `gemm_calls`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_writes: Option<u64>,
    pub final_alpha: f64,
}

/// How far one [`Session::run_round`] call advances each thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundLimit {
    /// Run every remaining epoch.
    ToCompletion,
    /// Process roughly this many words per thread, pausing at the next
    /// line boundary at or past the budget.
    Words(u64),
    /// Run to the end of each thread's current epoch.
    Epoch,
}

/// Per-thread cursor that survives across rounds.
struct ThreadState {
    rng: Rng,
    shard: (u64, u64),
    /// Byte offset to resume at; always a line boundary.
    resume: u64,
    /// Completed epochs.
    epoch: usize,
    /// Current learning rate; refreshed on the shared counter's cadence,
    /// never at round boundaries.
    alpha: f64,
    /// Words processed since the last shared-counter push.
    unpushed_words: u64,
    words: u64,
    stats: StepStats,
}

/// Shared read-only context handed to every training thread.
struct Ctx<'a, F: Scalar> {
    model: &'a EmbeddingModel<F>,
    vocab: &'a Vocabulary,
    table: &'a NegativeSampleTable,
    sigmoid: &'a Sigmoid<F>,
    /// Per-id keep probability; empty when subsampling is off.
    keep: &'a [f64],
    lr: &'a LearningRate,
    config: &'a TrainingConfig,
    corpus: &'a Path,
}

impl<F: Scalar> Clone for Ctx<'_, F> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<F: Scalar> Copy for Ctx<'_, F> {}

/// A resumable training run over one corpus byte range.
pub struct Session<'a, F: Scalar> {
    model: &'a EmbeddingModel<F>,
    vocab: &'a Vocabulary,
    table: &'a NegativeSampleTable,
    config: &'a TrainingConfig,
    corpus: &'a Path,
    lr: &'a LearningRate,
    sigmoid: Sigmoid<F>,
    keep: Vec<f64>,
    threads: Vec<ThreadState>,
    wall: Duration,
}

impl<'a, F: Scalar> Session<'a, F> {
    /// Prepares per-thread shards and seeds over `shard` (a line-aligned
    /// byte range of `corpus`). Thread `t` draws from seed `config.seed +
    /// seed_base + t`; distinct `seed_base` values give workers disjoint
    /// stream families.
    pub fn new(
        model: &'a EmbeddingModel<F>,
        vocab: &'a Vocabulary,
        table: &'a NegativeSampleTable,
        corpus: &'a Path,
        shard: (u64, u64),
        config: &'a TrainingConfig,
        lr: &'a LearningRate,
        seed_base: u64,
    ) -> Result<Session<'a, F>> {
        config.validate()?;
        assert_eq!(model.vocab_size(), vocab.len());
        let shards = partition_range(corpus, shard, config.threads)?;
        let threads = shards
            .into_iter()
            .enumerate()
            .map(|(t, shard)| ThreadState {
                rng: Rng::new(config.seed.wrapping_add(seed_base).wrapping_add(t as u64)),
                shard,
                resume: shard.0,
                epoch: 0,
                alpha: lr.current(),
                unpushed_words: 0,
                words: 0,
                stats: StepStats::default(),
            })
            .collect();
        let keep = if config.sample > 0.0 {
            (0..vocab.len() as u32)
                .map(|id| vocab.keep_probability(id, config.sample))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Session {
            model,
            vocab,
            table,
            config,
            corpus,
            lr,
            sigmoid: Sigmoid::new(config.sigmoid_mode),
            keep,
            threads,
            wall: Duration::ZERO,
        })
    }

    /// True once every thread has completed all configured epochs.
    pub fn finished(&self) -> bool {
        self.threads.iter().all(|t| t.epoch >= self.config.iterations)
    }

    /// Advances every thread in parallel up to `limit`. Returns the words
    /// processed during this round, summed over threads.
    pub fn run_round(&mut self, limit: RoundLimit) -> Result<u64> {
        let ctx = Ctx {
            model: self.model,
            vocab: self.vocab,
            table: self.table,
            sigmoid: &self.sigmoid,
            keep: &self.keep,
            lr: self.lr,
            config: self.config,
            corpus: self.corpus,
        };
        let before: u64 = self.threads.iter().map(|t| t.words).sum();
        let start = Instant::now();
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::with_capacity(self.threads.len());
            for state in self.threads.iter_mut() {
                handles.push(scope.spawn(move || thread_round(ctx, state, limit)));
            }
            for handle in handles {
                handle.join().expect("training thread panicked")?;
            }
            Ok(())
        })?;
        self.wall += start.elapsed();
        let after: u64 = self.threads.iter().map(|t| t.words).sum();
        Ok(after - before)
    }

    pub fn words_processed(&self) -> u64 {
        self.threads.iter().map(|t| t.words).sum()
    }

    pub fn report(&self) -> TrainingReport {
        let words = self.words_processed();
        let mut stats = StepStats::default();
        for t in &self.threads {
            stats.merge(t.stats);
        }
        let wall = self.wall.as_secs_f64();
        let batched = self.config.trainer == TrainerKind::Hogbatch;
        TrainingReport {
            trainer: self.config.trainer,
            threads: self.config.threads,
            epochs: self.threads.iter().map(|t| t.epoch).min().unwrap_or(0),
            words_processed: words,
            wall_seconds: wall,
            words_per_sec: if wall > 0.0 { words as f64 / wall } else { 0.0 },
            total_row_updates: stats.rows_written,
            gemm_calls: batched.then_some(stats.gemm_calls),
            row_writes: batched.then_some(stats.rows_written),
            final_alpha: self.lr.current(),
        }
    }
}

/// Advances one thread until `limit` is reached, pausing only at line
/// boundaries.
fn thread_round<F: Scalar>(
    ctx: Ctx<'_, F>,
    state: &mut ThreadState,
    limit: RoundLimit,
) -> Result<()> {
    let config = ctx.config;
    let negative = config.negative as u32;
    let budget = match limit {
        RoundLimit::Words(n) => Some(n),
        _ => None,
    };
    let epoch_stop = match limit {
        RoundLimit::Epoch => Some(state.epoch + 1),
        _ => None,
    };
    let mut round_words = 0u64;

    let mut sentence: Vec<u32> = Vec::new();
    let mut window_buf: Vec<u32> = Vec::new();
    let mut temp: Vec<F> = Vec::new();
    let mut batches: Vec<Minibatch> = Vec::new();
    let mut workspace: BatchWorkspace<F> = BatchWorkspace::new(config.dim);

    'rounds: while state.epoch < config.iterations {
        let mut reader = SentenceReader::open(
            ctx.corpus,
            ctx.vocab,
            (state.resume, state.shard.1),
            MAX_SENTENCE_WORDS,
        )?;
        while reader.next_sentence(&mut sentence)? {
            let read_words = sentence.len() as u64;
            state.words += read_words;
            round_words += read_words;
            state.unpushed_words += read_words;
            if state.unpushed_words >= ALPHA_REFRESH_WORDS {
                ctx.lr.add_words(state.unpushed_words);
                state.unpushed_words = 0;
                state.alpha = ctx.lr.current();
            }

            if config.sample > 0.0 {
                let keep = ctx.keep;
                let rng = &mut state.rng;
                sentence.retain(|&w| rng.next_unit() < keep[w as usize]);
            }

            let alpha = F::from_f64(state.alpha);
            match config.trainer {
                TrainerKind::Hogwild => {
                    for pos in 0..sentence.len() {
                        let reach = dynamic_window(config.window, &mut state.rng) as usize;
                        let lo = pos.saturating_sub(reach);
                        let hi = (pos + reach).min(sentence.len() - 1);
                        if lo == hi {
                            continue;
                        }
                        window_buf.clear();
                        for p in lo..=hi {
                            if p != pos {
                                window_buf.push(sentence[p]);
                            }
                        }
                        state.stats.merge(train_window(
                            ctx.model,
                            ctx.sigmoid,
                            ctx.table,
                            &mut state.rng,
                            alpha,
                            WindowTask { target: sentence[pos], inputs: &window_buf },
                            negative,
                            config.allow_target_negative,
                            &mut temp,
                        ));
                    }
                }
                TrainerKind::Hogbatch => {
                    for pos in 0..sentence.len() {
                        let reach = dynamic_window(config.window, &mut state.rng);
                        if let Some(batch) = build_minibatch(
                            &sentence,
                            pos,
                            reach,
                            negative,
                            ctx.table,
                            &mut state.rng,
                            config.allow_target_negative,
                        ) {
                            batches.push(batch);
                            if batches.len() == config.batch_windows {
                                state.stats.merge(train_positions(
                                    ctx.model,
                                    &batches,
                                    &mut workspace,
                                    ctx.sigmoid,
                                    alpha,
                                ));
                                batches.clear();
                            }
                        }
                    }
                    if !batches.is_empty() {
                        state.stats.merge(train_positions(
                            ctx.model,
                            &batches,
                            &mut workspace,
                            ctx.sigmoid,
                            alpha,
                        ));
                        batches.clear();
                    }
                }
            }

            if reader.at_line_boundary() {
                if let Some(budget) = budget {
                    if round_words >= budget {
                        state.resume = reader.byte_offset();
                        finish_round(ctx.lr, state);
                        return Ok(());
                    }
                }
            }
        }

        // Epoch rollover for this thread's shard.
        state.epoch += 1;
        state.resume = state.shard.0;
        if cfg!(debug_assertions) {
            ctx.model.assert_finite();
        }
        if let Some(stop) = epoch_stop {
            if state.epoch >= stop {
                break 'rounds;
            }
        }
    }

    finish_round(ctx.lr, state);
    Ok(())
}

/// Publishes any unpushed words so global progress is exact at barriers.
/// Deliberately does not refresh the thread's rate: the refresh cadence
/// must not depend on where rounds start and end.
fn finish_round(lr: &LearningRate, state: &mut ThreadState) {
    if state.unpushed_words > 0 {
        lr.add_words(state.unpushed_words);
        state.unpushed_words = 0;
    }
}

/// Runs `config.trainer` over the whole corpus to completion.
pub fn run<F: Scalar>(
    model: &EmbeddingModel<F>,
    vocab: &Vocabulary,
    table: &NegativeSampleTable,
    corpus: &Path,
    config: &TrainingConfig,
) -> Result<TrainingReport> {
    config.validate()?;
    let len = std::fs::metadata(corpus)
        .map_err(|source| Error::CorpusRead { path: corpus.to_owned(), offset: 0, source })?
        .len();
    let lr = LearningRate::new(
        config.alpha0,
        config.iterations as u64 * vocab.total_words(),
    );
    let mut session = Session::new(model, vocab, table, corpus, (0, len), config, &lr, 0)?;
    session.run_round(RoundLimit::ToCompletion)?;
    Ok(session.report())
}
