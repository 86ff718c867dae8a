//! Shared helpers for the integration suites: synthetic corpus and benchmark
//! fixtures with known similarity/analogy structure, independent reference
//! kernels for bit-level comparisons, and a harness around the standalone C
//! reference trainer.
//!
//! Everything here is deliberately written as a separate code path from the
//! library: plain `Vec<f64>` matrices, its own RNG, its own loops.

#![allow(dead_code)] // each test binary uses its own subset

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

/// SplitMix64; independent of the library's LCG on purpose.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_add(0x9e3779b97f4a7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform in [-1, 1).
    pub fn signed_unit(&mut self) -> f64 {
        self.unit() * 2.0 - 1.0
    }
}

/// True when the suite should run at full (~100 MB) corpus scale.
pub fn accept_full() -> bool {
    std::env::var("W2V_ACCEPT_FULL").map(|v| v == "1").unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Synthetic corpus with known structure.
//
// Topic sentences: 40 topics of 25 content words arranged in a ring; a
// sentence sticks to one topic but borrows 30% of its words from the two
// ring neighbors, so embedding similarity should fall off with ring
// distance. Function words appear everywhere (and get subsampled away).
//
// Grid sentences: an 8x8 grid of words `gw{r}{c}` co-occurring with row
// markers `gr{r}` and column markers `gc{c}`, so vectors decompose into
// row + column directions and 3CosAdd analogies `gw(r1,c1) : gw(r1,c2) ::
// gw(r2,c1) : gw(r2,c2)` become solvable.
// ---------------------------------------------------------------------------

pub const TOPICS: usize = 40;
pub const WORDS_PER_TOPIC: usize = 25;
pub const FUNCTION_WORDS: usize = 20;
pub const GRID: usize = 8;
pub const WORDS_PER_LINE: usize = 16;

pub struct Fixture {
    pub dir: TempDir,
    pub corpus: PathBuf,
    pub pairs: PathBuf,
    pub analogies: PathBuf,
}

pub fn topic_token(t: usize, w: usize) -> String {
    format!("t{t:02}w{w:02}")
}

pub fn function_token(k: usize) -> String {
    format!("f{k:02}")
}

pub fn grid_token(r: usize, c: usize) -> String {
    format!("gw{r}{c}")
}

fn ring_distance(a: usize, b: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(TOPICS - d)
}

/// Quadratic skew over `n` buckets: low indices are ~sqrt-more frequent.
fn skewed(rng: &mut TestRng, n: usize) -> usize {
    let u = rng.unit();
    ((u * u * n as f64) as usize).min(n - 1)
}

pub fn default_lines() -> usize {
    if accept_full() {
        750_000
    } else {
        150_000
    }
}

pub fn build_fixture(lines: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus.txt");
    let pairs = dir.path().join("pairs.tsv");
    let analogies = dir.path().join("analogies.txt");
    let mut rng = TestRng::new(seed);

    let mut text = String::with_capacity(lines * WORDS_PER_LINE * 7);
    for _ in 0..lines {
        if rng.chance(0.15) {
            let r = rng.below(GRID);
            let c = rng.below(GRID);
            for slot in 0..WORDS_PER_LINE {
                if slot > 0 {
                    text.push(' ');
                }
                let u = rng.unit();
                if u < 0.15 {
                    let _ = write!(text, "{}", function_token(skewed(&mut rng, FUNCTION_WORDS)));
                } else if u < 0.40 {
                    let _ = write!(text, "gr{r}");
                } else if u < 0.65 {
                    let _ = write!(text, "gc{c}");
                } else {
                    let _ = write!(text, "{}", grid_token(r, c));
                }
            }
        } else {
            let t0 = rng.below(TOPICS);
            for slot in 0..WORDS_PER_LINE {
                if slot > 0 {
                    text.push(' ');
                }
                if rng.chance(0.12) {
                    let _ = write!(text, "{}", function_token(skewed(&mut rng, FUNCTION_WORDS)));
                } else {
                    let u = rng.unit();
                    let t = if u < 0.70 {
                        t0
                    } else if u < 0.85 {
                        (t0 + 1) % TOPICS
                    } else {
                        (t0 + TOPICS - 1) % TOPICS
                    };
                    let _ = write!(text, "{}", topic_token(t, skewed(&mut rng, WORDS_PER_TOPIC)));
                }
            }
        }
        text.push('\n');
    }
    std::fs::write(&corpus, &text).expect("write corpus");

    // Similarity pairs: graded by ring distance of the two topics.
    let mut pair_text = String::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let per_grade = 100;
    for &(dist, score) in &[(0usize, 9.0f64), (1, 6.5), (2, 4.0), (usize::MAX, 1.0)] {
        let mut emitted = 0;
        while emitted < per_grade {
            let t1 = rng.below(TOPICS);
            let (t2, w1, w2) = if dist == 0 {
                let w1 = rng.below(WORDS_PER_TOPIC);
                let mut w2 = rng.below(WORDS_PER_TOPIC);
                while w2 == w1 {
                    w2 = rng.below(WORDS_PER_TOPIC);
                }
                (t1, w1, w2)
            } else {
                let t2 = if dist == usize::MAX {
                    // Far side of the ring: distance 10..=20.
                    (t1 + 10 + rng.below(TOPICS / 2 - 9)) % TOPICS
                } else {
                    (t1 + dist) % TOPICS
                };
                (t2, rng.below(WORDS_PER_TOPIC), rng.below(WORDS_PER_TOPIC))
            };
            let a = topic_token(t1, w1);
            let b = topic_token(t2, w2);
            let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            if seen.insert(key) {
                let _ = writeln!(pair_text, "{a}\t{b}\t{score}");
                emitted += 1;
            }
        }
    }
    std::fs::write(&pairs, &pair_text).expect("write pairs");

    // Analogy questions: every ordered row pair x column pair.
    let mut q_text = String::from(": grid\n");
    for r1 in 0..GRID {
        for r2 in 0..GRID {
            if r2 == r1 {
                continue;
            }
            for c1 in 0..GRID {
                for c2 in 0..GRID {
                    if c2 == c1 {
                        continue;
                    }
                    let _ = writeln!(
                        q_text,
                        "{} {} {} {}",
                        grid_token(r1, c1),
                        grid_token(r1, c2),
                        grid_token(r2, c1),
                        grid_token(r2, c2)
                    );
                }
            }
        }
    }
    std::fs::write(&analogies, &q_text).expect("write analogies");

    Fixture { dir, corpus, pairs, analogies }
}

// ---------------------------------------------------------------------------
// Independent reference kernels (plain f64 matrices).
// ---------------------------------------------------------------------------

/// `C = A * B^T` (`a` is n x dim, `b` is m x dim), plain triple loop with the
/// depth dimension accumulated in ascending order.
pub fn naive_matmul_abt(a: &[f64], b: &[f64], n: usize, m: usize, dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for d in 0..dim {
                acc += a[i * dim + d] * b[j * dim + d];
            }
            c[i * m + j] = acc;
        }
    }
    c
}

pub fn sigmoid_f64(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One batch of a fused step: context-word rows, output rows (target first,
/// then negatives), and per-output labels.
pub struct RefBatch {
    pub input_ids: Vec<u32>,
    pub output_ids: Vec<u32>,
    pub labels: Vec<bool>,
}

/// Reference for the batched update with stale-read semantics, on plain
/// matrices: every gradient is computed from the model as it stood before
/// the step, and writes land per batch in order — context rows first, then
/// output rows. Accumulation runs in the same per-cell index order as the
/// production kernel so 64-bit results must match bit for bit.
pub fn stale_read_step(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    batches: &[RefBatch],
    alpha: f64,
) {
    let input_before = input.to_vec();
    let output_before = output.to_vec();
    for batch in batches {
        let n = batch.input_ids.len();
        let m = batch.output_ids.len();
        let a: Vec<f64> = batch
            .input_ids
            .iter()
            .flat_map(|&id| input_before[id as usize * dim..(id as usize + 1) * dim].to_vec())
            .collect();
        let b: Vec<f64> = batch
            .output_ids
            .iter()
            .flat_map(|&id| output_before[id as usize * dim..(id as usize + 1) * dim].to_vec())
            .collect();
        let c = naive_matmul_abt(&a, &b, n, m, dim);
        let e: Vec<f64> = c
            .iter()
            .enumerate()
            .map(|(idx, &x)| {
                let label = if batch.labels[idx % m] { 1.0 } else { 0.0 };
                label - sigmoid_f64(x)
            })
            .collect();

        let mut g_in = vec![0.0; n * dim];
        let mut g_out = vec![0.0; m * dim];
        for i in 0..n {
            for j in 0..m {
                let err = e[i * m + j];
                for d in 0..dim {
                    g_in[i * dim + d] += err * b[j * dim + d];
                }
                let g = alpha * err;
                for d in 0..dim {
                    g_out[j * dim + d] += g * a[i * dim + d];
                }
            }
        }
        for i in 0..n {
            let row = batch.input_ids[i] as usize * dim;
            for d in 0..dim {
                input[row + d] += alpha * g_in[i * dim + d];
            }
        }
        for j in 0..m {
            let row = batch.output_ids[j] as usize * dim;
            for d in 0..dim {
                output[row + d] += g_out[j * dim + d];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// C reference trainer.
// ---------------------------------------------------------------------------

pub struct RefTrainerArgs {
    pub dim: usize,
    pub window: u32,
    pub negative: usize,
    pub sample: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub min_count: u64,
    pub seed: u64,
    pub table_size: usize,
}

/// Compiles tests/ref_sgns.c with the system C compiler and returns the
/// executable path.
pub fn compile_ref_trainer(dir: &Path) -> PathBuf {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("ref_sgns.c");
    let exe = dir.join("ref_sgns");
    let status = Command::new("cc")
        .arg("-O2")
        .arg("-o")
        .arg(&exe)
        .arg(&src)
        .arg("-lm")
        .status()
        .expect("run cc");
    assert!(status.success(), "failed to compile the C reference trainer");
    exe
}

/// Runs the C reference trainer; it writes binary word2vec vectors to `out`.
pub fn run_ref_trainer(exe: &Path, corpus: &Path, out: &Path, args: &RefTrainerArgs) {
    let status = Command::new(exe)
        .arg(corpus)
        .arg(out)
        .arg(args.dim.to_string())
        .arg(args.window.to_string())
        .arg(args.negative.to_string())
        .arg(args.sample.to_string())
        .arg(args.alpha.to_string())
        .arg(args.iterations.to_string())
        .arg(args.min_count.to_string())
        .arg(args.seed.to_string())
        .arg(args.table_size.to_string())
        .status()
        .expect("run the C reference trainer");
    assert!(status.success(), "C reference trainer exited with failure");
}
