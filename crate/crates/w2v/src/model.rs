//! Embedding model storage, initialization, learning-rate schedule, and
//! vector file I/O.
//!
//! The model is two `vocab x dim` row-major matrices: input vectors (what
//! evaluation and the saved vector files use) and output vectors (the
//! per-word classifier weights trained against sampled noise). Cells are
//! relaxed atomics so concurrent trainer threads can update them lock-free;
//! lost updates between racing read-modify-write cycles are accepted by
//! design, torn values cannot occur.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::sampling::Rng;
use crate::scalar::Scalar;

/// Fraction of the initial learning rate used as a hard floor.
pub const LR_FLOOR_FRACTION: f64 = 1e-4;

/// One row-major matrix of atomic cells.
pub struct EmbeddingMatrix<F: Scalar> {
    cells: Box<[F::Cell]>,
    rows: usize,
    dim: usize,
}

impl<F: Scalar> EmbeddingMatrix<F> {
    pub fn zeroed(rows: usize, dim: usize) -> EmbeddingMatrix<F> {
        let cells: Vec<F::Cell> = (0..rows * dim).map(|_| F::new_cell(F::zero())).collect();
        EmbeddingMatrix {
            cells: cells.into_boxed_slice(),
            rows,
            dim,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The cells of row `r`.
    #[inline]
    pub fn row(&self, r: u32) -> &[F::Cell] {
        let start = r as usize * self.dim;
        &self.cells[start..start + self.dim]
    }

    #[inline]
    pub fn get(&self, r: u32, j: usize) -> F {
        F::load(&self.row(r)[j])
    }

    #[inline]
    pub fn set(&self, r: u32, j: usize, v: F) {
        F::store(&self.row(r)[j], v);
    }

    /// `row[j] += delta` as a plain load/store pair - not an atomic
    /// read-modify-write. Racing adds may drop each other's contribution;
    /// that is the lock-free training contract.
    #[inline]
    pub fn add(&self, r: u32, j: usize, delta: F) {
        let cell = &self.row(r)[j];
        F::store(cell, F::load(cell) + delta);
    }

    /// Copies row `r` into `out` (a value snapshot; concurrent writers may
    /// interleave between elements).
    #[inline]
    pub fn read_row_into(&self, r: u32, out: &mut [F]) {
        debug_assert_eq!(out.len(), self.dim);
        for (dst, cell) in out.iter_mut().zip(self.row(r)) {
            *dst = F::load(cell);
        }
    }

    /// Materializes the matrix as plain values, row-major.
    pub fn to_vec(&self) -> Vec<F> {
        self.cells.iter().map(|c| F::load(c)).collect()
    }

    /// True when every element is finite.
    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|c| F::load(c).is_finite())
    }
}

impl<F: Scalar> Clone for EmbeddingMatrix<F> {
    fn clone(&self) -> Self {
        let cells: Vec<F::Cell> = self.cells.iter().map(|c| F::new_cell(F::load(c))).collect();
        EmbeddingMatrix {
            cells: cells.into_boxed_slice(),
            rows: self.rows,
            dim: self.dim,
        }
    }
}

/// The trainable model: input and output embedding matrices.
#[derive(Clone)]
pub struct EmbeddingModel<F: Scalar> {
    pub input: EmbeddingMatrix<F>,
    pub output: EmbeddingMatrix<F>,
}

impl<F: Scalar> EmbeddingModel<F> {
    /// Fresh model: input elements i.i.d. uniform in `[-0.5/dim, 0.5/dim)`
    /// drawn from `rng` in row-major order, output all zeros.
    pub fn init(vocab_size: usize, dim: usize, rng: &mut Rng) -> EmbeddingModel<F> {
        assert!(dim >= 1, "dim must be at least 1");
        let input = EmbeddingMatrix::zeroed(vocab_size, dim);
        for r in 0..vocab_size {
            for j in 0..dim {
                let v = (rng.next_unit() - 0.5) / dim as f64;
                input.set(r as u32, j, F::from_f64(v));
            }
        }
        EmbeddingModel {
            input,
            output: EmbeddingMatrix::zeroed(vocab_size, dim),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.input.rows()
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    /// Overwrites this model's parameters with `other`'s.
    pub fn copy_from(&self, other: &EmbeddingModel<F>) {
        assert_eq!(self.vocab_size(), other.vocab_size());
        assert_eq!(self.dim(), other.dim());
        for r in 0..self.vocab_size() as u32 {
            for j in 0..self.dim() {
                self.input.set(r, j, other.input.get(r, j));
                self.output.set(r, j, other.output.get(r, j));
            }
        }
    }

    /// Panics when any parameter is NaN/Inf. Called from debug builds at
    /// epoch boundaries.
    pub fn assert_finite(&self) {
        assert!(self.input.is_finite(), "non-finite value in input matrix");
        assert!(self.output.is_finite(), "non-finite value in output matrix");
    }

    /// Writes the input vectors in the classic interchange layout: a header
    /// line `vocab_size dim\n`, then one record per word in id order. Text
    /// records are `token v1 .. vD\n` with six decimal places; binary
    /// records are `token`, one space, `dim` little-endian IEEE-754 32-bit
    /// values, and a newline.
    pub fn save_vectors(
        &self,
        vocab: &Vocabulary,
        path: impl AsRef<Path>,
        binary: bool,
    ) -> Result<()> {
        assert_eq!(vocab.len(), self.vocab_size());
        let mut out = BufWriter::new(File::create(path)?);
        write!(out, "{} {}\n", vocab.len(), self.dim())?;
        let mut row = vec![F::zero(); self.dim()];
        for id in 0..vocab.len() as u32 {
            self.input.read_row_into(id, &mut row);
            if binary {
                write!(out, "{} ", vocab.token(id))?;
                for &v in &row {
                    out.write_all(&v.as_f32().to_le_bytes())?;
                }
                out.write_all(b"\n")?;
            } else {
                write!(out, "{}", vocab.token(id))?;
                for &v in &row {
                    write!(out, " {:.6}", v.as_f32())?;
                }
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Word vectors loaded from a file (or exported from a model) for
/// evaluation.
pub struct WordVectors {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    data: Vec<f32>,
}

impl WordVectors {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f32>) -> WordVectors {
        assert_eq!(tokens.len() * dim, data.len());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        WordVectors {
            tokens,
            index,
            dim,
            data,
        }
    }

    /// Snapshot of a model's input matrix, for in-process evaluation.
    pub fn from_model<F: Scalar>(model: &EmbeddingModel<F>, vocab: &Vocabulary) -> WordVectors {
        assert_eq!(vocab.len(), model.vocab_size());
        let data: Vec<f32> = model.input.to_vec().iter().map(|v| v.as_f32()).collect();
        WordVectors::new(vocab.tokens().to_vec(), model.dim(), data)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    #[inline]
    pub fn row(&self, id: u32) -> &[f32] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.id(token).map(|id| self.row(id))
    }
}

/// Reads a vector file written by [`EmbeddingModel::save_vectors`] (either
/// layout; the format is detected from the first record).
pub fn load_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |offset: usize, reason: &str| Error::VectorFormat {
        path: path.to_owned(),
        offset: offset as u64,
        reason: reason.to_owned(),
    };

    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad(0, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| bad(0, "header is not UTF-8"))?;
    let mut fields = header.split_whitespace();
    let vocab_size: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| bad(0, "header must start with the vocabulary size"))?;
    let dim: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| bad(0, "header must contain the dimensionality"))?;
    if fields.next().is_some() {
        return Err(bad(0, "header must be exactly `vocab_size dim`"));
    }
    if dim == 0 {
        return Err(bad(0, "dimensionality must be positive"));
    }
    let body = header_end + 1;

    if looks_like_text_record(&bytes[body..], dim) {
        load_text_records(path, &bytes, body, vocab_size, dim)
    } else {
        load_binary_records(path, &bytes, body, vocab_size, dim)
    }
}

/// True when the first record after the header parses as a text record:
/// one token plus `dim` ASCII floats on a single line.
fn looks_like_text_record(body: &[u8], dim: usize) -> bool {
    let line_end = body.iter().position(|&b| b == b'\n').unwrap_or(body.len());
    let Ok(line) = std::str::from_utf8(&body[..line_end]) else {
        return false;
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == dim + 1 && fields[1..].iter().all(|f| f.parse::<f32>().is_ok())
}

fn load_text_records(
    path: &Path,
    bytes: &[u8],
    body: usize,
    vocab_size: usize,
    dim: usize,
) -> Result<WordVectors> {
    let bad = |offset: usize, reason: String| Error::VectorFormat {
        path: path.to_owned(),
        offset: offset as u64,
        reason,
    };
    let mut tokens = Vec::with_capacity(vocab_size);
    let mut data = Vec::with_capacity(vocab_size * dim);
    let mut offset = body;
    while offset < bytes.len() {
        let line_end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| offset + p);
        let line = std::str::from_utf8(&bytes[offset..line_end])
            .map_err(|_| bad(offset, "record is not UTF-8".into()))?;
        if !line.trim().is_empty() {
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap();
            let mut values = 0usize;
            for f in fields {
                let v: f32 = f
                    .parse()
                    .map_err(|_| bad(offset, format!("unparsable value {f:?}")))?;
                data.push(v);
                values += 1;
            }
            if values != dim {
                return Err(bad(
                    offset,
                    format!("expected {dim} values for token {token:?}, found {values}"),
                ));
            }
            tokens.push(token.to_owned());
        }
        offset = line_end + 1;
    }
    if tokens.len() != vocab_size {
        return Err(bad(
            bytes.len(),
            format!("header declares {vocab_size} records, found {}", tokens.len()),
        ));
    }
    Ok(WordVectors::new(tokens, dim, data))
}

fn load_binary_records(
    path: &Path,
    bytes: &[u8],
    body: usize,
    vocab_size: usize,
    dim: usize,
) -> Result<WordVectors> {
    let bad = |offset: usize, reason: String| Error::VectorFormat {
        path: path.to_owned(),
        offset: offset as u64,
        reason,
    };
    let mut tokens = Vec::with_capacity(vocab_size);
    let mut data = Vec::with_capacity(vocab_size * dim);
    let mut offset = body;
    for record in 0..vocab_size {
        let token_end = bytes[offset..]
            .iter()
            .position(|&b| b == b' ')
            .map(|p| offset + p)
            .ok_or_else(|| bad(offset, format!("truncated file in record {record}")))?;
        let token = std::str::from_utf8(&bytes[offset..token_end])
            .map_err(|_| bad(offset, format!("token in record {record} is not UTF-8")))?;
        let mut pos = token_end + 1;
        if pos + 4 * dim > bytes.len() {
            return Err(bad(pos, format!("truncated values in record {record}")));
        }
        for _ in 0..dim {
            data.push(f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()));
            pos += 4;
        }
        // Our writer terminates records with a newline; other writers may
        // not, so it is optional.
        if bytes.get(pos) == Some(&b'\n') {
            pos += 1;
        }
        tokens.push(token.to_owned());
        offset = pos;
    }
    if bytes[offset..].iter().any(|b| !b.is_ascii_whitespace()) {
        return Err(bad(offset, "trailing data after final record".into()));
    }
    Ok(WordVectors::new(tokens, dim, data))
}

/// Linearly decaying learning rate shared by all trainer threads.
///
/// The current rate is `alpha0 * max(1 - words_done / (words_total + 1),
/// 1e-4)`, where `words_done` is a monotone global counter of training words
/// processed across all threads and epochs.
pub struct LearningRate {
    alpha0: f64,
    words_total: u64,
    words_done: AtomicU64,
}

impl LearningRate {
    pub fn new(alpha0: f64, words_total: u64) -> LearningRate {
        LearningRate {
            alpha0,
            words_total,
            words_done: AtomicU64::new(0),
        }
    }

    /// Rate at a hypothetical progress point.
    pub fn at(&self, words_done: u64) -> f64 {
        let remaining = 1.0 - words_done as f64 / (self.words_total as f64 + 1.0);
        self.alpha0 * remaining.max(LR_FLOOR_FRACTION)
    }

    /// Current rate.
    pub fn current(&self) -> f64 {
        self.at(self.words_done.load(Ordering::Relaxed))
    }

    /// Advances the global progress counter.
    pub fn add_words(&self, n: u64) {
        self.words_done.fetch_add(n, Ordering::Relaxed);
    }

    pub fn words_done(&self) -> u64 {
        self.words_done.load(Ordering::Relaxed)
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }
}
