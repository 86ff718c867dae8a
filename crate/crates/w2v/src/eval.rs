//! Intrinsic evaluation: word-similarity rank correlation and word-analogy
//! accuracy.
//!
//! Similarity: each scored word pair is compared by cosine similarity and
//! the model is judged by the Spearman rank correlation between model and
//! human scores (average ranks for ties). Analogy: a question `a : b ::
//! c : ?` is answered by the candidate whose unit-normalized vector best
//! matches `v_b - v_a + v_c` (computed on unit vectors), with `a`, `b`,
//! `c` excluded from the candidates and the candidate list limited to the
//! most frequent `top_vocab` words, following the classic evaluation
//! tool. Questions containing any word outside the candidate list are
//! skipped and counted.

use std::cmp::Ordering;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::WordVectors;

/// One human-scored word pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub word_a: String,
    pub word_b: String,
    pub human_score: f64,
}

/// One analogy question `a : b :: c : d` under a section heading.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub section: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub spearman: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionAccuracy {
    pub section: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalogyReport {
    /// `correct / used`, or `null` when no question was usable.
    pub overall: Option<f64>,
    pub correct: usize,
    pub used: usize,
    pub skipped: usize,
    pub sections: Vec<SectionAccuracy>,
}

/// Cosine similarity of two equal-length vectors, accumulated in f64.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine of {}-dim and {}-dim vectors",
            u.len(),
            v.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        dot += a as f64 * b as f64;
        nu += a as f64 * a as f64;
        nv += b as f64 * b as f64;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

/// 1-based ranks with ties assigned the mean of the ranks they span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the mean 1-based rank.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores against {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::TooFewPairs { got: a.len() });
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::DegenerateRanks(
            "a score list with all values tied has no ranking".into(),
        ));
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

/// Reads `word1<sep>word2<sep>score` lines, where the separator is a tab,
/// a comma, or runs of whitespace. A first line whose third field is not
/// numeric is treated as a header and skipped.
pub fn load_similarity_pairs(path: impl AsRef<Path>) -> Result<Vec<SimilarityPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize, reason: String| Error::EvalFormat {
        path: path.to_owned(),
        line,
        reason,
    };
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 3 {
            return Err(bad(
                idx + 1,
                format!("expected `word word score`, found {} fields", fields.len()),
            ));
        }
        match fields[2].parse::<f64>() {
            Ok(score) if score.is_finite() => pairs.push(SimilarityPair {
                word_a: fields[0].to_owned(),
                word_b: fields[1].to_owned(),
                human_score: score,
            }),
            _ if idx == 0 => continue, // header row
            _ => {
                return Err(bad(idx + 1, format!("unparsable score {:?}", fields[2])));
            }
        }
    }
    Ok(pairs)
}

/// Reads analogy questions in the classic layout: `: section-name` lines
/// start a section, every other non-empty line holds four tokens.
pub fn load_analogy_questions(path: impl AsRef<Path>) -> Result<Vec<AnalogyQuestion>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut questions = Vec::new();
    let mut section = String::from("default");
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            section = name.trim().to_owned();
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::EvalFormat {
                path: path.to_owned(),
                line: idx + 1,
                reason: format!("expected four tokens, found {}", fields.len()),
            });
        }
        questions.push(AnalogyQuestion {
            a: fields[0].to_owned(),
            b: fields[1].to_owned(),
            c: fields[2].to_owned(),
            d: fields[3].to_owned(),
            section: section.clone(),
        });
    }
    Ok(questions)
}

/// Scores `vectors` against human similarity judgements. Pairs with a
/// word missing from the vocabulary are skipped and counted.
pub fn similarity_eval(
    vectors: &WordVectors,
    pairs: &[SimilarityPair],
) -> Result<SimilarityReport> {
    let mut model_scores = Vec::new();
    let mut human_scores = Vec::new();
    let mut skipped = 0usize;
    for pair in pairs {
        match (vectors.get(&pair.word_a), vectors.get(&pair.word_b)) {
            (Some(u), Some(v)) => {
                model_scores.push(cosine(u, v)?);
                human_scores.push(pair.human_score);
            }
            _ => skipped += 1,
        }
    }
    Ok(SimilarityReport {
        spearman: spearman(&model_scores, &human_scores)?,
        pairs_used: model_scores.len(),
        pairs_skipped: skipped,
    })
}

/// Answers analogy questions by nearest unit vector to `v_b - v_a + v_c`,
/// restricted to the `top_vocab` most frequent words and excluding the
/// three question words from the candidates.
pub fn analogy_eval(
    vectors: &WordVectors,
    questions: &[AnalogyQuestion],
    top_vocab: usize,
) -> AnalogyReport {
    let candidates = top_vocab.min(vectors.len());
    let dim = vectors.dim();
    // Unit-normalized copies of the candidate rows; zero rows stay zero
    // and can never win the argmax.
    let mut unit = vec![0.0f32; candidates * dim];
    for r in 0..candidates {
        let row = vectors.row(r as u32);
        let norm = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if norm > 0.0 {
            for d in 0..dim {
                unit[r * dim + d] = (row[d] as f64 / norm) as f32;
            }
        }
    }
    let unit_row = |r: usize| &unit[r * dim..(r + 1) * dim];

    let mut sections: Vec<SectionAccuracy> = Vec::new();
    let mut correct = 0usize;
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut query = vec![0.0f64; dim];
    for q in questions {
        let ids = [
            vectors.id(&q.a),
            vectors.id(&q.b),
            vectors.id(&q.c),
            vectors.id(&q.d),
        ];
        let in_range =
            |id: Option<u32>| id.map(|id| (id as usize) < candidates).unwrap_or(false);
        if !ids.iter().all(|&id| in_range(id)) {
            skipped += 1;
            continue;
        }
        let [a, b, c, d] = ids.map(|id| id.unwrap() as usize);
        let (ua, ub, uc) = (unit_row(a), unit_row(b), unit_row(c));
        for j in 0..dim {
            query[j] = ub[j] as f64 - ua[j] as f64 + uc[j] as f64;
        }
        let mut best: Option<(usize, f64)> = None;
        for r in 0..candidates {
            if r == a || r == b || r == c {
                continue;
            }
            let row = unit_row(r);
            let score: f64 = row.iter().zip(&query).map(|(&x, &y)| x as f64 * y).sum();
            if best.map(|(_, s)| score > s).unwrap_or(true) {
                best = Some((r, score));
            }
        }
        let hit = best.map(|(r, _)| r == d).unwrap_or(false);
        used += 1;
        if hit {
            correct += 1;
        }
        match sections.iter_mut().find(|s| s.section == q.section) {
            Some(s) => {
                s.total += 1;
                if hit {
                    s.correct += 1;
                }
            }
            None => sections.push(SectionAccuracy {
                section: q.section.clone(),
                correct: hit as usize,
                total: 1,
                accuracy: 0.0,
            }),
        }
    }
    for s in &mut sections {
        s.accuracy = s.correct as f64 / s.total as f64;
    }
    AnalogyReport {
        overall: (used > 0).then(|| correct as f64 / used as f64),
        correct,
        used,
        skipped,
        sections,
    }
}
