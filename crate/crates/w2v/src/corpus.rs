//! Corpus ingestion: vocabulary construction and sentence streaming.
//!
//! A corpus is a plain text file of whitespace-separated tokens, one or more
//! sentences per line. Tokenization is whitespace splitting only - no case
//! folding, no punctuation stripping. Trainer threads each read an exclusive
//! byte range of the file; ranges are aligned to line starts by
//! [`partition_range`] so that no line is read twice or split across threads.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Hard cap on sentence length, in tokens. Longer lines are split into
/// consecutive sentences of at most this many words.
pub const MAX_SENTENCE_WORDS: usize = 1000;

/// In-vocabulary words of a corpus, id-ordered by descending frequency
/// (ties broken by ascending token text, so ids are deterministic).
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_words: u64,
}

impl Vocabulary {
    /// Builds the vocabulary by streaming `path` once and keeping every token
    /// that appears at least `min_count` times.
    ///
    /// Returns [`Error::EmptyVocabulary`] when nothing survives the cut, and
    /// [`Error::InvalidToken`] when a surviving token is not valid UTF-8 (the
    /// reported offset is the token's first occurrence).
    pub fn build(path: impl AsRef<Path>, min_count: u64) -> Result<Vocabulary> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::CorpusRead {
            path: path.to_owned(),
            offset: 0,
            source,
        })?;
        let mut reader = BufReader::with_capacity(1 << 17, file);

        // Raw byte tokens, counted with the byte offset of their first
        // occurrence so UTF-8 problems can be reported precisely.
        let mut counts: HashMap<Vec<u8>, (u64, u64)> = HashMap::new();
        let mut token: Vec<u8> = Vec::new();
        let mut token_start: u64 = 0;
        let mut offset: u64 = 0;
        loop {
            let buf = reader.fill_buf().map_err(|source| Error::CorpusRead {
                path: path.to_owned(),
                offset,
                source,
            })?;
            if buf.is_empty() {
                break;
            }
            for &b in buf {
                if b.is_ascii_whitespace() {
                    if !token.is_empty() {
                        bump(&mut counts, &token, token_start);
                        token.clear();
                    }
                } else {
                    if token.is_empty() {
                        token_start = offset;
                    }
                    token.push(b);
                }
                offset += 1;
            }
            let used = buf.len();
            reader.consume(used);
        }
        if !token.is_empty() {
            bump(&mut counts, &token, token_start);
        }

        let mut entries: Vec<(String, u64)> = Vec::new();
        for (bytes, (count, first_offset)) in counts {
            if count < min_count {
                continue;
            }
            let tok = String::from_utf8(bytes).map_err(|_| Error::InvalidToken {
                path: path.to_owned(),
                offset: first_offset,
            })?;
            entries.push((tok, count));
        }
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        entries.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        Vocabulary::from_entries(entries)
    }

    /// Builds a vocabulary from `(token, count)` entries already ordered by
    /// id (descending count, ties by ascending token).
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Vocabulary> {
        if entries.is_empty() {
            return Err(Error::Config("vocabulary has no entries".into()));
        }
        if entries.len() > u32::MAX as usize {
            return Err(Error::Config("vocabulary exceeds u32 id space".into()));
        }
        let mut tokens = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut total_words = 0u64;
        for (id, (token, count)) in entries.into_iter().enumerate() {
            if count == 0 {
                return Err(Error::Config(format!("token {token:?} has count 0")));
            }
            if id > 0 && count > counts[id - 1] {
                return Err(Error::Config(format!(
                    "counts not non-increasing at id {id} ({} after {})",
                    count,
                    counts[id - 1]
                )));
            }
            if index.insert(token.clone(), id as u32).is_some() {
                return Err(Error::Config(format!("duplicate token {token:?}")));
            }
            total_words += count;
            tokens.push(token);
            counts.push(count);
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
            total_words,
        })
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, if in vocabulary.
    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Token text for `id`.
    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    /// Corpus frequency of `id`.
    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// All counts, id-ordered.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// All tokens, id-ordered.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Total number of in-vocabulary word occurrences (sum of counts).
    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    /// Probability that an occurrence of `id` is kept under frequent-word
    /// subsampling with threshold `sample`. See [`keep_probability`].
    pub fn keep_probability(&self, id: u32, sample: f64) -> f64 {
        keep_probability(self.count(id), sample, self.total_words)
    }

    /// Writes `token<space>count` lines, id-ordered.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(File::create(path)?);
        for (token, count) in self.tokens.iter().zip(&self.counts) {
            writeln!(out, "{token} {count}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a file produced by [`Vocabulary::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary> {
        let path = path.as_ref();
        let bad = |line: usize, reason: &str| Error::VocabFormat {
            path: path.to_owned(),
            line,
            reason: reason.to_owned(),
        };
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().ok_or_else(|| bad(lineno + 1, "missing token"))?;
            let count = fields
                .next()
                .ok_or_else(|| bad(lineno + 1, "missing count"))?
                .parse::<u64>()
                .map_err(|_| bad(lineno + 1, "count is not an unsigned integer"))?;
            if fields.next().is_some() {
                return Err(bad(lineno + 1, "expected exactly two fields"));
            }
            entries.push((token.to_owned(), count));
        }
        Vocabulary::from_entries(entries)
            .map_err(|e| bad(0, &format!("invalid vocabulary: {e}")))
    }
}

fn bump(counts: &mut HashMap<Vec<u8>, (u64, u64)>, token: &[u8], offset: u64) {
    match counts.get_mut(token) {
        Some((count, _)) => *count += 1,
        None => {
            counts.insert(token.to_vec(), (1, offset));
        }
    }
}

/// Probability that one occurrence of a word with corpus frequency `count`
/// survives frequent-word subsampling.
///
/// With `z = count / (sample * total_words)`, the keep probability is
/// `min(1, (sqrt(z) + 1) / z)`: words rarer than the threshold are always
/// kept, very frequent words are kept with probability approaching
/// `1/sqrt(z)`. `sample = 0` disables subsampling (always keep).
pub fn keep_probability(count: u64, sample: f64, total_words: u64) -> f64 {
    if sample <= 0.0 {
        return 1.0;
    }
    let z = count as f64 / (sample * total_words as f64);
    ((z.sqrt() + 1.0) / z).min(1.0)
}

/// Streams the sentences of one byte range of a corpus file.
///
/// Lines that begin at or after the range's end are not read, so a set of
/// readers over [`partition_range`] output covers every line exactly once.
/// Out-of-vocabulary tokens are dropped (byte runs that are not valid UTF-8
/// can never match a vocabulary entry and are likewise dropped). Lines longer
/// than `max_words` are split into consecutive sentences.
pub struct SentenceReader<'v> {
    vocab: &'v Vocabulary,
    reader: BufReader<File>,
    path: PathBuf,
    /// Absolute byte offset of the next unread byte; only advances by whole
    /// lines, so it is a valid resume point whenever [`Self::at_line_boundary`]
    /// holds.
    offset: u64,
    end: u64,
    max_words: usize,
    line_buf: Vec<u8>,
    line_ids: Vec<u32>,
    line_pos: usize,
}

impl<'v> SentenceReader<'v> {
    /// Opens `path` and positions the reader at `range.0`, which must be the
    /// start of a line (byte 0 or a [`partition_range`] boundary).
    pub fn open(
        path: impl AsRef<Path>,
        vocab: &'v Vocabulary,
        range: (u64, u64),
        max_words: usize,
    ) -> Result<SentenceReader<'v>> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(|source| Error::CorpusRead {
            path: path.to_owned(),
            offset: range.0,
            source,
        })?;
        file.seek(SeekFrom::Start(range.0))?;
        Ok(SentenceReader {
            vocab,
            reader: BufReader::with_capacity(1 << 16, file),
            path: path.to_owned(),
            offset: range.0,
            end: range.1,
            max_words,
            line_buf: Vec::new(),
            line_ids: Vec::new(),
            line_pos: 0,
        })
    }

    /// Fills `out` with the next sentence's word ids. Returns `false` when
    /// the range is exhausted. Sentences are never empty.
    pub fn next_sentence(&mut self, out: &mut Vec<u32>) -> Result<bool> {
        loop {
            if self.line_pos < self.line_ids.len() {
                let take = self.max_words.min(self.line_ids.len() - self.line_pos);
                out.clear();
                out.extend_from_slice(&self.line_ids[self.line_pos..self.line_pos + take]);
                self.line_pos += take;
                return Ok(true);
            }
            if self.offset >= self.end {
                return Ok(false);
            }
            self.line_buf.clear();
            let n = self
                .reader
                .read_until(b'\n', &mut self.line_buf)
                .map_err(|source| Error::CorpusRead {
                    path: self.path.clone(),
                    offset: self.offset,
                    source,
                })?;
            if n == 0 {
                return Ok(false);
            }
            self.offset += n as u64;
            self.line_ids.clear();
            self.line_pos = 0;
            for token in self
                .line_buf
                .split(|b| b.is_ascii_whitespace())
                .filter(|t| !t.is_empty())
            {
                if let Some(id) = std::str::from_utf8(token).ok().and_then(|t| self.vocab.id(t))
                {
                    self.line_ids.push(id);
                }
            }
        }
    }

    /// True when no partially-consumed line is pending, i.e. when
    /// [`Self::byte_offset`] is a valid position to resume from.
    pub fn at_line_boundary(&self) -> bool {
        self.line_pos >= self.line_ids.len()
    }

    /// Absolute offset of the first unread line.
    pub fn byte_offset(&self) -> u64 {
        self.offset
    }
}

/// Iterator over every sentence of a corpus file. See [`SentenceReader`].
pub struct Sentences<'v> {
    reader: SentenceReader<'v>,
}

impl Iterator for Sentences<'_> {
    type Item = Result<Vec<u32>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut out = Vec::new();
        match self.reader.next_sentence(&mut out) {
            Ok(true) => Some(Ok(out)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

/// Iterates the whole file as id sentences (OOV dropped, long lines split at
/// [`MAX_SENTENCE_WORDS`]).
pub fn iter_sentences<'v>(path: impl AsRef<Path>, vocab: &'v Vocabulary) -> Result<Sentences<'v>> {
    let len = std::fs::metadata(path.as_ref())?.len();
    Ok(Sentences {
        reader: SentenceReader::open(path, vocab, (0, len), MAX_SENTENCE_WORDS)?,
    })
}

/// Splits `range` of the file into `parts` contiguous byte ranges of roughly
/// equal size, with every boundary snapped forward to the start of the next
/// line. Ranges may be empty for tiny files; concatenated they cover `range`
/// exactly.
pub fn partition_range(
    path: impl AsRef<Path>,
    range: (u64, u64),
    parts: usize,
) -> Result<Vec<(u64, u64)>> {
    assert!(parts >= 1, "parts must be at least 1");
    let (start, end) = range;
    assert!(start <= end, "invalid range");
    let mut file = File::open(path.as_ref())?;
    let len = end - start;
    let mut bounds = Vec::with_capacity(parts + 1);
    bounds.push(start);
    for t in 1..parts {
        let target = start + len * t as u64 / parts as u64;
        let snapped = snap_to_line_start(&mut file, target, end)?;
        let prev = *bounds.last().unwrap();
        bounds.push(snapped.max(prev));
    }
    bounds.push(end);
    Ok(bounds.windows(2).map(|w| (w[0], w[1])).collect())
}

/// Splits the whole file into `parts` line-aligned byte ranges.
pub fn partition_byte_ranges(path: impl AsRef<Path>, parts: usize) -> Result<Vec<(u64, u64)>> {
    let len = std::fs::metadata(path.as_ref())?.len();
    partition_range(path, (0, len), parts)
}

/// First line-start position at or after `from` (position 0 and positions
/// just past a newline are line starts), clamped to `limit`.
fn snap_to_line_start(file: &mut File, from: u64, limit: u64) -> Result<u64> {
    if from == 0 {
        return Ok(0);
    }
    // The byte before `from` decides whether `from` itself starts a line, so
    // scan for the first newline at or after `from - 1`.
    let mut pos = from - 1;
    file.seek(SeekFrom::Start(pos))?;
    let mut buf = [0u8; 8192];
    loop {
        if pos >= limit {
            return Ok(limit);
        }
        let n = file.read(&mut buf)?;
        if n == 0 {
            return Ok(limit);
        }
        for (i, &b) in buf[..n].iter().enumerate() {
            if b == b'\n' {
                return Ok((pos + i as u64 + 1).min(limit));
            }
        }
        pos += n as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_corpus(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn build_vocab_applies_min_count() {
        let f = write_corpus("abc abc abc xyz\n");
        let v = Vocabulary::build(f.path(), 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.token(0), "abc");
        assert_eq!(v.count(0), 3);
        assert_eq!(v.total_words(), 3);
        assert_eq!(v.id("xyz"), None);
    }

    #[test]
    fn build_vocab_orders_by_count_then_token() {
        let f = write_corpus("b b c c a a a\n");
        let v = Vocabulary::build(f.path(), 1).unwrap();
        assert_eq!(v.tokens(), &["a", "b", "c"]);
        assert_eq!(v.counts(), &[3, 2, 2]);
        assert_eq!(v.total_words(), 7);
        assert_eq!(v.id("c"), Some(2));
    }

    #[test]
    fn build_vocab_empty_corpus_errors() {
        let f = write_corpus("");
        match Vocabulary::build(f.path(), 1) {
            Err(Error::EmptyVocabulary { min_count: 1 }) => {}
            other => panic!("expected EmptyVocabulary, got {other:?}"),
        }
    }

    #[test]
    fn build_vocab_nothing_survives_errors() {
        let f = write_corpus("a b c d\n");
        assert!(matches!(
            Vocabulary::build(f.path(), 5),
            Err(Error::EmptyVocabulary { min_count: 5 })
        ));
    }

    #[test]
    fn build_vocab_rejects_invalid_utf8_survivor() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"ok ok \xff\xfe \xff\xfe\n").unwrap();
        f.flush().unwrap();
        match Vocabulary::build(f.path(), 2) {
            Err(Error::InvalidToken { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("expected InvalidToken, got {other:?}"),
        }
    }

    #[test]
    fn keep_probability_matches_closed_form() {
        // z = count / (sample * total) = 4 here, so p = (2 + 1) / 4.
        assert!((keep_probability(4, 1.0, 1) - 0.75).abs() < 1e-12);
        // Rare word: z tiny, probability clamps to 1.
        assert_eq!(keep_probability(1, 1e-4, 1_000_000_000), 1.0);
        // Subsampling disabled.
        assert_eq!(keep_probability(1_000_000, 0.0, 1_000_000), 1.0);
    }

    #[test]
    fn keep_probability_non_increasing_in_count() {
        let total = 1_000_000u64;
        let mut last = f64::INFINITY;
        for count in [1u64, 10, 100, 1_000, 10_000, 100_000, 1_000_000] {
            let p = keep_probability(count, 1e-4, total);
            assert!(p <= last + 1e-15, "count {count}: {p} > {last}");
            assert!((0.0..=1.0).contains(&p));
            last = p;
        }
    }

    #[test]
    fn sentences_drop_oov_and_skip_empty_lines() {
        let f = write_corpus("a b qq a\n\nrr ss\nb a\n");
        let v = Vocabulary::build(f.path(), 2).unwrap();
        let sents: Vec<Vec<u32>> = iter_sentences(f.path(), &v)
            .unwrap()
            .map(|s| s.unwrap())
            .collect();
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        assert_eq!(sents, vec![vec![a, b, a], vec![b, a]]);
    }

    #[test]
    fn long_lines_split_at_cap() {
        let words: Vec<String> = (0..2500).map(|_| "w".to_owned()).collect();
        let f = write_corpus(&format!("{}\n", words.join(" ")));
        let v = Vocabulary::build(f.path(), 1).unwrap();
        let lens: Vec<usize> = iter_sentences(f.path(), &v)
            .unwrap()
            .map(|s| s.unwrap().len())
            .collect();
        assert_eq!(lens, vec![1000, 1000, 500]);
    }

    #[test]
    fn partition_covers_file_with_line_aligned_bounds() {
        let mut text = String::new();
        for i in 0..100 {
            text.push_str(&format!("w{} w{} w{}\n", i, (i * 7) % 100, (i * 13) % 100));
        }
        let f = write_corpus(&text);
        let len = text.len() as u64;
        for parts in [1, 2, 3, 7] {
            let ranges = partition_byte_ranges(f.path(), parts).unwrap();
            assert_eq!(ranges.len(), parts);
            assert_eq!(ranges[0].0, 0);
            assert_eq!(ranges.last().unwrap().1, len);
            for w in ranges.windows(2) {
                assert_eq!(w[0].1, w[1].0);
            }
            for &(s, e) in &ranges {
                assert!(s <= e);
                // Every interior boundary must begin a line.
                if s > 0 && s < len {
                    assert_eq!(text.as_bytes()[s as usize - 1], b'\n');
                }
            }
        }
    }

    #[test]
    fn partitioned_readers_cover_each_line_once() {
        let mut text = String::new();
        for i in 0..57 {
            text.push_str(&format!("t{i} t{} t{}\n", i % 5, i % 3));
        }
        let f = write_corpus(&text);
        let v = Vocabulary::build(f.path(), 1).unwrap();
        let full: usize = iter_sentences(f.path(), &v)
            .unwrap()
            .map(|s| s.unwrap().len())
            .sum();
        for parts in [2, 4, 5] {
            let mut words = 0usize;
            for range in partition_byte_ranges(f.path(), parts).unwrap() {
                let mut r =
                    SentenceReader::open(f.path(), &v, range, MAX_SENTENCE_WORDS).unwrap();
                let mut buf = Vec::new();
                while r.next_sentence(&mut buf).unwrap() {
                    words += buf.len();
                }
            }
            assert_eq!(words, full, "parts = {parts}");
        }
    }

    #[test]
    fn vocab_save_load_round_trip() {
        let f = write_corpus("b b c c a a a\n");
        let v = Vocabulary::build(f.path(), 1).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        v.save(out.path()).unwrap();
        let loaded = Vocabulary::load(out.path()).unwrap();
        assert_eq!(loaded.tokens(), v.tokens());
        assert_eq!(loaded.counts(), v.counts());
        assert_eq!(loaded.total_words(), v.total_words());
    }

    #[test]
    fn vocab_load_rejects_garbage() {
        let f = write_corpus("a 3\nb\n");
        assert!(matches!(
            Vocabulary::load(f.path()),
            Err(Error::VocabFormat { line: 2, .. })
        ));
        // Counts must be non-increasing in id order.
        let f = write_corpus("a 1\nb 5\n");
        assert!(Vocabulary::load(f.path()).is_err());
    }

    #[test]
    fn from_entries_rejects_duplicates_and_zero_counts() {
        assert!(Vocabulary::from_entries(vec![("a".into(), 2), ("a".into(), 1)]).is_err());
        assert!(Vocabulary::from_entries(vec![("a".into(), 0)]).is_err());
        assert!(Vocabulary::from_entries(vec![]).is_err());
    }
}
