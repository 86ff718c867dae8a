//! Throughput benchmark harness.
//!
//! Runs both trainers over a shared, size-capped corpus prefix at each
//! requested thread count and records words/sec plus model-update counters.
//! Results serialize to JSON, to CSV with a fixed schema, and to a static SVG
//! line plot of throughput versus threads.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{TrainerKind, TrainingConfig};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::EmbeddingModel;
use crate::sampling::{NegativeSampleTable, Rng};
use crate::trainer;

/// Default cap on the corpus prefix used for benchmarking (100 MB), so desk
/// runs finish in minutes.
pub const DEFAULT_PREFIX_CAP_BYTES: u64 = 100 * 1024 * 1024;

/// Published single-node throughput figures for the two trainer styles,
/// included in reports as context for desk-scale numbers.
pub const REFERENCE_FOOTER: &str = "reference points: per-pair scalar trainer ~1.6M words/s and \
     shared-negative batched trainer ~5.8M words/s on a 36-core Xeon E5-2697 v4; \
     ~8.9M words/s on a 68-core Xeon Phi 7250";

/// One completed benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRun {
    pub trainer: TrainerKind,
    pub threads: usize,
    pub words_per_sec: f64,
    /// Model rows written back over the whole run.
    pub row_writes: u64,
    /// Batched-multiply calls (zero for the per-pair trainer).
    pub gemm_calls: u64,
    pub wall_seconds: f64,
}

/// A configuration that failed; the harness records it and keeps going.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchFailure {
    pub trainer: TrainerKind,
    pub threads: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    /// CPU model and logical core count of the host.
    pub machine: String,
    /// Bytes of corpus actually benchmarked (after the prefix cap).
    pub corpus_bytes: u64,
    pub runs: Vec<BenchRun>,
    pub failures: Vec<BenchFailure>,
    pub reference: String,
}

/// CPU model name from /proc/cpuinfo plus the logical core count, falling
/// back to the target architecture when cpuinfo is unavailable.
pub fn machine_descriptor() -> String {
    let logical = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|text| {
            text.lines()
                .find(|line| line.starts_with("model name"))
                .and_then(|line| line.split(':').nth(1))
                .map(|name| name.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    format!("{cpu} ({logical} logical cpus)")
}

/// Copies at most `cap_bytes` of `corpus` to `out`. When the cap cuts the
/// file short, the copy is truncated at the last newline inside the cap so no
/// partial line (and no split token) is ever benchmarked. Returns the number
/// of bytes written.
pub fn prepare_prefix(corpus: &Path, cap_bytes: u64, out: &Path) -> Result<u64> {
    let read_err = |source| Error::CorpusRead { path: corpus.to_owned(), offset: 0, source };
    let len = std::fs::metadata(corpus).map_err(read_err)?.len();
    let take = len.min(cap_bytes);
    let mut buf = Vec::with_capacity(take as usize);
    File::open(corpus)
        .map_err(read_err)?
        .take(take)
        .read_to_end(&mut buf)
        .map_err(read_err)?;
    if len > cap_bytes {
        if let Some(pos) = buf.iter().rposition(|&b| b == b'\n') {
            buf.truncate(pos + 1);
        }
    }
    std::fs::write(out, &buf)?;
    Ok(buf.len() as u64)
}

/// Runs both trainers at every thread count in `thread_list` on the same
/// corpus prefix, one configuration at a time (only the trainer under test is
/// multi-threaded). Each run starts from a freshly initialized model seeded
/// identically; vocabulary and negative-sample table are built once and
/// shared. Failed runs are recorded in the report and do not stop the
/// harness.
pub fn run_bench(
    corpus: &Path,
    base: &TrainingConfig,
    thread_list: &[usize],
    cap_bytes: u64,
) -> Result<BenchReport> {
    if thread_list.is_empty() {
        return Err(Error::Config("bench thread list must not be empty".into()));
    }
    if thread_list.iter().any(|&t| t == 0) {
        return Err(Error::Config("bench thread counts must be positive".into()));
    }
    let scratch = tempfile::tempdir()?;
    let prefix = scratch.path().join("bench_prefix.txt");
    let corpus_bytes = prepare_prefix(corpus, cap_bytes, &prefix)?;
    let vocab = Vocabulary::build(&prefix, base.min_count)?;
    let table = NegativeSampleTable::build(&vocab, base.negative_power, base.table_size)?;

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for &threads in thread_list {
        for kind in [TrainerKind::Hogwild, TrainerKind::Hogbatch] {
            let mut cfg = base.clone();
            cfg.threads = threads;
            cfg.trainer = kind;
            let mut rng = Rng::new(cfg.seed);
            let model = EmbeddingModel::<f32>::init(vocab.len(), cfg.dim, &mut rng);
            match trainer::run(&model, &vocab, &table, &prefix, &cfg) {
                Ok(report) => runs.push(BenchRun {
                    trainer: kind,
                    threads,
                    words_per_sec: report.words_per_sec,
                    row_writes: report.total_row_updates,
                    gemm_calls: report.gemm_calls.unwrap_or(0),
                    wall_seconds: report.wall_seconds,
                }),
                Err(err) => failures.push(BenchFailure {
                    trainer: kind,
                    threads,
                    message: err.to_string(),
                }),
            }
        }
    }
    Ok(BenchReport {
        machine: machine_descriptor(),
        corpus_bytes,
        runs,
        failures,
        reference: REFERENCE_FOOTER.to_string(),
    })
}

/// Writes one CSV row per run under the fixed header
/// `trainer,threads,words_per_sec,row_writes,gemm_calls,wall_seconds`.
pub fn write_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "trainer,threads,words_per_sec,row_writes,gemm_calls,wall_seconds")?;
    for run in &report.runs {
        writeln!(
            out,
            "{},{},{:.1},{},{},{:.3}",
            run.trainer, run.threads, run.words_per_sec, run.row_writes, run.gemm_calls, run.wall_seconds
        )?;
    }
    out.flush()?;
    Ok(())
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn human(value: f64) -> String {
    if value >= 1e6 {
        format!("{:.1}M", value / 1e6)
    } else if value >= 1e3 {
        format!("{:.0}k", value / 1e3)
    } else {
        format!("{value:.0}")
    }
}

/// Writes a static SVG line plot of words/sec versus thread count, one series
/// per trainer, with the machine descriptor and reference footer as captions.
pub fn write_svg(report: &BenchReport, path: &Path) -> Result<()> {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 150.0;
    const TOP: f64 = 56.0;
    const BOTTOM: f64 = 88.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let mut threads: Vec<usize> = report.runs.iter().map(|r| r.threads).collect();
    threads.sort_unstable();
    threads.dedup();
    let max_wps = report.runs.iter().map(|r| r.words_per_sec).fold(0.0f64, f64::max);
    let y_top = if max_wps > 0.0 { max_wps * 1.05 } else { 1.0 };

    // Thread counts are placed categorically (evenly by rank), which keeps
    // doubling ladders like 1,2,4,8 readable.
    let x_at = |t: usize| -> f64 {
        let idx = threads.iter().position(|&v| v == t).unwrap_or(0);
        if threads.len() <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * idx as f64 / (threads.len() - 1) as f64
        }
    };
    let y_at = |wps: f64| -> f64 { TOP + plot_h * (1.0 - wps / y_top) };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">Trainer throughput vs threads</text>\n",
        W / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"42\" text-anchor=\"middle\" fill=\"#555\">{}</text>\n",
        W / 2.0,
        xml_escape(&report.machine)
    ));

    // Horizontal gridlines and y tick labels.
    for k in 0..=4 {
        let value = y_top * k as f64 / 4.0;
        let y = y_at(value);
        svg.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            W - RIGHT
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" fill=\"#333\">{}</text>\n",
            LEFT - 8.0,
            y + 4.0,
            human(value)
        ));
    }
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - BOTTOM
    ));
    // X tick labels and axis captions.
    for &t in &threads {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{t}</text>\n",
            x_at(t),
            H - BOTTOM + 20.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">threads</text>\n",
        LEFT + plot_w / 2.0,
        H - BOTTOM + 42.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" transform=\"rotate(-90 20 {:.1})\" text-anchor=\"middle\">words/sec</text>\n",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    ));

    let series = [(TrainerKind::Hogwild, "#888888"), (TrainerKind::Hogbatch, "#d62728")];
    for (i, (kind, color)) in series.iter().enumerate() {
        let mut points: Vec<(usize, f64)> = report
            .runs
            .iter()
            .filter(|r| r.trainer == *kind)
            .map(|r| (r.threads, r.words_per_sec))
            .collect();
        points.sort_unstable_by_key(|&(t, _)| t);
        if points.len() > 1 {
            let path_points: Vec<String> = points
                .iter()
                .map(|&(t, wps)| format!("{:.1},{:.1}", x_at(t), y_at(wps)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                path_points.join(" ")
            ));
        }
        for &(t, wps) in &points {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"{color}\"/>\n",
                x_at(t),
                y_at(wps)
            ));
        }
        // Legend entry.
        let ly = TOP + 16.0 + 20.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - RIGHT + 10.0,
            W - RIGHT + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{kind}</text>\n",
            W - RIGHT + 40.0,
            ly + 4.0
        ));
    }
    if report.runs.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#a00\">no successful runs</text>\n",
            LEFT + plot_w / 2.0,
            TOP + plot_h / 2.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"{:.1}\" font-size=\"10\" fill=\"#555\">{}</text>\n",
        H - 24.0,
        xml_escape(&report.reference)
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
