//! Runs a configured batch and writes its output bundle.
//!
//! Layout of the output directory:
//!
//! ```text
//! config.toml         effective configuration after overrides
//! manifest.json       tool version, seed, config echo, file list
//! results.csv         one row per robot per run
//! histograms.csv      initial and final probability histograms
//! classification.csv  per-run forager/loafer split
//! binomial.csv        forager-count distribution vs Binomial(n, p_hat)
//! summary.csv         scalar metrics of the batch
//! events/run_NNN.jsonl  per-run event logs, only with event logging on
//! ```
//!
//! All analyses run before the first byte is written, from a single thread,
//! so the bundle is a pure function of the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::allocation::{Mode, ObjectType, VdrParams};
use crate::analysis::{
    bimodality_score, binomial_comparison, classify_foragers, expected_region, histogram, preference_agreement,
    AnalysisError, BinomialComparison, ClassificationReport, PreferenceAgreement,
};
use crate::config::{write_config, ConfigFile};
use crate::engine::Event;
use crate::experiment::{run_batch, ExperimentConfig, ExperimentError, RunResult};

/// Bins of every probability histogram.
pub const HISTOGRAM_BINS: usize = 8;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";
pub const CLASSIFICATION_FILE: &str = "classification.csv";
pub const BINOMIAL_FILE: &str = "binomial.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const EVENTS_DIR: &str = "events";

/// Overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub mode: Option<Mode>,
    pub events: bool,
}

impl RunOptions {
    pub fn apply(&self, config: &ExperimentConfig<f64>) -> ExperimentConfig<f64> {
        let mut c = config.clone();
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(n) = self.replications {
            c.replications = n;
        }
        if let Some(mode) = self.mode {
            c.mode = mode;
        }
        c
    }
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One histogram of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramTable {
    /// `p1`, `pobj1` or `pobj2`.
    pub quantity: &'static str,
    /// `initial` or `final`.
    pub stage: &'static str,
    pub low: f64,
    pub high: f64,
    pub counts: Vec<usize>,
}

impl HistogramTable {
    pub fn bimodality(&self) -> f64 {
        bimodality_score(&self.counts)
    }
}

/// Everything a batch produced, in memory.
#[derive(Debug, Clone)]
pub struct BatchReport {
    pub config: ExperimentConfig<f64>,
    pub results: Vec<RunResult<f64>>,
    pub events: Vec<Option<Vec<Event>>>,
    pub histograms: Vec<HistogramTable>,
    pub classification: ClassificationReport<f64>,
    pub binomial: BinomialComparison,
    /// Modified mode only.
    pub preferences: Option<PreferenceAgreement>,
}

impl BatchReport {
    pub fn histogram(&self, quantity: &str, stage: &str) -> Option<&HistogramTable> {
        self.histograms
            .iter()
            .find(|h| h.quantity == quantity && h.stage == stage)
    }

    /// Final-value bimodality of `quantity`.
    pub fn bimodality(&self, quantity: &str) -> Option<f64> {
        self.histogram(quantity, "final").map(HistogramTable::bimodality)
    }
}

/// A written bundle.
#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub dir: PathBuf,
    /// Paths relative to `dir`, in write order.
    pub files: Vec<PathBuf>,
    pub report: BatchReport,
}

/// Runs every replication of `config` and computes all analyses.
pub fn run_analysis(config: &ExperimentConfig<f64>, events: bool) -> Result<BatchReport, BundleError> {
    let batch = run_batch(config, events)?;
    let (results, events): (Vec<_>, Vec<_>) = batch.into_iter().unzip();
    let classification = classify_foragers(&results)?;
    let binomial = binomial_comparison(&classification.forager_counts(), config.robot_count)?;
    let preferences = match config.mode {
        Mode::Modified => Some(preference_agreement(&results, &classification)),
        Mode::Original => None,
    };
    let histograms = histograms(config, &results)?;
    Ok(BatchReport {
        config: config.clone(),
        results,
        events,
        histograms,
        classification,
        binomial,
        preferences,
    })
}

fn histograms(
    config: &ExperimentConfig<f64>,
    results: &[RunResult<f64>],
) -> Result<Vec<HistogramTable>, AnalysisError> {
    let mut quantities: Vec<(&'static str, VdrParams<f64>, Vec<f64>)> = vec![(
        "p1",
        config.leave_params,
        results.iter().flat_map(|r| r.final_p1.iter().copied()).collect(),
    )];
    if config.mode == Mode::Modified {
        for (t, name) in [(ObjectType::Type1, "pobj1"), (ObjectType::Type2, "pobj2")] {
            let values = results.iter().flat_map(|r| r.final_pobj_of(t)).collect();
            quantities.push((name, config.obj_params[t.index()], values));
        }
    }
    let mut tables = Vec::new();
    for (quantity, params, finals) in quantities {
        let initials = vec![params.p_initial; finals.len()];
        for (stage, values) in [("initial", initials), ("final", finals)] {
            tables.push(HistogramTable {
                quantity,
                stage,
                low: params.p_min,
                high: params.p_max,
                counts: histogram(&values, HISTOGRAM_BINS, params.p_min, params.p_max)?,
            });
        }
    }
    Ok(tables)
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    replications: usize,
    histogram_bins: usize,
    config: ConfigFile,
    files: Vec<String>,
}

/// Applies `options`, runs the batch and writes the bundle into `out_dir`.
/// On an I/O failure every file and directory this call created is removed.
pub fn run_command(
    config: &ExperimentConfig<f64>,
    options: RunOptions,
    out_dir: impl AsRef<Path>,
) -> Result<OutputBundle, BundleError> {
    let config = options.apply(config);
    let report = run_analysis(&config, options.events)?;
    let files = render(&report);
    let dir = out_dir.as_ref().to_path_buf();
    let mut writer = Writer::new(&dir);
    match writer.write_all(&files) {
        Ok(()) => Ok(OutputBundle {
            dir,
            files: files.into_iter().map(|(p, _)| p).collect(),
            report,
        }),
        Err(e) => {
            writer.rollback();
            Err(e)
        }
    }
}

/// Renders every file of the bundle as `(relative path, contents)`.
pub fn render(report: &BatchReport) -> Vec<(PathBuf, String)> {
    let mut files = vec![
        (PathBuf::from(CONFIG_FILE), write_config(&report.config)),
        (PathBuf::from(RESULTS_FILE), results_csv(report)),
        (PathBuf::from(HISTOGRAMS_FILE), histograms_csv(report)),
        (PathBuf::from(CLASSIFICATION_FILE), classification_csv(report)),
        (PathBuf::from(BINOMIAL_FILE), binomial_csv(report)),
        (PathBuf::from(SUMMARY_FILE), summary_csv(report)),
    ];
    for (run, events) in report.events.iter().enumerate() {
        if let Some(events) = events {
            files.push((
                Path::new(EVENTS_DIR).join(format!("run_{run:03}.jsonl")),
                events_jsonl(events),
            ));
        }
    }
    let mut listed: Vec<String> = files
        .iter()
        .map(|(p, _)| p.to_string_lossy().replace('\\', "/"))
        .collect();
    listed.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        tool: "forage",
        version: env!("CARGO_PKG_VERSION"),
        seed: report.config.seed,
        replications: report.config.replications,
        histogram_bins: HISTOGRAM_BINS,
        config: ConfigFile::from_config(&report.config),
        files: listed,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    files.push((PathBuf::from(MANIFEST_FILE), json));
    files
}

fn results_csv(report: &BatchReport) -> String {
    let mut out = String::from(
        "run,robot,final_p1,final_pobj1,final_pobj2,capability1,capability2,successes,failures,role,label,region\n",
    );
    for (r, run) in report.results.iter().zip(&report.classification.runs) {
        for i in 0..r.robot_count() {
            let role = if run.forager_ids.contains(&i) {
                "forager"
            } else {
                "loafer"
            };
            let label = run.preference_labels.as_ref().map_or("", |labels| labels[i].name());
            let cap = r.capabilities[i];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.replication,
                i,
                r.final_p1[i],
                r.final_pobj[i][0],
                r.final_pobj[i][1],
                cap[0],
                cap[1],
                r.trips[i].successes,
                r.trips[i].failures,
                role,
                label,
                expected_region(cap).name(),
            );
        }
    }
    out
}

fn histograms_csv(report: &BatchReport) -> String {
    let mut out = String::from("quantity,stage,bin,low,high,count\n");
    for h in &report.histograms {
        let width = (h.high - h.low) / h.counts.len() as f64;
        for (bin, count) in h.counts.iter().enumerate() {
            let lo = h.low + width * bin as f64;
            let hi = if bin + 1 == h.counts.len() {
                h.high
            } else {
                h.low + width * (bin + 1) as f64
            };
            let _ = writeln!(out, "{},{},{},{},{},{}", h.quantity, h.stage, bin, lo, hi, count);
        }
    }
    out
}

fn classification_csv(report: &BatchReport) -> String {
    let mut out = String::from("run,threshold_p1,foragers,loafers,degenerate\n");
    for run in &report.classification.runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            run.replication,
            run.threshold_p1,
            run.forager_ids.len(),
            run.loafer_ids.len(),
            run.degenerate
        );
    }
    out
}

fn binomial_csv(report: &BatchReport) -> String {
    let mut out = String::from("foragers,observed,binomial\n");
    for row in &report.binomial.rows {
        let _ = writeln!(out, "{},{},{}", row.k, row.observed, row.theoretical);
    }
    out
}

fn summary_csv(report: &BatchReport) -> String {
    let mut out = String::from("metric,value\n");
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    put("replications", report.results.len().to_string());
    put("robots_per_run", report.config.robot_count.to_string());
    for h in report.histograms.iter().filter(|h| h.stage == "final") {
        put(&format!("bimodality_{}", h.quantity), h.bimodality().to_string());
    }
    put("binomial_p_hat", report.binomial.p_hat.to_string());
    put("binomial_tv_distance", report.binomial.tv_distance.to_string());
    put("degenerate_runs", report.classification.degenerate_runs().to_string());
    if let Some(p) = report.preferences {
        put("preference_match_rate", p.match_rate().to_string());
        put("loafer_yellow_rate", p.loafer_yellow_rate().to_string());
    }
    let retrieved = report
        .results
        .iter()
        .fold([0u64; 2], |acc, r| [acc[0] + r.retrieved[0], acc[1] + r.retrieved[1]]);
    put("retrieved_type1", retrieved[0].to_string());
    put("retrieved_type2", retrieved[1].to_string());
    out
}

fn events_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Writes files and remembers what it created so a failure can be undone.
struct Writer {
    root: PathBuf,
    created_files: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
}

impl Writer {
    fn new(root: &Path) -> Self {
        Writer {
            root: root.to_path_buf(),
            created_files: Vec::new(),
            created_dirs: Vec::new(),
        }
    }

    fn ensure_dir(&mut self, dir: &Path) -> Result<(), BundleError> {
        if dir.is_dir() {
            return Ok(());
        }
        if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
            self.ensure_dir(parent)?;
        }
        fs::create_dir(dir).map_err(|source| BundleError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        self.created_dirs.push(dir.to_path_buf());
        Ok(())
    }

    fn write_all(&mut self, files: &[(PathBuf, String)]) -> Result<(), BundleError> {
        let root = self.root.clone();
        self.ensure_dir(&root)?;
        for (rel, contents) in files {
            let path = root.join(rel);
            if let Some(parent) = path.parent() {
                self.ensure_dir(parent)?;
            }
            fs::write(&path, contents).map_err(|source| BundleError::Io {
                path: path.clone(),
                source,
            })?;
            self.created_files.push(path);
        }
        Ok(())
    }

    fn rollback(&mut self) {
        for f in self.created_files.drain(..).rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.created_dirs.drain(..).rev() {
            let _ = fs::remove_dir(d);
        }
    }
}
