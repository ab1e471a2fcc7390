//! Batch front-end: dataset-scale augmentation, pair synthesis, scoring,
//! paired comparison and ensemble consensus.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 partial data
//! failure (some cases failed; see `errors.json` or the log).

mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

pub use commands::{augment, compare, consensus, edit_handler, evaluate, synthesize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, mismatched inputs.
    #[error("{0}")]
    Usage(String),
    /// Some cases failed; the rest were written.
    #[error("{failed} of {total} case(s) failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Partial { .. } => 2,
        }
    }
}

impl From<lesionforge::Error> for CliError {
    fn from(e: lesionforge::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "lesionforge", version, about = "Synthetic longitudinal MRI pairs, artifact augmentation and new-lesion metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Dataset manifest (JSON, or CSV by extension).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Root seed; every case draws from its own sub-stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply sampled artifact plans to every case's FLAIR image.
    Augment {
        #[command(flatten)]
        common: Common,
        /// Sampling policy JSON (default: all artifacts, one per plan).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate synthetic time-point pairs with new-lesion masks.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Synthesis policy JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `baseline`, or the program of an external edit handler.
        #[arg(long, default_value = "baseline")]
        editor: String,
        /// Extra argument for the external handler (repeatable).
        #[arg(long = "editor-arg", allow_hyphen_values = true)]
        editor_args: Vec<String>,
        /// External handler timeout in seconds.
        #[arg(long, default_value_t = lesionforge::synth::DEFAULT_TIMEOUT_SECS)]
        editor_timeout: f64,
        /// Pairs per case.
        #[arg(long, default_value_t = 1)]
        n_pairs: usize,
        /// Rebuild the single pair described by a provenance file.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// Dataset manifest with prediction and gt roles.
        #[arg(long)]
        manifest: PathBuf,
        /// Detection thresholds JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Method name recorded in the report.
        #[arg(long, default_value = "method")]
        method: String,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Paired Wilcoxon signed-rank test between two evaluation reports.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        /// avg_score, dice, les_f1, lesion_sensitivity or lesion_ppv.
        #[arg(long, default_value = "avg_score")]
        metric: String,
        /// Optional JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold the mean of probability maps.
    Consensus {
        /// Probability maps (NIfTI).
        #[arg(required = true)]
        maps: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output mask path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve one external-editor request with the baseline editor.
    #[command(hide = true)]
    EditHandler { request_dir: PathBuf },
}

/// Derives a per-item seed from the root seed, a stream name and an item
/// key, so adding cases does not perturb other cases.
pub fn sub_seed(root: u64, stream: &str, key: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update((stream.len() as u64).to_le_bytes());
    h.update(stream.as_bytes());
    h.update((key.len() as u64).to_le_bytes());
    h.update(key.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = match jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Augment { common, config } => augment(&common, config.as_deref()),
        Command::Synthesize {
            common,
            config,
            editor,
            editor_args,
            editor_timeout,
            n_pairs,
            replay,
        } => synthesize(
            &common,
            config.as_deref(),
            &commands::EditorChoice::parse(editor, editor_args, editor_timeout),
            n_pairs,
            replay.as_deref(),
        ),
        Command::Evaluate {
            manifest,
            config,
            method,
            out,
            jobs,
        } => evaluate(&manifest, config.as_deref(), &method, &out, jobs),
        Command::Compare {
            report_a,
            report_b,
            metric,
            out,
        } => compare(&report_a, &report_b, &metric, out.as_deref()),
        Command::Consensus {
            maps,
            threshold,
            out,
        } => consensus(&maps, threshold, &out),
        Command::EditHandler { request_dir } => edit_handler(&request_dir),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_are_stable_and_distinct() {
        let a = sub_seed(1, "augment", "case1", 0);
        assert_eq!(a, sub_seed(1, "augment", "case1", 0));
        assert_ne!(a, sub_seed(1, "augment", "case2", 0));
        assert_ne!(a, sub_seed(1, "synthesize", "case1", 0));
        assert_ne!(a, sub_seed(2, "augment", "case1", 0));
        assert_ne!(a, sub_seed(1, "augment", "case1", 1));
        // length prefixes keep concatenations apart
        assert_ne!(sub_seed(0, "ab", "c", 0), sub_seed(0, "a", "bc", 0));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["lesionforge", "frobnicate"]), 1);
        assert_eq!(run(["lesionforge", "augment"]), 1);
        assert_eq!(run(["lesionforge", "--help"]), 0);
    }
}
