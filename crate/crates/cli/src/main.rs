mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (bundle schema 1, adapter protocol 1)"
);

/// Generate contextual privacy policies from app screenshots and privacy policies.
#[derive(Parser, Debug)]
#[command(name = "cppgen", version = VERSION)]
pub struct Cli {
    /// `key = value` configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-screenshot and per-app work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect privacy-related contexts on screenshots.
    Detect {
        #[command(flatten)]
        detect: DetectArgs,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract per-data-type policy segments.
    Extract {
        #[command(flatten)]
        extract: ExtractArgs,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect, extract, and assemble a CPP bundle for one app.
    Generate {
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        extract: ExtractArgs,
        #[arg(long)]
        app_id: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write report.html.
        #[arg(long)]
        html: bool,
        /// Also write annotated screenshots under overlays/.
        #[arg(long)]
        overlays: bool,
        /// Zero timestamps so repeated runs are byte-identical.
        #[arg(long)]
        reproducible: bool,
    },
    /// Score predicted bundles against an annotated dataset.
    Evaluate {
        /// Dataset root with one directory per app.
        #[arg(long)]
        dataset: PathBuf,
        /// Prediction root holding `<app_id>/bundle.json`.
        #[arg(long)]
        pred: PathBuf,
        /// IoU threshold for context matches.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        segment_threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// List contexts whose data type the policy does not disclose.
    Lack {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct DetectArgs {
    /// Screenshot image (PNG or JPEG); repeatable.
    #[arg(long = "screenshot", num_args = 1..)]
    pub screenshots: Vec<PathBuf>,
    /// OCR adapter command line.
    #[arg(long)]
    pub ocr_adapter: Option<String>,
    /// Text-classifier adapter command line; replaces keyword matching when it answers.
    #[arg(long)]
    pub text_adapter: Option<String>,
    /// Icon-classifier adapter command line; replaces the kNN model.
    #[arg(long)]
    pub icon_adapter: Option<String>,
    /// Directory of `<IconClass>/*.png` training images for the kNN classifier.
    #[arg(long)]
    pub icon_model: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ExtractArgs {
    /// Local policy file (HTML, or plain text with a .txt extension).
    #[arg(long, conflicts_with = "policy_url")]
    pub policy: Option<PathBuf>,
    /// Policy URL to download.
    #[arg(long)]
    pub policy_url: Option<String>,
    /// Keyword list (`DataType<TAB>phrase` lines); defaults to the bundled list.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    /// Hypernym links (`child<TAB>parent` lines); defaults to the bundled taxonomy.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Labelled sentences (`1<TAB>text` / `0<TAB>text`) for the relevance classifier.
    #[arg(long)]
    pub nb_model: Option<PathBuf>,
    /// Heading phrase rules, one per line, `!` for negative rules.
    #[arg(long)]
    pub heading_rules: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
