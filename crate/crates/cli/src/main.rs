//! `profcct`: convert, inspect, analyze and serve calling-context profiles.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use profcct_core::analysis::ViewKind;

#[derive(Debug, Parser)]
#[command(name = "profcct", version, about = "Calling-context profile analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a folded, pprof or native profile to native or folded form.
    Convert {
        input: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        /// Output format; inferred from the output extension when absent.
        #[arg(long = "to", value_enum)]
        to: Option<OutputFormat>,
        /// Metric written to folded output.
        #[arg(long)]
        metric: Option<String>,
    },
    /// Print metadata, metrics and node counts.
    Info { input: PathBuf },
    /// Print the heaviest rows of a view as TSV.
    Top {
        input: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
        /// Aligned human-readable table.
        #[arg(long)]
        pretty: bool,
    },
    /// Write the export document of one view.
    View {
        input: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        #[command(flatten)]
        export: ExportArgs,
    },
    /// Write the export document of a two-profile diff.
    Diff {
        before: PathBuf,
        after: PathBuf,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long = "view", value_enum)]
        view: Option<ViewArg>,
        /// Scale the second profile to the first one's total.
        #[arg(long)]
        normalize_by_total: bool,
        #[command(flatten)]
        export: ExportArgs,
    },
    /// Write the export document of a multi-profile aggregate.
    Aggregate {
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        metric: Option<String>,
        /// Read absent contexts as zero rather than skipping them.
        #[arg(long)]
        missing_as_zero: bool,
        #[command(flatten)]
        export: ExportArgs,
    },
    /// Write the view of one role's contexts linked to an anchor context.
    Correlate {
        input: PathBuf,
        /// Role pair such as `alloc:use`.
        #[arg(long, value_parser = parse_roles)]
        roles: (String, String),
        /// Semicolon-separated function path of the anchor in the FROM role.
        #[arg(long)]
        anchor: Option<String>,
        #[command(flatten)]
        view: ViewArgs,
        #[command(flatten)]
        export: ExportArgs,
    },
    /// Attach a formula metric and write native output.
    Derive {
        input: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long = "as")]
        name: String,
        /// Evaluate over exclusive rather than inclusive values.
        #[arg(long)]
        exclusive: bool,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Serve the given profiles over HTTP.
    Serve {
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Directory that source reads are confined to.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Directory of UI assets served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Native,
    Folded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ViewArg {
    Topdown,
    Bottomup,
    Flat,
}

impl From<ViewArg> for ViewKind {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Topdown => ViewKind::TopDown,
            ViewArg::Bottomup => ViewKind::BottomUp,
            ViewArg::Flat => ViewKind::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ColorArg {
    Module,
    File,
    Diff,
}

#[derive(Debug, Args)]
struct ViewArgs {
    #[arg(long)]
    metric: Option<String>,
    #[arg(long = "view", value_enum)]
    view: Option<ViewArg>,
    /// Prune nodes below this fraction of the root.
    #[arg(long)]
    threshold: Option<f64>,
    /// Replace everything below this depth with a residual node.
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    collapse_recursion: bool,
    /// Carry subtree-inclusive values along bottom-up chains.
    #[arg(long)]
    inclusive_callers: bool,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
    /// Narrowest rectangle kept, as a fraction of the root width.
    #[arg(long)]
    min_width: Option<f64>,
    #[arg(long, value_enum)]
    color: Option<ColorArg>,
    /// Omit table rows from the document.
    #[arg(long)]
    no_rows: bool,
}

fn parse_roles(s: &str) -> Result<(String, String), String> {
    match s.split_once(':') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected FROM:TO, got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            output::report(&e);
            ExitCode::from(e.exit_code())
        }
    }
}
