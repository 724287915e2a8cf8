//! Command-line front end: model files, corpora and analysis reports.

pub mod commands;
pub mod error;
pub mod model_file;

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lmtight_core::tightness::DEFAULT_MAX_LEN;
use lmtight_core::EosBoundFamily;
use serde::Serialize;

use commands::AnalyzeOptions;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lmtight", version, about = "Decide whether autoregressive sequence models are tight")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// JSON
    Machine,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide tightness and report termination statistics.
    Analyze {
        /// Model file or builtin:<fig1a|fig1b|relu-rnn|softplus-rnn|parity>.
        model: String,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Maximum number of prefixes enumerated per step.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u128,
        /// EOS lower-bound family, e.g. constant:0.1, harmonic:1,1, log-harmonic:1,2, table:0.5,0.2.
        #[arg(long, value_parser = parse_bound)]
        bound: Option<EosBoundFamily<f64>>,
        /// Geometric EOS upper bound geometric:c,r, used to certify non-tightness.
        #[arg(long, value_parser = parse_bound)]
        upper_bound: Option<EosBoundFamily<f64>>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Print the probability of a string and of it as a prefix.
    Prob {
        model: String,
        /// Whitespace-separated symbols; single-character symbols may be run together.
        string: String,
        #[command(flatten)]
        output: Output,
    },
    /// Sample strings and summarize how often generation stops.
    Sample {
        model: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Estimate an n-gram model from a corpus and write it as a model file.
    EstimateNgram {
        corpus: String,
        #[arg(short, long)]
        n: usize,
        /// Path of the model file to write.
        #[arg(long)]
        out: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

/// Parses `family:p1,p2,…`.
pub fn parse_bound(arg: &str) -> Result<EosBoundFamily<f64>, String> {
    let (family, params) = arg.split_once(':').ok_or("expected <family>:<params>")?;
    let values = params
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<Vec<f64>, String>>()?;
    let two = |make: fn(f64, f64) -> EosBoundFamily<f64>| match values.as_slice() {
        [a, b] => Ok(make(*a, *b)),
        _ => Err(format!("`{family}` takes two parameters")),
    };
    let bound = match family {
        "constant" => match values.as_slice() {
            [e] => EosBoundFamily::Constant { epsilon: *e },
            _ => return Err("`constant` takes one parameter".into()),
        },
        "harmonic" => two(|c, d| EosBoundFamily::Harmonic { c, d })?,
        "log-harmonic" => two(|c, d| EosBoundFamily::LogHarmonic { c, d })?,
        "geometric" => two(|c, r| EosBoundFamily::Geometric { c, r })?,
        "table" => EosBoundFamily::ExplicitTable { values },
        other => return Err(format!("unknown family `{other}`")),
    };
    bound.validate().map_err(|e| e.to_string())?;
    Ok(bound)
}

fn emit<R: Serialize>(
    report: &R,
    render: fn(&R) -> String,
    format: Format,
    out: Option<&str>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let text = match format {
        Format::Text => render(report),
        Format::Machine => {
            let mut json = serde_json::to_string_pretty(report).expect("reports serialize");
            json.push('\n');
            json
        }
    };
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io { path: path.into(), source: e }),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e }),
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { model, horizon, budget, bound, upper_bound, samples, max_len, seed, output } => {
            if horizon == 0 || samples == 0 || max_len == 0 {
                return Err(CliError::Usage("--horizon, --samples and --max-len must be positive".into()));
            }
            let loaded = commands::load_model(&model)?;
            let opts = AnalyzeOptions { horizon, budget, bound, upper_bound, samples, max_len, seed };
            let report = commands::analyze(&loaded, &opts)?;
            emit(&report, commands::render_report, output.format, output.out.as_deref(), stdout)
        }
        Command::Prob { model, string, output } => {
            let loaded = commands::load_model(&model)?;
            let report = commands::prob(&loaded, &string)?;
            emit(&report, commands::render_prob, output.format, output.out.as_deref(), stdout)
        }
        Command::Sample { model, samples, max_len, seed, output } => {
            let loaded = commands::load_model(&model)?;
            let report = commands::sample(&loaded, samples, max_len, seed)?;
            emit(&report, commands::render_sample, output.format, output.out.as_deref(), stdout)
        }
        Command::EstimateNgram { corpus, n, out, format } => {
            let report = commands::estimate_ngram(&corpus, n, &out)?;
            emit(&report, commands::render_ngram, format, None, stdout)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let sink: &mut dyn Write = if informational { stdout } else { stderr };
            let _ = write!(sink, "{}", e.render());
            return if informational { 0 } else { 1 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
