use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use singtrace_core::example4::Method;
use singtrace_core::states::{StructuredSet, WindowMode};
use singtrace_core::{make_family, SpectralSequence};

#[derive(Debug, Parser)]
#[command(name = "singtrace", version, about = "Singular trace estimates and eccentricity diagnostics for eigenvalue sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Add wall-clock timings to the report (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify S_{2n}/S_n against 1 up to a horizon.
    Analyze(AnalyzeArgs),
    /// Extract the witnesses p_k.
    Pk(PkArgs),
    /// Finite-cutoff trace estimates of A relative to T.
    #[command(subcommand)]
    Trace(TraceCommand),
    /// Averaged operator, its k-dilation and the two eigenvalue estimates.
    Dilate(DilateArgs),
    /// Window means of a structured set's indicator.
    State(StateArgs),
    /// Cesàro means for the block operator A_q.
    Example4(Example4Args),
    /// Run a command over a grid of parameters.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_parser = parse_seq)]
    pub seq: SpectralSequence,
    #[arg(long, default_value_t = 1 << 20, value_parser = clap::value_parser!(u64).range(8..))]
    pub horizon: u64,
    #[arg(long, default_value_t = 0.05, value_parser = parse_nonneg)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct PkArgs {
    #[arg(long, value_parser = parse_seq)]
    pub seq: SpectralSequence,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    pub kmax: u32,
    #[arg(long, default_value_t = 1 << 20, value_parser = clap::value_parser!(u64).range(8..))]
    pub horizon: u64,
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    /// Cesàro mean of S_{2^k}(A)/S_{2^k}(T) over k = 1..omega.
    Dixmier(DixmierArgs),
    /// Mean of S_{k p_k}(A)/S_{k p_k}(T) over the witnesses of T.
    Varga(VargaArgs),
}

#[derive(Debug, Args)]
pub struct DixmierArgs {
    /// The operator A.
    #[arg(long, value_parser = parse_seq)]
    pub seq: SpectralSequence,
    /// The reference operator T.
    #[arg(long = "ref", value_parser = parse_seq)]
    pub reference: SpectralSequence,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    pub omega: u32,
}

#[derive(Debug, Args)]
pub struct VargaArgs {
    #[arg(long, value_parser = parse_seq)]
    pub seq: SpectralSequence,
    #[arg(long = "ref", value_parser = parse_seq)]
    pub reference: SpectralSequence,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    pub kmax: u32,
    #[arg(long, default_value_t = 1 << 20, value_parser = clap::value_parser!(u64).range(8..))]
    pub horizon: u64,
}

#[derive(Debug, Args)]
pub struct DilateArgs {
    #[arg(long, value_parser = parse_seq)]
    pub seq: SpectralSequence,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
    pub k: u64,
    /// Largest n at which the estimates are checked.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
    pub horizon: u64,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// squares | dyadicblocks | intervals:file=<path>
    #[arg(long, value_parser = parse_set)]
    pub set: StructuredSet,
    /// Window as `k,n` or `k=<k>,n=<n>`; repeatable.
    #[arg(long, value_parser = parse_window, required_unless_present = "window_square")]
    pub window: Vec<(u64, u64)>,
    /// Square window as `r,s` or `r=<r>,s=<s>`; repeatable.
    #[arg(long = "window-square", value_parser = parse_square)]
    pub window_square: Vec<(u64, u64)>,
    #[arg(long, value_parser = parse_mode, default_value = "translation")]
    pub mode: WindowMode,
    /// Odd-part parameter of dyadic windows.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    /// Double each window until its mean moves by less than `--tol`.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 1e-3, value_parser = parse_nonneg)]
    pub tol: f64,
    #[arg(long, default_value_t = 20)]
    pub max_steps: u32,
}

#[derive(Debug, Args)]
pub struct Example4Args {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=30))]
    pub q: u32,
    #[arg(long, required_unless_present_any = ["p", "sweep"], conflicts_with = "p")]
    pub s: Option<u32>,
    #[arg(long, required_unless_present = "p", conflicts_with = "p")]
    pub r: Option<u32>,
    /// Raw cutoff p instead of (s, r).
    #[arg(long, conflicts_with = "sweep")]
    pub p: Option<u64>,
    #[arg(long, value_parser = parse_method, default_value = "direct")]
    pub method: Method,
    /// Comma-separated list of s values.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<u32>,
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// `analyze` over several sequences and horizons.
    Analyze {
        #[arg(long, value_parser = parse_seq, required = true)]
        seq: Vec<SpectralSequence>,
        #[arg(long, value_delimiter = ',', default_value = "1048576")]
        horizon: Vec<u64>,
        #[arg(long, default_value_t = 0.05, value_parser = parse_nonneg)]
        eps: f64,
    },
    /// `trace dixmier` over several operators and cutoffs.
    Dixmier {
        #[arg(long, value_parser = parse_seq, required = true)]
        seq: Vec<SpectralSequence>,
        #[arg(long = "ref", value_parser = parse_seq)]
        reference: SpectralSequence,
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        omega: Vec<u32>,
    },
    /// `example4` over a grid of (q, s, r).
    Example4 {
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<u32>,
        #[arg(long, value_parser = parse_method, default_value = "direct")]
        method: Method,
    },
}

fn parse_seq(s: &str) -> Result<SpectralSequence, String> {
    make_family(s).map_err(|e| e.to_string())
}

fn parse_set(s: &str) -> Result<StructuredSet, String> {
    StructuredSet::parse(s).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<WindowMode, String> {
    s.parse().map_err(|e: singtrace_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: singtrace_core::Error| e.to_string())
}

fn parse_nonneg(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` must be finite and non-negative"))
    }
}

/// `a,b` or `x=a,y=b` with the given names, in order.
fn parse_pair(s: &str, names: [&str; 2]) -> Result<(u64, u64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected `{0},{1}` or `{0}=..,{1}=..`, got `{s}`", names[0], names[1]));
    }
    let mut out = [0u64; 2];
    for (i, part) in parts.iter().enumerate() {
        let value = match part.split_once('=') {
            Some((key, v)) if key.trim() == names[i] => v.trim(),
            Some((key, _)) => return Err(format!("expected `{}=`, got `{}=`", names[i], key.trim())),
            None => part,
        };
        out[i] = value.parse().map_err(|_| format!("`{value}` is not a non-negative integer"))?;
    }
    Ok((out[0], out[1]))
}

fn parse_window(s: &str) -> Result<(u64, u64), String> {
    parse_pair(s, ["k", "n"])
}

fn parse_square(s: &str) -> Result<(u64, u64), String> {
    parse_pair(s, ["r", "s"])
}
