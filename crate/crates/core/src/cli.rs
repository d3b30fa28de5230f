//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 1 usage error, 2 bad input data, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::activation::{Activation, Interval};
use crate::envelope::{CutSense, Hull, Mode, RawInstance, RegionLabel, Separation};
use crate::error::{Error, Result};
use crate::gapstats::{gap_report, GapReport};
use crate::network::{make_random_net, NetworkModel};
use crate::num17;
use crate::tightener::{tighten_all, TightenOptions};

/// Environment variable consulted when `--threads` is not given.
pub const THREADS_ENV: &str = "STFE_HULL_THREADS";

#[derive(Parser, Debug)]
#[command(name = "stfe-hull", version, about = "Envelopes of activation-after-affine functions and bound tightening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Envelope queries at a point.
    #[command(subcommand)]
    Envelope(EnvelopeCommand),
    /// Separate (point, y) from the hull; prints "inside" or a cut.
    Separate(SeparateArgs),
    /// Tighten all hidden-neuron bounds of a network; writes a CSV report.
    Tighten(TightenArgs),
    /// Monte Carlo total gaps of h and of the envelope.
    GapReport(GapArgs),
    /// Write a random network as .nn.json.
    MakeNet(MakeNetArgs),
    /// CSV grid of f, h, envelopes and region labels of a 2-D instance.
    Surface(SurfaceArgs),
}

#[derive(Subcommand, Debug)]
enum EnvelopeCommand {
    /// Value and supergradient of the concave envelope (and the convex side).
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Weights, comma separated.
    #[arg(short = 'w', long = "weights", allow_hyphen_values = true, value_delimiter = ',', required = true)]
    w: Vec<f64>,
    /// Bias.
    #[arg(short = 'b', long = "bias", allow_hyphen_values = true, default_value_t = 0.0)]
    b: f64,
    /// Activation tag, e.g. sigmoid, relu, elu.
    #[arg(long = "act")]
    act: String,
    /// Activation parameter as name=value (repeatable).
    #[arg(long = "param")]
    params: Vec<String>,
    /// Box as lo:hi per coordinate, comma separated, or one lo:hi for all.
    /// Defaults to the unit box.
    #[arg(long = "box", allow_hyphen_values = true)]
    bbox: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    /// Query point, comma separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    point: Vec<f64>,
}

#[derive(Args, Debug)]
struct SeparateArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    point: Vec<f64>,
    /// Candidate value of σ(wᵀx + b).
    #[arg(short = 'y', long, allow_hyphen_values = true)]
    y: f64,
    /// env or hest.
    #[arg(long, default_value = "env")]
    mode: String,
}

#[derive(Args, Debug)]
struct TightenArgs {
    /// Network file (.nn.json).
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value = "env")]
    mode: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 20)]
    max_rounds: usize,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// json or csv.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MakeNetArgs {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    #[arg(long)]
    act: String,
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    input_dim: usize,
    /// Width of an affine output layer; none when omitted.
    #[arg(long)]
    outputs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    /// Grid points per axis.
    #[arg(long, default_value_t = 51)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn params_map(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    raw.iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::MalformedInput(format!("parameter '{p}' is not name=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::MalformedInput(format!("parameter '{p}' has a non-numeric value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn parse_interval(s: &str) -> Result<Interval> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::MalformedInput(format!("box entry '{s}' is not lo:hi")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::MalformedInput(format!("box entry '{s}' is not numeric")))
    };
    Interval::new(num(lo)?, num(hi)?)
}

fn parse_box(spec: Option<&str>, n: usize) -> Result<Vec<Interval>> {
    let Some(spec) = spec else {
        return Ok(vec![Interval::unit(); n]);
    };
    let parts: Vec<Interval> = spec.split(',').map(parse_interval).collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; n]),
        k if k == n => Ok(parts),
        k => Err(Error::DimensionMismatch { expected: n, got: k }),
    }
}

impl InstanceArgs {
    fn activation(&self) -> Result<Activation> {
        Activation::from_tag(&self.act, &params_map(&self.params)?)
    }

    fn raw(&self) -> Result<RawInstance> {
        let bbox = parse_box(self.bbox.as_deref(), self.w.len())?;
        RawInstance::new(self.w.clone(), self.b, self.activation()?, bbox)
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    s.parse()
        .map_err(|_| Error::InvalidParameter(format!("unknown mode '{s}' (expected env or hest)")))
}

fn threads(flag: Option<usize>) -> Result<usize> {
    if let Some(t) = flag {
        return Ok(t.max(1));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|t| t.max(1))
            .map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        Err(_) => Ok(1),
    }
}

fn json_num(x: f64) -> String {
    if x.is_finite() {
        num17(x)
    } else {
        "null".into()
    }
}

fn json_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| json_num(*x)).collect();
    format!("[{}]", items.join(", "))
}

/// Region label with `Ri` indexed in the caller's coordinates.
fn region_name(hull: &Hull, r: RegionLabel) -> String {
    match r {
        RegionLabel::Rf => "f".into(),
        RegionLabel::Rl => "l".into(),
        RegionLabel::Ri(i) => format!("i{}", hull.map().kept()[i]),
    }
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let hull = Hull::new(args.inst.raw()?)?;
    let x = &args.point;
    hull.raw().check_point(x)?;
    let t = hull.map().to_unit(x);
    let region = hull.normalized().classify(&t)?;
    let text = format!(
        "{{\"value\": {}, \"supergradient\": {}, \"f\": {}, \"h\": {}, \"conv_value\": {}, \"subgradient\": {}, \"region\": \"{}\"}}\n",
        json_num(hull.conc_env(x)?),
        json_vec(&hull.conc_env_supergrad(x)?),
        json_num(hull.f(x)),
        json_num(hull.h(x)?),
        json_num(hull.conv_env(x)?),
        json_vec(&hull.conv_env_subgrad(x)?),
        region_name(&hull, region),
    );
    emit(&None, stdout, &text)
}

fn separate(args: &SeparateArgs, stdout: &mut dyn Write) -> Result<()> {
    let hull = Hull::new(args.inst.raw()?)?;
    let text = match hull.separate(&args.point, args.y, parse_mode(&args.mode)?)? {
        Separation::Inside => "{\"result\": \"inside\"}\n".to_string(),
        Separation::Unseparated { excess } => {
            format!("{{\"result\": \"unseparated\", \"excess\": {}}}\n", json_num(excess))
        }
        Separation::Cut(cut) => format!(
            "{{\"result\": \"cut\", \"sense\": \"{}\", \"coeffs\": {}, \"constant\": {}, \"violation\": {}}}\n",
            match cut.sense {
                CutSense::UpperBoundsY => "upper",
                CutSense::LowerBoundsY => "lower",
            },
            json_vec(&cut.coeffs),
            json_num(cut.constant),
            json_num(cut.violation)
        ),
    };
    emit(&None, stdout, &text)
}

fn tighten(args: &TightenArgs, stdout: &mut dyn Write) -> Result<()> {
    let net = NetworkModel::load_json(&args.net)?;
    let mut opts = TightenOptions::new(parse_mode(&args.mode)?);
    opts.threads = threads(args.threads)?;
    opts.max_rounds = args.max_rounds;
    let sweep = tighten_all(&net, &opts)?;
    emit(&args.out, stdout, &sweep.report.to_csv_string())
}

fn gaps(args: &GapArgs, stdout: &mut dyn Write) -> Result<()> {
    let r = gap_report(&args.inst.raw()?, args.samples, args.seed, threads(args.threads)?)?;
    let text = match args.format.as_str() {
        "json" => format!("{}\n", r.to_json()),
        "csv" => format!("{}\n{}\n", GapReport::csv_header(), r.csv_row()),
        f => return Err(Error::InvalidParameter(format!("unknown format '{f}' (expected json or csv)"))),
    };
    emit(&args.out, stdout, &text)
}

fn make_net(args: &MakeNetArgs, stdout: &mut dyn Write) -> Result<()> {
    let act = Activation::from_tag(&args.act, &params_map(&args.params)?)?;
    let net = make_random_net(args.input_dim, &args.layers, args.outputs, act, args.seed)?;
    emit(&args.out, stdout, &format!("{}\n", net.to_json_string()))
}

fn surface(args: &SurfaceArgs, stdout: &mut dyn Write) -> Result<()> {
    let raw = args.inst.raw()?;
    if raw.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: raw.dim(),
        });
    }
    if args.grid < 2 {
        return Err(Error::InvalidParameter("the grid needs at least 2 points per axis".into()));
    }
    let hull = Hull::new(raw)?;
    let bbox = hull.raw().bbox.clone();
    let mut text = String::from("x1,x2,f,h,conc,conv,region\n");
    let n = args.grid - 1;
    for i in 0..=n {
        for j in 0..=n {
            let at = |iv: &Interval, k: usize| iv.lo() + iv.width() * k as f64 / n as f64;
            let x = [at(&bbox[0], i), at(&bbox[1], j)];
            let t = hull.map().to_unit(&x);
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{}",
                num17(x[0]),
                num17(x[1]),
                num17(hull.f(&x)),
                num17(hull.h(&x)?),
                num17(hull.conc_env(&x)?),
                num17(hull.conv_env(&x)?),
                region_name(&hull, hull.normalized().classify(&t)?)
            );
        }
    }
    emit(&args.out, stdout, &text)
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) | Error::Unbounded(_) | Error::Numerical(_) => 3,
        _ => 2,
    }
}

/// Runs the CLI with explicit output streams; returns the exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stderr, "{e}");
                    1
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("usage error");
                    let _ = writeln!(stderr, "{first}");
                    1
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Envelope(EnvelopeCommand::Eval(a)) => eval(a, stdout),
        Command::Separate(a) => separate(a, stdout),
        Command::Tighten(a) => tighten(a, stdout),
        Command::GapReport(a) => gaps(a, stdout),
        Command::MakeNet(a) => make_net(a, stdout),
        Command::Surface(a) => surface(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI on the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
