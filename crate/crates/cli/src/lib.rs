//! Command-line front end: field inspection, single-channel rates, ergodic
//! sweeps, codec simulations and standalone SVP instances.

pub mod config;
pub mod csv;

use std::io::Write;
use std::path::{Path, PathBuf};

use algcf::cfchan::{self, BlockFadingChannel};
use algcf::codec::{ConstructionALattice, EffectiveNoiseSpec, NestedCodePair, SimConfig};
use algcf::numfield::{CoefficientRing, NumberField};
use algcf::simkit::{self, Scheme};
use algcf::svp::{self, SearchBasis};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use thiserror::Error;

use crate::config::RawConfig;
use crate::csv::CodecCsvRow;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            _ => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "algcf", version, about = "Compute-and-forward over block fading channels with algebraic lattices")]
pub struct Cli {
    /// Worker threads for Monte Carlo work (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect a real quadratic field.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
    /// Best equation and computation rate for one channel.
    Rate(RateArgs),
    /// Ergodic rate sweep over SNR, written as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo error rate of a Construction A codec, with its union bound.
    Codec(CodecArgs),
    /// Shortest vector of a lattice given by a basis file.
    Svp(SvpArgs),
}

#[derive(Debug, Subcommand)]
pub enum FieldAction {
    /// Integral basis, discriminant and embedding of Q(√d).
    Info {
        #[arg(long, allow_hyphen_values = true)]
        d: i64,
    },
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Gains as rows per block: `h11,h12;h21,h22`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "h_file")]
    pub h: Option<String>,
    /// File with one block per line (comma or whitespace separated).
    #[arg(long)]
    pub h_file: Option<PathBuf>,
    /// Seed for a sampled channel when no gains are given.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Trial index of the sampled channel.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Number of users of a sampled channel.
    #[arg(long = "L", default_value_t = 2)]
    pub users: usize,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pub snr_db: f64,
    /// `Z` or the squarefree d of Q(√d).
    #[arg(long, default_value = "5")]
    pub ring: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `key = value` config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<String>,
    #[arg(long = "L", allow_hyphen_values = true)]
    pub users: Option<String>,
    /// Comma list or `lo:step:hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub trials: Option<String>,
    #[arg(long)]
    pub schemes: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub d_list: Option<String>,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 5, allow_hyphen_values = true)]
    pub d: i64,
    #[arg(long, default_value_t = 11)]
    pub p: u64,
    /// Code length T.
    #[arg(long = "T", default_value_t = 2)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub lf: usize,
    #[arg(long, default_value_t = 0)]
    pub lc: usize,
    #[arg(long, default_value = "0:2:16", allow_hyphen_values = true)]
    pub snr_db: String,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Minimum number of union-bound terms.
    #[arg(long, default_value_t = 1000)]
    pub min_terms: usize,
    #[arg(long)]
    pub no_dither: bool,
}

#[derive(Debug, Args)]
pub struct SvpArgs {
    /// One basis vector per line (comma or whitespace separated).
    #[arg(long)]
    pub basis: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = if cli.threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(runtime(e)),
        }
    } else {
        execute(&cli)
    };
    let written = result.and_then(|o| {
        for note in &o.notes {
            let _ = writeln!(err, "{note}");
        }
        emit(&o.text, o.path.as_deref(), out)
    });
    match written {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Result of a command: the text to emit, where to put it, and notes for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub path: Option<PathBuf>,
    pub notes: Vec<String>,
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let text = match &cli.command {
        Command::Field {
            action: FieldAction::Info { d },
        } => field_info(*d)?,
        Command::Rate(a) => rate(a)?,
        Command::Svp(a) => svp_command(a)?,
        Command::Sweep(a) => {
            let (text, path, slopes) = sweep(a, cli.output.as_deref())?;
            let notes = slopes
                .into_iter()
                .map(|(scheme, slope)| format!("dof_slope[30,50] {scheme}: {slope:.4}"))
                .collect();
            return Ok(Outcome { text, path, notes });
        }
        Command::Codec(a) => codec(a)?,
    };
    Ok(Outcome {
        text,
        path: cli.output.clone(),
        notes: Vec::new(),
    })
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => csv::write_atomic(p, text),
        None => out.write_all(text.as_bytes()).map_err(runtime),
    }
}

pub fn field_info(d: i64) -> Result<String, CliError> {
    let k = NumberField::quadratic(d).map_err(validation)?;
    let (s, t) = k.mult_rule();
    let [t1, t2] = k.theta_conjugates();
    let phi = k.embedding_matrix();
    let rule = if s == 1 {
        format!("θ² = θ + {t}")
    } else {
        format!("θ² = {t}")
    };
    Ok(format!(
        "field: Q(√{d})\n\
         ring of integers: {}\n\
         integral basis: {}\n\
         discriminant: {}\n\
         multiplication: {rule}\n\
         conjugates of θ: {t1:.6}, {t2:.6}\n\
         embedding matrix: [[{:.6}, {:.6}], [{:.6}, {:.6}]]\n",
        k.ring_name(),
        k.basis_display(),
        k.discriminant(),
        phi[0][0],
        phi[0][1],
        phi[1][0],
        phi[1][1],
    ))
}

fn parse_rows(text: &str, row_sep: char) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(row_sep)
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| CliError::Validation(format!("`{x}` is not a number")))
                })
                .collect()
        })
        .collect()
}

/// Gain matrix from `--h`, `--h-file`, or a sampled draw.
pub fn channel_gains(args: &ChannelArgs, blocks: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let h = if let Some(s) = &args.h {
        parse_rows(s, ';')?
    } else if let Some(p) = &args.h_file {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
        parse_rows(&text, '\n')?
    } else {
        if args.users == 0 {
            return Err(validation("L must be at least 1"));
        }
        simkit::sample_channels(args.seed, args.trial, blocks, args.users)
    };
    if h.len() != blocks {
        return Err(validation(format!("expected {blocks} blocks of gains, got {}", h.len())));
    }
    Ok(h)
}

fn parse_ring(s: &str) -> Result<CoefficientRing, CliError> {
    if s == "Z" {
        return Ok(CoefficientRing::Integers);
    }
    let d: i64 = s
        .parse()
        .map_err(|_| validation(format!("ring must be Z or an integer d, got `{s}`")))?;
    CoefficientRing::quadratic(d).map_err(validation)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn rate(args: &RateArgs) -> Result<String, CliError> {
    let ring = parse_ring(&args.ring)?;
    let h = channel_gains(&args.channel, 2)?;
    let ch = BlockFadingChannel::from_snr_db(h, args.snr_db).map_err(validation)?;
    ring.check_blocks(ch.blocks()).map_err(validation)?;
    let cand = svp::best_equation(&ring, &ch).map_err(runtime)?;
    let coeffs: Vec<String> = cand.a.iter().map(ToString::to_string).collect();
    let mut s = format!(
        "ring: {}\nsnr_db: {:.6}\na: [{}]\n",
        ring.name(),
        args.snr_db,
        coeffs.join(", ")
    );
    for j in 0..cand.blocks() {
        s.push_str(&format!(
            "block {}: h = {}, sigma(a) = {}, b = {:.6}, nu_sq = {:.6}\n",
            j + 1,
            fmt_vec(ch.gains(j)),
            fmt_vec(&cand.sigma[j]),
            cand.b[j],
            cand.nu_sq[j]
        ));
    }
    s.push_str(&format!("quadratic_form: {:.6}\n", cand.quad_form));
    s.push_str(&format!("rate_bits: {:.6}\n", cand.rate_bits));
    s.push_str(&format!("mac_sum_capacity_bits: {:.6}\n", cfchan::mac_sum_capacity(&ch)));
    Ok(s)
}

fn sweep(
    args: &SweepArgs,
    output_flag: Option<&Path>,
) -> Result<(String, Option<PathBuf>, Vec<(Scheme, f64)>), CliError> {
    let flags = RawConfig {
        n: args.n.clone(),
        users: args.users.clone(),
        snr_db: args.snr_db.clone(),
        trials: args.trials.clone(),
        schemes: args.schemes.clone(),
        seed: args.seed.clone(),
        d_list: args.d_list.clone(),
        output: output_flag.map(|p| p.display().to_string()),
    };
    let cfg = config::parse_config(args.config.as_deref(), &flags)?;
    let result = simkit::run_sweep(&cfg.sweep_config(0)).map_err(runtime)?;
    let slopes = result
        .dof_slopes((30.0, 50.0))
        .into_iter()
        .filter_map(|(s, d)| d.map(|d| (s, d)))
        .collect();
    Ok((csv::sweep_csv(&result), cfg.output, slopes))
}

pub fn codec_rows(args: &CodecArgs) -> Result<Vec<CodecCsvRow>, CliError> {
    let field = NumberField::quadratic(args.d).map_err(validation)?;
    let prime = field.prime_above(args.p).map_err(validation)?;
    let codes = NestedCodePair::reed_solomon(prime.residue_field(), args.length, args.lf, args.lc)
        .map_err(validation)?;
    let snrs = config::parse_snr_list(&args.snr_db)?;
    if args.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    let h = channel_gains(&args.channel, 2)?;
    let ring = CoefficientRing::Quadratic(field);
    let mut rows = Vec::with_capacity(snrs.len());
    for db in snrs {
        let ch = BlockFadingChannel::from_snr_db(h.clone(), db).map_err(validation)?;
        let lattice =
            ConstructionALattice::build(&field, &prime, codes.clone(), ch.snr()).map_err(validation)?;
        let cand = svp::best_equation(&ring, &ch).map_err(runtime)?;
        let sim = SimConfig {
            dither: !args.no_dither,
            ..SimConfig::new(args.trials, args.channel.seed)
        };
        let outcome = lattice.simulate(&ch, &cand, &sim).map_err(runtime)?;
        let bound = lattice
            .union_bound_min_terms(&EffectiveNoiseSpec::from_candidate(&cand), args.min_terms)
            .map_err(runtime)?;
        rows.push(CodecCsvRow {
            snr_db: db,
            error_rate: outcome.error_rate,
            stderr: outcome.stderr,
            union_bound: bound.value,
            trials: outcome.trials,
        });
    }
    Ok(rows)
}

fn codec(args: &CodecArgs) -> Result<String, CliError> {
    Ok(csv::codec_csv(&codec_rows(args)?))
}

pub fn read_basis(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let rows = parse_rows(&text, '\n')?;
    let k = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if k == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(validation("basis file needs equally long, non-empty rows"));
    }
    if k > m {
        return Err(validation(format!("{k} vectors cannot be independent in dimension {m}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(validation("basis entries must be finite"));
    }
    Ok(DMatrix::from_fn(m, k, |i, j| rows[j][i]))
}

fn svp_command(args: &SvpArgs) -> Result<String, CliError> {
    let generator = read_basis(&args.basis)?;
    let basis = SearchBasis::from_generator(generator);
    let sv = svp::shortest_vector(&basis).map_err(|e| match e {
        svp::SvpError::RankDeficient => validation(e),
        other => runtime(other),
    })?;
    let x: Vec<f64> = sv.coords.iter().map(|&c| c as f64).collect();
    let v = basis.generator() * nalgebra::DVector::from_vec(x);
    let coords: Vec<String> = sv.coords.iter().map(ToString::to_string).collect();
    Ok(format!(
        "dimension: {}\ncoords: [{}]\nvector: {}\nnorm_sq: {:.6}\nnorm: {:.6}\nminkowski_bound: {:.6}\nnodes: {}\n",
        basis.dim(),
        coords.join(", "),
        fmt_vec(v.as_slice()),
        sv.norm_sq,
        sv.norm_sq.sqrt(),
        basis.minkowski_bound(),
        sv.node_count
    ))
}
