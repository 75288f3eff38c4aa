//! `abscs`: train codebooks, run Monte-Carlo sweeps, demo a single encoding
//! and plot results.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use abs_cs::abs::{abs_quantize, evaluate_indexes};
use abs_cs::harness::{
    emit_plot, format_float, to_db, train_measurement_codebook, write_aggregate_csv, write_trial_csv,
    CodebookTraining, ExperimentConfig, Instance, PreparedExperiment, XAxis,
};
use abs_cs::quantization::{decode, encode_nearest};
use abs_cs::reconstruction::{omp_reconstruct, Omp};
use abs_cs::rng::{derive, Domain};
use abs_cs::signal::nmse;
use abs_cs::Error;

#[derive(Parser)]
#[command(name = "abscs", version, about = "Analysis-by-synthesis quantization of compressed-sensing measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a measurement codebook with the Lloyd algorithm and write it out.
    TrainCodebook {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        bits: u32,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte-Carlo sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Aggregate CSV; printed to stdout when omitted.
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Optional per-trial CSV.
        #[arg(long)]
        trials_csv: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Encode one instance with AbS and nearest-neighbor coding and report.
    Quantize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Plot an aggregate CSV as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Axis::Auto)]
        x: Axis,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Auto,
    Alpha,
    Rate,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 2,
        _ => 1,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

fn train_codebook(cmd: Command) -> Result<(), Error> {
    let Command::TrainCodebook { m, k, n, bits, samples, seed, tol, max_iter, out } = cmd else {
        unreachable!()
    };
    if k == 0 || k >= m {
        return Err(Error::InvalidConfig(format!("need 0 < k < m, got k = {k}, m = {m}")));
    }
    if n == 0 || n >= m {
        return Err(Error::InvalidConfig(format!("need 0 < n < m, got n = {n}, m = {m}")));
    }
    let training = CodebookTraining { samples, tol, max_iter };
    let outcome = train_measurement_codebook(seed, n, k, bits, training)?;
    outcome.codebook.save(&out)?;
    eprintln!(
        "trained {}-level codebook: distortion {} after {} iterations",
        outcome.codebook.len(),
        format_float(outcome.distortion),
        outcome.iterations
    );
    Ok(())
}

fn run(cmd: Command) -> Result<(), Error> {
    let Command::Run { config, out_csv, trials_csv, trials, master_seed, threads } = cmd else {
        unreachable!()
    };
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = master_seed {
        cfg.master_seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    let result = PreparedExperiment::prepare(&cfg)?.run()?;
    match &out_csv {
        Some(path) => write_aggregate_csv(create(path)?, &result.aggregates).map_err(|e| with_path(e, path))?,
        None => write_aggregate_csv(std::io::stdout().lock(), &result.aggregates)?,
    }
    if let Some(path) = &trials_csv {
        write_trial_csv(create(path)?, &result.trials).map_err(|e| with_path(e, path))?;
    }
    Ok(())
}

fn quantize(config: &Path, seed: u64) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.alphas.truncate(1);
    cfg.rates.clear();
    cfg.methods = vec![abs_cs::harness::Method::Abs, abs_cs::harness::Method::NearestNeighbor];
    let prepared = PreparedExperiment::prepare(&cfg)?;
    let point = &prepared.points[0];
    let p = point.point;
    println!(
        "m = {}, k = {}, alpha = {}, n = {}, r_x = {}, budget = {} bits",
        cfg.m, cfg.k, p.alpha, p.n, p.r_x, p.total_bits
    );
    if point.allocation.is_none() {
        println!("budget too small for {} measurements; nothing to encode", p.n);
        return Ok(());
    }
    let instance = Instance::draw(seed, cfg.m, cfg.k, p.n, 0)?;
    let k = cfg.k.min(p.n);
    let mut rng = derive(seed, Domain::Demo, &[]);
    let enc = abs_quantize(&instance.y, &instance.phi, k, &point.codebooks, &cfg.abs_config(), &Omp, &mut rng)?;
    let nn = encode_nearest(&instance.y, &point.codebooks)?;
    let nn_hat = omp_reconstruct(&instance.phi, &decode(&nn, &point.codebooks)?, k)?;
    let abs_hat = omp_reconstruct(&instance.phi, &enc.decoded, k)?;
    let nn_objective = evaluate_indexes(nn.indexes(), &enc.x_tilde, &instance.phi, k, &point.codebooks, &Omp)?;

    let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    println!("abs indexes: {}", join(enc.quantized.indexes()));
    println!("nn indexes:  {}", join(nn.indexes()));
    println!("objective trace:");
    for (l, v) in enc.diagnostics.objective_trace.iter().enumerate() {
        println!("  {l:>2}  {}", format_float(*v));
    }
    println!(
        "sweeps: {}, converged: {}, reconstructions: {}",
        enc.diagnostics.iterations, enc.diagnostics.converged, enc.diagnostics.recon_calls
    );
    println!("nn surrogate: {}", format_float(nn_objective));
    let originals = std::slice::from_ref(&instance.x);
    let abs_nmse = nmse(originals, &[abs_hat])?;
    let nn_nmse = nmse(originals, &[nn_hat])?;
    println!("abs nmse: {} ({:.3} dB)", format_float(abs_nmse), to_db(abs_nmse));
    println!("nn nmse:  {} ({:.3} dB)", format_float(nn_nmse), to_db(nn_nmse));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        cmd @ Command::TrainCodebook { .. } => train_codebook(cmd),
        cmd @ Command::Run { .. } => run(cmd),
        Command::Quantize { config, seed } => quantize(&config, seed),
        Command::Plot { input, out, x } => {
            let axis = match x {
                Axis::Auto => XAxis::Auto,
                Axis::Alpha => XAxis::Alpha,
                Axis::Rate => XAxis::Rate,
            };
            emit_plot(&input, &out, axis)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
