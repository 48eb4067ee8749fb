//! Command-line front end for block-wise sketch recovery.
//!
//! Exit codes: 0 success, 1 usage or domain error, 2 solver
//! non-convergence, 3 I/O or file-format error. Diagnostics go to
//! standard error; data goes to files or standard output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spansketch::baselines::{gd_refine, spectral_column_space, spectral_init, GdConfig, GdError};
use spansketch::estimator::{estimate, EstimateError, EstimatorConfig};
use spansketch::experiments::{
    emit_phase_diagram, read_results_csv, run_manifest_json, run_sweep, write_results_csv,
    SnrSpec, SweepConfig,
};
use spansketch::io as sio;
use spansketch::linalg::{thin_svd, BlockMatrix};
use spansketch::norms::{dollar_norm, DollarNormSolverConfig};
use spansketch::rng::derive_seed;
use spansketch::sensing::{backproject, gen_ensemble, ProblemDims};
use spansketch::theory::{
    gen_packing_matrix, minimax_lower_bound, sample_rate_threshold, verify_packing, BoundInputs,
};
use spansketch::Error;

#[derive(Parser)]
#[command(
    name = "spansketch",
    version,
    about = "Joint recovery of low-rank matrices sharing a column space from block-wise sketches",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the $-norm of a block matrix file via ADMM
    DollarNorm(DollarNormArgs),
    /// Solve the doubly norm-constrained least-squares estimator
    Estimate(EstimateArgs),
    /// Run the spectral or gradient-descent baseline
    Baseline(BaselineArgs),
    /// Run a Monte Carlo (K, L) grid sweep from a JSON config
    Sweep(SweepArgs),
    /// Turn a results CSV into a log10-median grid and a success mask
    PhaseDiagram(PhaseDiagramArgs),
    /// Evaluate the sample-rate threshold and the minimax lower bound
    Bounds(BoundsArgs),
    /// Generate a packing set and verify its norm and distance properties
    Packing(PackingArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// Initial ADMM penalty parameter
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// ADMM iteration cap
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Absolute stopping tolerance
    #[arg(long, default_value_t = 1e-6)]
    eps_abs: f64,
    /// Relative stopping tolerance
    #[arg(long, default_value_t = 1e-4)]
    eps_rel: f64,
}

#[derive(Args)]
struct DollarNormArgs {
    /// Block matrix file (`M N K` header)
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct EstimateArgs {
    /// Measurement file (`L K sigma` header)
    #[arg(long)]
    meas: PathBuf,
    /// Seed the sensing ensemble is regenerated from
    #[arg(long)]
    ensemble_seed: u64,
    /// Rows of each block
    #[arg(long)]
    m: usize,
    /// Columns of each block
    #[arg(long)]
    n: usize,
    /// Maximum-block-Frobenius norm bound
    #[arg(long)]
    alpha: f64,
    /// $-norm bound
    #[arg(long)]
    beta: f64,
    /// Warm-start truncation rank
    #[arg(long)]
    init_rank: Option<usize>,
    /// Output path for the estimated block matrix
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct BaselineArgs {
    /// Baseline to run: spectral | gd
    #[arg(long)]
    method: String,
    /// Measurement file (`L K sigma` header)
    #[arg(long)]
    meas: PathBuf,
    /// Seed the sensing ensemble is regenerated from
    #[arg(long)]
    ensemble_seed: u64,
    /// Rows of each block
    #[arg(long)]
    m: usize,
    /// Columns of each block
    #[arg(long)]
    n: usize,
    /// Target rank
    #[arg(long)]
    r: usize,
    /// Output path (column-space matrix for spectral, block matrix for gd)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep configuration (SweepConfig schema)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv and manifest.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for trials
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the config's master_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's method: convex | spectral | gd
    #[arg(long)]
    method: Option<String>,
    /// Override the config's metric: subspace_angle | normalized_error
    #[arg(long)]
    metric: Option<String>,
    /// Override the config's SNR in dB ("noiseless" for exact data)
    #[arg(long)]
    snr_db: Option<String>,
}

#[derive(Args)]
struct PhaseDiagramArgs {
    /// Results CSV produced by `sweep`
    #[arg(long)]
    input: PathBuf,
    /// Success threshold on log10(median)
    #[arg(long, default_value_t = -1.5)]
    threshold_log10: f64,
    /// Output prefix; writes <prefix>.grid.csv and <prefix>.mask.pgm
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: usize,
    /// The undetermined constant in the sample-rate condition
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Args)]
struct PackingArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: f64,
    /// Number of independently drawn rows; the rest replicate them
    #[arg(long)]
    b_rows: usize,
    /// Set size
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Master seed for the set
    #[arg(long)]
    seed: u64,
    /// Optional directory to write the matrices into
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Parse { .. } => 3,
        Error::NonConvergence { .. } => 2,
        _ => 1,
    }
}

fn run_dollar_norm(args: &DollarNormArgs) -> Result<(), Error> {
    eprintln!(
        "config: dollar-norm input={} rho={} max-iter={} eps-abs={} eps-rel={}",
        args.input.display(),
        args.solver.rho,
        args.solver.max_iter,
        args.solver.eps_abs,
        args.solver.eps_rel
    );
    let x = sio::read_block_matrix_file::<f64>(&args.input)?;
    let cfg = DollarNormSolverConfig {
        rho0: args.solver.rho,
        eps_abs: args.solver.eps_abs,
        eps_rel: args.solver.eps_rel,
        max_iter: args.solver.max_iter,
        ..DollarNormSolverConfig::default()
    };
    let res = dollar_norm(&x, &cfg)?;
    eprintln!(
        "converged in {} iterations (primal {:.3e}, dual {:.3e})",
        res.iters, res.primal_residual, res.dual_residual
    );
    println!("{}", res.value);
    Ok(())
}

fn run_estimate(args: &EstimateArgs) -> Result<(), Error> {
    eprintln!(
        "config: estimate meas={} ensemble-seed={} m={} n={} alpha={} beta={} init-rank={:?} \
         out={} rho={} max-iter={} eps-abs={} eps-rel={}",
        args.meas.display(),
        args.ensemble_seed,
        args.m,
        args.n,
        args.alpha,
        args.beta,
        args.init_rank,
        args.out.display(),
        args.solver.rho,
        args.solver.max_iter,
        args.solver.eps_abs,
        args.solver.eps_rel
    );
    let ms = sio::read_measurements_file::<f64>(&args.meas)?;
    let dims = ProblemDims {
        m: args.m,
        n: args.n,
        k: ms.y.ncols(),
        l: ms.y.nrows(),
        r: 1,
    };
    let ens = gen_ensemble::<f64>(dims, args.ensemble_seed)?;
    let mut cfg = EstimatorConfig::new(args.alpha, args.beta);
    cfg.rho0 = args.solver.rho;
    cfg.max_iter = args.solver.max_iter;
    cfg.eps_abs = args.solver.eps_abs;
    cfg.eps_rel = args.solver.eps_rel;
    cfg.init_rank = args.init_rank;
    let res = match estimate(&ens, &ms, &cfg) {
        Ok(res) => res,
        Err(EstimateError::Core(e)) => return Err(e),
        Err(EstimateError::NonConvergence {
            max_iter,
            primal,
            dual,
            ..
        }) => {
            return Err(Error::NonConvergence {
                max_iter,
                primal,
                dual,
            })
        }
    };
    eprintln!(
        "converged in {} iterations (primal {:.3e}, dual {:.3e}); objective {}; \
         inf-frob {}; certificate min eigenvalue {}",
        res.iters,
        res.primal_residual,
        res.dual_residual,
        res.objective,
        res.feasibility.inf_frob_norm,
        res.feasibility.certificate_min_eigenvalue
    );
    sio::write_block_matrix_file(&args.out, &res.x_hat)?;
    Ok(())
}

fn run_baseline(args: &BaselineArgs) -> Result<(), Error> {
    eprintln!(
        "config: baseline method={} meas={} ensemble-seed={} m={} n={} r={} out={}",
        args.method,
        args.meas.display(),
        args.ensemble_seed,
        args.m,
        args.n,
        args.r,
        args.out.display()
    );
    let ms = sio::read_measurements_file::<f64>(&args.meas)?;
    let dims = ProblemDims {
        m: args.m,
        n: args.n,
        k: ms.y.ncols(),
        l: ms.y.nrows(),
        r: args.r,
    };
    let ens = gen_ensemble::<f64>(dims, args.ensemble_seed)?;
    let x0 = backproject(&ens, &ms)?;
    match args.method.as_str() {
        "spectral" => {
            let u = spectral_column_space(&x0, args.r)?;
            let out = BlockMatrix::new(args.m, args.r, 1, u)?;
            sio::write_block_matrix_file(&args.out, &out)?;
        }
        "gd" => {
            let init = spectral_init(&x0, args.r)?;
            let sigma1 = thin_svd(x0.as_matrix())?.sigma[0];
            let cfg = GdConfig::scaled(dims.l, sigma1);
            let refined = match gd_refine(&ens, &ms, init, &cfg) {
                Ok(it) => it,
                Err(GdError::Core(e)) => return Err(e),
                Err(GdError::Stalled { .. }) => {
                    return Err(Error::NonConvergence {
                        max_iter: cfg.max_iter,
                        primal: f64::NAN,
                        dual: f64::NAN,
                    })
                }
            };
            sio::write_block_matrix_file(&args.out, &refined.assemble()?)?;
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown baseline method {other:?} (expected spectral or gd)"
            )))
        }
    }
    Ok(())
}

fn run_sweep_cmd(args: &SweepArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg: SweepConfig<f64> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("bad sweep config: {e}")))?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(method) = &args.method {
        cfg.method = method.parse()?;
    }
    if let Some(metric) = &args.metric {
        cfg.metric = metric.parse()?;
    }
    if let Some(snr) = &args.snr_db {
        cfg.snr_db = if snr == "noiseless" {
            SnrSpec::Noiseless
        } else {
            SnrSpec::Db(snr.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad --snr-db value {snr:?}"))
            })?)
        };
    }
    eprintln!(
        "config: sweep threads={} out={} {}",
        args.threads,
        args.out.display(),
        serde_json::to_string(&cfg).expect("config serializes")
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let records = pool.install(|| run_sweep(&cfg))?;

    std::fs::create_dir_all(&args.out)?;
    let mut csv = Vec::new();
    write_results_csv(&mut csv, &records, cfg.metric)?;
    let csv_path = args.out.join("results.csv");
    std::fs::write(&csv_path, &csv)?;
    let manifest = run_manifest_json(&cfg, &[("results.csv", &csv)])?;
    std::fs::write(args.out.join("manifest.json"), manifest.as_bytes())?;
    eprintln!("wrote {} and manifest.json", csv_path.display());
    Ok(())
}

fn run_phase_diagram(args: &PhaseDiagramArgs) -> Result<(), Error> {
    eprintln!(
        "config: phase-diagram input={} threshold-log10={} out={}",
        args.input.display(),
        args.threshold_log10,
        args.out.display()
    );
    let text = std::fs::read(&args.input)?;
    let (records, _metric) = read_results_csv::<f64, _>(&mut text.as_slice())?;
    let diagram = emit_phase_diagram(&records, args.threshold_log10)?;

    let grid_path = args.out.with_extension("grid.csv");
    let mut grid = Vec::new();
    diagram.write_grid_csv(&mut grid)?;
    std::fs::write(&grid_path, grid)?;

    let mask_path = args.out.with_extension("mask.pgm");
    let mut mask = Vec::new();
    diagram.write_mask_pgm(&mut mask)?;
    std::fs::write(&mask_path, mask)?;
    eprintln!("wrote {} and {}", grid_path.display(), mask_path.display());
    Ok(())
}

fn run_bounds(args: &BoundsArgs) -> Result<(), Error> {
    eprintln!(
        "config: bounds alpha={} beta={} sigma={} m={} n={} k={} l={} c={}",
        args.alpha, args.beta, args.sigma, args.m, args.n, args.k, args.l, args.c
    );
    let inputs = BoundInputs {
        alpha: args.alpha,
        beta: args.beta,
        sigma: args.sigma,
        m: args.m,
        n: args.n,
        k: args.k,
        l: args.l,
        c: args.c,
    };
    println!("sample_rate_threshold {}", sample_rate_threshold(&inputs));
    println!("minimax_lower_bound {}", minimax_lower_bound(&inputs)?);
    Ok(())
}

fn run_packing(args: &PackingArgs) -> Result<(), Error> {
    eprintln!(
        "config: packing m={} n={} k={} alpha={} gamma={} b-rows={} count={} seed={} out={:?}",
        args.m, args.n, args.k, args.alpha, args.gamma, args.b_rows, args.count, args.seed,
        args.out.as_ref().map(|p| p.display().to_string())
    );
    let set: Result<Vec<_>, Error> = (0..args.count)
        .map(|i| {
            gen_packing_matrix::<f64>(
                args.m,
                args.n,
                args.k,
                args.alpha,
                args.gamma,
                args.b_rows,
                derive_seed(args.seed, &[i as u64]),
            )
        })
        .collect();
    let set = set?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        for (i, h) in set.iter().enumerate() {
            sio::write_block_matrix_file(&dir.join(format!("H_{i:03}.csv")), h)?;
        }
    }
    let report = verify_packing(&set, args.alpha, args.gamma, args.k)?;
    for (i, norms) in report.matrices.iter().enumerate() {
        println!(
            "matrix {i}: inf_frob {} frob_sq {}",
            norms.inf_frob, norms.frob_sq
        );
    }
    match report.min_pair_dist_sq {
        Some(d) => println!("min_pair_dist_sq {d}"),
        None => println!("min_pair_dist_sq n/a (singleton)"),
    }
    println!("pair_threshold {}", report.pair_threshold);
    println!("pair_check {}", if report.pair_check { "pass" } else { "fail" });
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are successes, anything else is a
            // usage error
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::DollarNorm(args) => run_dollar_norm(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Baseline(args) => run_baseline(args),
        Command::Sweep(args) => run_sweep_cmd(args),
        Command::PhaseDiagram(args) => run_phase_diagram(args),
        Command::Bounds(args) => run_bounds(args),
        Command::Packing(args) => run_packing(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
