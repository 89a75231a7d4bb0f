//! ckqr: convolution-smoothed quantile regression from the command line.
//!
//! Subcommands: fit | process | density | efficient | mc. Outputs are
//! machine-readable (JSON for single fits, CSV for grids and reports) and
//! deterministic given the input bytes, flags and seed. Exit codes: 0 on
//! success, 1 on computation errors, 2 on usage errors.

use ckqr::bandwidth::{bias_constant_oracle, optimal_bandwidth, BandwidthRule};
use ckqr::density::{efficient_fit, pdf_curve};
use ckqr::fmt::fmt_sig;
use ckqr::horowitz::{covariance_smr, fit_horowitz};
use ckqr::inference::{confidence_interval, covariance, normal_z, CovarianceEstimate};
use ckqr::qr_exact::{fit_exact, pairs_bootstrap_se};
use ckqr::qr_smooth::{fit_process, fit_smoothed, resolve_bandwidth, SmoothSpec};
use ckqr::simlab::{h_grid_default, run_mc, DgpSpec, EstimatorKind, McConfig};
use ckqr::{Dataset, FitResult, Kernel};
use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ckqr",
    version,
    about = "Convolution-smoothed quantile regression toolkit"
)]
struct Cli {
    /// Worker threads (default: machine parallelism); affects speed only,
    /// never results
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one quantile regression; JSON with coefficients, standard errors
    /// and confidence intervals
    Fit(FitArgs),
    /// Fit the smoothed estimator over a τ grid; CSV with coefficients and
    /// quantile-path derivatives
    Process(ProcessArgs),
    /// Conditional pdf-curve estimate at a covariate value; CSV over the grid
    Density(DensityArgs),
    /// Two-stage sample-splitting efficient fit; JSON
    Efficient(EfficientArgs),
    /// Monte Carlo comparison of estimators on a named design; CSV report
    Mc(McArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV: header with a `y` column; an intercept column of ones is
    /// prepended unless a column named `intercept` exists
    #[arg(long)]
    data: PathBuf,
    /// ckqr | mr | smr
    #[arg(long, default_value = "ckqr")]
    estimator: String,
    #[arg(long, default_value_t = 0.5, value_parser = parse_tau)]
    tau: f64,
    #[arg(long, default_value = "gaussian2")]
    kernel: String,
    /// rot | fixed:v  (oracle is valid only under mc)
    #[arg(long, default_value = "rot")]
    bandwidth: String,
    /// Bootstrap replicates behind mr standard errors
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    data: PathBuf,
    /// Grid as a:b:step or a single value
    #[arg(long, default_value = "0.01:0.99:0.01")]
    taus: String,
    #[arg(long, default_value = "gaussian2")]
    kernel: String,
    #[arg(long, default_value = "rot")]
    bandwidth: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    /// Input CSV; mutually exclusive with --design
    #[arg(long, conflicts_with = "design")]
    data: Option<PathBuf>,
    /// Named simulation design to sample instead of reading data
    #[arg(long)]
    design: Option<String>,
    /// Sample size when --design is given
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluation covariate, comma-separated, including the leading 1
    #[arg(long, required = true)]
    x: String,
    #[arg(long, default_value = "0.01:0.99:0.01")]
    taus: String,
    #[arg(long, default_value = "gaussian2")]
    kernel: String,
    #[arg(long, default_value = "rot")]
    bandwidth: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EfficientArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5, value_parser = parse_tau)]
    tau: f64,
    #[arg(long, default_value = "gaussian2")]
    kernel: String,
    #[arg(long, default_value = "rot")]
    bandwidth: String,
    /// Stage-one split size; default ⌊n^0.4⌋
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// exponential | gumbel | chi2_3 | t3 | heteroskedastic | qr41
    #[arg(long)]
    design: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    reps: usize,
    /// Quantile levels: a single value or a grid a:b:step
    #[arg(long, default_value = "0.5")]
    taus: String,
    /// Comma-separated subset of mr,smr,ckmr,ckmr-naive-se,efficient
    #[arg(long, default_value = "mr,ckmr")]
    estimators: String,
    /// Omitted: the 0.08..0.80 grid plus rot. rot: rot only.
    /// fixed:v: that value only. oracle: the AMSE-optimal bandwidth.
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap replicates behind mr standard errors (0 disables)
    #[arg(long, default_value_t = 200)]
    boot_reps: usize,
    #[arg(long, default_value = "gaussian2")]
    kernel: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad tau '{s}'"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("tau must lie in (0,1), got {s}"))
    }
}

fn parse_taus(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.len() {
        1 => vec![parts[0]
            .parse::<f64>()
            .map_err(|_| format!("bad tau '{s}'"))?],
        3 => {
            let a: f64 = parts[0]
                .parse()
                .map_err(|_| format!("bad tau grid '{s}'"))?;
            let b: f64 = parts[1]
                .parse()
                .map_err(|_| format!("bad tau grid '{s}'"))?;
            let step: f64 = parts[2]
                .parse()
                .map_err(|_| format!("bad tau grid '{s}'"))?;
            if !(step > 0.0 && b >= a) {
                return Err(format!("bad tau grid '{s}': need a <= b and step > 0"));
            }
            let count = ((b - a) / step + 0.5).floor() as usize;
            (0..=count).map(|j| a + j as f64 * step).collect()
        }
        _ => return Err(format!("bad tau grid '{s}': expected v or a:b:step")),
    };
    if grid.iter().any(|&t: &f64| !(0.01..=0.99).contains(&t)) {
        return Err(format!(
            "tau grid '{s}' leaves the working range [0.01, 0.99]"
        ));
    }
    Ok(grid)
}

fn parse_x(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad covariate value '{p}'"))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("ckqr: --threads must be at least 1");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("ckqr: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Run(e)) => {
            eprintln!("ckqr: {e}");
            ExitCode::from(1)
        }
    }
}

enum AppError {
    Usage(String),
    Run(ckqr::Error),
}

impl From<ckqr::Error> for AppError {
    fn from(e: ckqr::Error) -> Self {
        AppError::Run(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, AppError> {
    Err(AppError::Usage(msg.into()))
}

fn dispatch(cmd: Command) -> Result<(), AppError> {
    match cmd {
        Command::Fit(args) => cmd_fit(args),
        Command::Process(args) => cmd_process(args),
        Command::Density(args) => cmd_density(args),
        Command::Efficient(args) => cmd_efficient(args),
        Command::Mc(args) => cmd_mc(args),
    }
}

fn load_dataset(path: &PathBuf) -> Result<Dataset, AppError> {
    let file = File::open(path).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?;
    Ok(Dataset::from_csv(BufReader::new(file))?)
}

fn parse_kernel(name: &str) -> Result<Kernel, AppError> {
    Kernel::from_name(name).map_err(|e| AppError::Usage(e.to_string()))
}

fn parse_rule(s: &str) -> Result<BandwidthRule, AppError> {
    s.parse::<BandwidthRule>()
        .map_err(|e| AppError::Usage(e.to_string()))
}

/// Write the payload to --out (with a one-line stdout summary) or to stdout.
fn emit(out: Option<&PathBuf>, payload: &[u8], summary: String) -> Result<(), AppError> {
    match out {
        Some(path) => {
            let mut f = File::create(path).map_err(ckqr::Error::Io)?;
            f.write_all(payload).map_err(ckqr::Error::Io)?;
            println!("{summary} -> {}", path.display());
        }
        None => {
            std::io::stdout()
                .write_all(payload)
                .map_err(ckqr::Error::Io)?;
        }
    }
    Ok(())
}

fn ci_json(fit: &FitResult, cov: &CovarianceEstimate, level: f64) -> Result<String, AppError> {
    let mut parts = Vec::new();
    for k in 0..fit.beta.len() {
        let ci = confidence_interval(fit, cov, k, level)?;
        parts.push(format!("[{},{}]", fmt_sig(ci.lo, 17), fmt_sig(ci.hi, 17)));
    }
    Ok(format!("[{}]", parts.join(",")))
}

fn vec_json(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_sig(*x, 17)).collect();
    format!("[{}]", parts.join(","))
}

fn fit_report_json(
    estimator: &str,
    se_method: &str,
    fit: &FitResult,
    cov: &CovarianceEstimate,
) -> Result<String, AppError> {
    Ok(format!(
        "{{\"estimator\":\"{estimator}\",\"beta\":{},\"se\":{},\"ci95\":{},\"ci99\":{},\"h\":{},\"tau\":{},\"objective\":{},\"converged\":{},\"iterations\":{},\"se_method\":\"{se_method}\"}}\n",
        vec_json(&fit.beta),
        vec_json(&cov.se),
        ci_json(fit, cov, 0.95)?,
        ci_json(fit, cov, 0.99)?,
        fmt_sig(fit.h, 17),
        fmt_sig(fit.tau, 17),
        fmt_sig(fit.objective, 17),
        fit.converged,
        fit.iterations
    ))
}

fn cmd_fit(args: FitArgs) -> Result<(), AppError> {
    let data = load_dataset(&args.data)?;
    let rule = parse_rule(&args.bandwidth)?;
    let json = match args.estimator.as_str() {
        "ckqr" => {
            if !(0.01..=0.99).contains(&args.tau) {
                return usage("smoothed fits use the working range tau in [0.01, 0.99]");
            }
            let kernel = parse_kernel(&args.kernel)?;
            let h = resolve_bandwidth(&data, &rule)?;
            let spec = SmoothSpec::new(kernel, h, args.tau)?;
            let fit = fit_smoothed(&data, &spec, None)?;
            let cov = covariance(&data, &spec, &fit)?;
            fit_report_json("ckqr", "sandwich", &fit, &cov)?
        }
        "smr" => {
            if !(0.01..=0.99).contains(&args.tau) {
                return usage("smoothed fits use the working range tau in [0.01, 0.99]");
            }
            let kernel = parse_kernel(&args.kernel)?;
            let h = resolve_bandwidth(&data, &rule)?;
            let spec = SmoothSpec::new(kernel, h, args.tau)?;
            let fit = fit_horowitz(&data, &spec, None)?;
            let cov = covariance_smr(&data, &spec, &fit)?;
            fit_report_json("smr", "kappa-sandwich-approximation", &fit, &cov)?
        }
        "mr" => {
            if args.reps < 100 {
                return usage("mr standard errors need --reps >= 100");
            }
            let fit = fit_exact(&data, args.tau)?;
            let se = pairs_bootstrap_se(&data, args.tau, args.reps, args.seed)?;
            let ci = |z: f64| {
                let parts: Vec<String> = fit
                    .beta
                    .iter()
                    .zip(&se)
                    .map(|(b, s)| {
                        format!("[{},{}]", fmt_sig(b - z * s, 17), fmt_sig(b + z * s, 17))
                    })
                    .collect();
                format!("[{}]", parts.join(","))
            };
            format!(
                "{{\"estimator\":\"mr\",\"beta\":{},\"se\":{},\"ci95\":{},\"ci99\":{},\"h\":0,\"tau\":{},\"objective\":{},\"converged\":{},\"iterations\":{},\"se_method\":\"pairs-bootstrap\",\"boot_reps\":{}}}\n",
                vec_json(&fit.beta),
                vec_json(&se),
                ci(normal_z(0.95)),
                ci(normal_z(0.99)),
                fmt_sig(fit.tau, 17),
                fmt_sig(fit.objective, 17),
                fit.converged,
                fit.iterations,
                args.reps
            )
        }
        other => return usage(format!("unknown estimator '{other}'; expected ckqr|mr|smr")),
    };
    emit(
        args.out.as_ref(),
        json.as_bytes(),
        format!("fit {} at tau={}", args.estimator, args.tau),
    )
}

fn cmd_process(args: ProcessArgs) -> Result<(), AppError> {
    let data = load_dataset(&args.data)?;
    let kernel = parse_kernel(&args.kernel)?;
    let rule = parse_rule(&args.bandwidth)?;
    let taus = parse_taus(&args.taus).map_err(AppError::Usage)?;
    let proc = fit_process(&data, &taus, &kernel, &rule)?;
    let mut payload = Vec::new();
    proc.to_csv(&mut payload)?;
    emit(
        args.out.as_ref(),
        &payload,
        format!("process over {} quantile levels", taus.len()),
    )
}

fn cmd_density(args: DensityArgs) -> Result<(), AppError> {
    let data = match (&args.data, &args.design) {
        (Some(path), None) => load_dataset(path)?,
        (None, Some(design)) => {
            let dgp =
                DgpSpec::from_name(design, args.n).map_err(|e| AppError::Usage(e.to_string()))?;
            let mut rng = ckqr::rng::stream(args.seed, ckqr::rng::TAG_SAMPLE, 0);
            dgp.sample(&mut rng)?
        }
        _ => return usage("density needs exactly one of --data or --design"),
    };
    let kernel = parse_kernel(&args.kernel)?;
    let rule = parse_rule(&args.bandwidth)?;
    let taus = parse_taus(&args.taus).map_err(AppError::Usage)?;
    let x = parse_x(&args.x).map_err(AppError::Usage)?;
    if x.len() != data.d() {
        return usage(format!(
            "--x has {} entries but the design matrix has {} columns",
            x.len(),
            data.d()
        ));
    }
    let curve = pdf_curve(&data, &kernel, &rule, &taus, &x)?;
    let mut payload = Vec::new();
    curve.to_csv(&mut payload)?;
    emit(
        args.out.as_ref(),
        &payload,
        format!("density curve over {} quantile levels", taus.len()),
    )
}

fn cmd_efficient(args: EfficientArgs) -> Result<(), AppError> {
    let data = load_dataset(&args.data)?;
    let kernel = parse_kernel(&args.kernel)?;
    let rule = parse_rule(&args.bandwidth)?;
    let fit = efficient_fit(&data, args.tau, &kernel, &rule, args.m, args.seed)?;
    let json = format!("{}\n", fit.to_json());
    emit(
        args.out.as_ref(),
        json.as_bytes(),
        format!("efficient fit at tau={} (m={})", args.tau, fit.m),
    )
}

fn cmd_mc(args: McArgs) -> Result<(), AppError> {
    let dgp =
        DgpSpec::from_name(&args.design, args.n).map_err(|e| AppError::Usage(e.to_string()))?;
    let kernel = parse_kernel(&args.kernel)?;
    let taus = parse_taus(&args.taus).map_err(AppError::Usage)?;
    let estimators: Vec<EstimatorKind> = args
        .estimators
        .split(',')
        .map(|s| EstimatorKind::from_name(s.trim()).map_err(|e| AppError::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;

    let (h_grid, include_rot) = match args.bandwidth.as_deref() {
        None => (h_grid_default(), true),
        Some("rot") => (Vec::new(), true),
        Some("oracle") => {
            if taus.len() != 1 {
                return usage("--bandwidth oracle needs a single tau");
            }
            let bias = bias_constant_oracle(&dgp.design, taus[0], &kernel)?;
            let d_inv = dgp
                .design
                .d_matrix(taus[0])?
                .inverse_spd()
                .ok_or(ckqr::Error::SingularHessian)?;
            let mut lambda = vec![0.0; dgp.design.d()];
            lambda[0] = 1.0; // location models put the leading bias on the intercept
            let opt = optimal_bandwidth(
                &lambda,
                &d_inv,
                &bias.b,
                kernel.smoothing_constant(),
                kernel.s(),
                args.n,
            )?;
            (vec![opt.h], false)
        }
        Some(other) => match parse_rule(other)? {
            BandwidthRule::Fixed(h) => (vec![h], false),
            BandwidthRule::RuleOfThumb => (Vec::new(), true),
            BandwidthRule::OptimalOracle => unreachable!("handled above"),
        },
    };

    let cfg = McConfig {
        dgp,
        kernel,
        estimators,
        h_grid,
        include_rot,
        taus,
        reps: args.reps,
        seed: args.seed,
        mr_boot_reps: args.boot_reps,
    };
    let report = run_mc(&cfg)?;
    let mut payload = Vec::new();
    report.to_csv(&mut payload)?;
    emit(
        args.out.as_ref(),
        &payload,
        format!(
            "mc {} n={} reps={} ({} cells, {} failed replications)",
            args.design,
            args.n,
            args.reps,
            report.cells.len(),
            report.failed_reps
        ),
    )
}
