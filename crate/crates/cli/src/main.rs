//! Batch experiment runner for the fractional stochastic heat equation
//! laboratory.
//!
//! One subcommand per claim the library can check:
//!
//! ```text
//! eigens       closed-form eigenvalues lambda_{j,n} = 4 n^2 sin^2(j pi / 2n)
//! operator     A^{alpha/2} by the spectral and Balakrishnan routes, entrywise
//! green        Green kernel sum_j e^{-t lambda_j^{alpha/2}} e_j(x) e_j(y)
//! gap          weighted semigroup gap |A^{-delta}(S(t) - E_n e^{-t A^{alpha/2}} P_n)|
//! lemma-check  head/tail sums against their n- and t-power bounds
//! det-rate     noiseless (g = 0) convergence study, closed form
//! strong-rate  Monte-Carlo strong error of the full scheme
//! gruenwald    Gruenwald-Letnikov derivative against its closed-form limit
//! ```
//!
//! Settings come from flags, a `--config` JSON file, or built-in defaults,
//! in that order of precedence. Tabular artifacts are CSV, study reports
//! are JSON; both go to stdout unless `--output` is set. Usage problems
//! exit with status 2, runtime failures with 1; hypothesis violations in a
//! rate study are warnings on stderr, not errors. The master seed of a
//! stochastic run is always echoed to stderr.

mod config;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use fshe::balakrishnan::frac_matrix_balakrishnan;
use fshe::fractional::{frac_matrix_spectral, ContinuousFracOperator, DiscreteFracOperator};
use fshe::grid::EigenSystem;
use fshe::gruenwald::GruenwaldScheme;
use fshe::integrator::{make_initial, solve_discrete, solve_reference};
use fshe::lab::{
    det_rate_study, fit_rate, lemma_sum_check, mc_strong_error, semigroup_gap, ConvergenceReport,
    StrongRunConfig,
};
use fshe::lifting::NemytskiiMap;
use fshe::noise::{sample_seed, NoiseBundle, TimeGrid};
use statrs::function::gamma::gamma;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "fshe",
    version,
    about = "Spectral laboratory for the fractional stochastic heat equation on (0,1)",
    after_help = "Settings resolve as flags > --config file > defaults. \
                  Reports echo their full configuration; re-running from that \
                  echo reproduces the report bit for bit."
)]
struct Cli {
    /// JSON settings file; unknown keys are rejected by name.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for sampling commands (0 = one per core).
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    threads: usize,

    /// Write the primary artifact to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form eigenvalues of the level-n difference Laplacian (CSV j,lambda).
    Eigens(EigensArgs),
    /// Fractional matrix by the spectral and Balakrishnan routes (CSV, entrywise).
    Operator(OperatorArgs),
    /// Green kernel values on a point or grid (CSV x,y,value).
    Green(GreenArgs),
    /// Weighted gap between the true and lifted discrete semigroups (CSV).
    Gap(GapArgs),
    /// Head/tail eigenvalue sums against their power-law bounds (CSV ratio table).
    LemmaCheck(LemmaCheckArgs),
    /// Noiseless convergence study with closed-form errors (JSON report).
    DetRate(DetRateArgs),
    /// Monte-Carlo strong-error study of the full scheme (JSON report).
    StrongRate(StrongRateArgs),
    /// Gruenwald-Letnikov derivative versus its closed-form limit (CSV).
    Gruenwald(GruenwaldArgs),
}

#[derive(Args, Debug, Default)]
struct EigensArgs {
    /// Grid level n (n - 1 interior points).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct OperatorArgs {
    /// Grid level n.
    #[arg(long)]
    n: Option<usize>,
    /// Fractional order alpha in (1, 4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative tolerance of the Balakrishnan quadrature [default: 1e-9].
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct GreenArgs {
    /// Fractional order alpha in (1, 4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Evaluation time t > 0.
    #[arg(long)]
    t: Option<f64>,
    /// Grid level for the discrete kernel; omit for the continuous kernel.
    #[arg(long)]
    n: Option<usize>,
    /// Batch mode: evaluate on the q-interval interior grid [default: 8].
    #[arg(long, value_name = "Q", conflicts_with_all = ["x", "y"])]
    grid: Option<usize>,
    /// Single-point mode: x coordinate in (0, 1); requires --y.
    #[arg(long, requires = "y")]
    x: Option<f64>,
    /// Single-point mode: y coordinate in (0, 1); requires --x.
    #[arg(long, requires = "x")]
    y: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct GapArgs {
    /// Grid level n.
    #[arg(long)]
    n: Option<usize>,
    /// Fractional order alpha in (1, 4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight exponent delta in [0, 1/4 + 3 alpha / 4).
    #[arg(long)]
    delta: Option<f64>,
    /// Evaluation time t > 0.
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct LemmaCheckArgs {
    /// Fractional order alpha in (1, 4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight exponent delta [default: 0].
    #[arg(long)]
    delta: Option<f64>,
    /// Tail-bound exponent gamma > 1/alpha - 4 delta / alpha [default: 1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Evaluation times [default: 0.05,0.1,0.5].
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Grid levels [default: 8,16,32,64,128].
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

#[derive(Args, Debug, Default)]
struct DetRateArgs {
    /// Fractional order alpha in (1, 4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Initial-condition smoothness eta [default: 1].
    #[arg(long)]
    eta: Option<f64>,
    /// Evaluation time t > 0 [default: 0.1].
    #[arg(long)]
    t: Option<f64>,
    /// Grid levels [default: 8,16,32,64,128].
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Also write the per-level CSV table to this file.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct StrongRateArgs {
    /// Fractional order alpha in (1, 4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Diffusion map: cos, one, tanh, or zero [default: cos].
    #[arg(long)]
    g: Option<String>,
    /// Weight exponent delta for the theoretical rate [default: 0.75].
    #[arg(long)]
    delta: Option<f64>,
    /// Initial-condition smoothness eta [default: 1].
    #[arg(long)]
    eta: Option<f64>,
    /// Moment order p >= 1 of the strong error [default: 2].
    #[arg(long)]
    p: Option<f64>,
    /// Grid levels [default: 8,16,32,64].
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Reference spectral truncation [default: 4x the finest level].
    #[arg(long)]
    ref_n: Option<usize>,
    /// Time horizon T [default: 0.5].
    #[arg(long)]
    t_final: Option<f64>,
    /// Time steps K [default: ceil(8 min(levels)^alpha), i.e. dt = T min^-alpha / 8].
    #[arg(long)]
    steps: Option<usize>,
    /// Monte-Carlo samples [default: 64].
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Reuse the initial diffusion matrix every step (performance studies).
    #[arg(long)]
    frozen_diffusion: bool,
    /// Which theorem's rate to report: 1 or 2 [default: 1].
    #[arg(long)]
    theorem: Option<u8>,
    /// Dump the first sample's paths as CSV files next to the report.
    #[arg(long)]
    dump_paths: bool,
    /// Also write the per-level CSV table to this file.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct GruenwaldArgs {
    /// Derivative order r in (0, 1).
    #[arg(long)]
    r: Option<f64>,
    /// Evaluation point x in (0, 1] on every grid [default: 1].
    #[arg(long)]
    x: Option<f64>,
    /// Test function: identity (f(x) = x) or constant (f = 1) [default: identity].
    #[arg(long)]
    f: Option<String>,
    /// Grid levels [default: 64,128,...,4096].
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

/// Argument problem discovered after merging flags and config; reported
/// like a parse error (exit status 2) rather than a runtime failure.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

/// `value` from flag or config, or a usage error naming what is missing.
fn require<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| {
        usage(format!(
            "missing required setting {name} (flag or config key)"
        ))
    })
}

/// Writes the fully assembled artifact; nothing is emitted on failure paths.
fn emit(artifact: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, artifact)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display())),
        None => {
            print!("{artifact}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {e}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let command = match cli.command {
        Some(command) => command,
        None => match &config.command {
            Some(name) => command_from_name(name)?,
            None => return Err(usage("no subcommand given and config names no command")),
        },
    };
    let output = cli.output.as_deref().or(config.output.as_deref());
    match command {
        Command::Eigens(args) => run_eigens(&args, output),
        Command::Operator(args) => run_operator(&args, &config, output),
        Command::Green(args) => run_green(&args, &config, output),
        Command::Gap(args) => run_gap(&args, &config, output),
        Command::LemmaCheck(args) => run_lemma_check(&args, &config, output),
        Command::DetRate(args) => run_det_rate(&args, &config, output),
        Command::StrongRate(args) => run_strong_rate(&args, &config, output, cli.threads),
        Command::Gruenwald(args) => run_gruenwald(&args, &config, output),
    }
}

fn command_from_name(name: &str) -> Result<Command> {
    Ok(match name {
        "eigens" => Command::Eigens(Default::default()),
        "operator" => Command::Operator(Default::default()),
        "green" => Command::Green(Default::default()),
        "gap" => Command::Gap(Default::default()),
        "lemma-check" => Command::LemmaCheck(Default::default()),
        "det-rate" => Command::DetRate(Default::default()),
        "strong-rate" => Command::StrongRate(Default::default()),
        "gruenwald" => Command::Gruenwald(Default::default()),
        other => return Err(usage(format!("unknown command '{other}' in config"))),
    })
}

fn run_eigens(args: &EigensArgs, output: Option<&Path>) -> Result<()> {
    let n = require(args.n, "--n")?;
    let eigen = EigenSystem::new(n)?;
    let mut table = String::from("j,lambda\n");
    for j in 1..n {
        table.push_str(&format!("{j},{}\n", eigen.lambda(j)));
    }
    emit(&table, output)
}

fn run_operator(
    args: &OperatorArgs,
    config: &ExperimentConfig,
    output: Option<&Path>,
) -> Result<()> {
    let n = require(args.n, "--n")?;
    let alpha = require(args.alpha.or(config.alpha), "--alpha")?;
    let rel_tol = args.rel_tol.or(config.rel_tol).unwrap_or(1e-9);
    let spectral = frac_matrix_spectral(n, alpha)?;
    let quadrature = frac_matrix_balakrishnan(n, alpha, rel_tol)?;
    let mut table = String::from("i,j,spectral,balakrishnan,abs_diff\n");
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let (s, b) = (spectral[(i, j)], quadrature[(i, j)]);
            table.push_str(&format!(
                "{},{},{s:e},{b:e},{:e}\n",
                i + 1,
                j + 1,
                (s - b).abs()
            ));
        }
    }
    emit(&table, output)
}

fn run_green(args: &GreenArgs, config: &ExperimentConfig, output: Option<&Path>) -> Result<()> {
    let alpha = require(args.alpha.or(config.alpha), "--alpha")?;
    let t = require(args.t, "--t")?;
    let kernel: Box<dyn Fn(f64, f64) -> fshe::Result<f64>> = match args.n {
        Some(level) => {
            let op = DiscreteFracOperator::new(level, alpha)?;
            Box::new(move |x, y| op.green(t, x, y))
        }
        None => {
            let op = ContinuousFracOperator::new(alpha, 1)?;
            Box::new(move |x, y| op.green(t, x, y))
        }
    };
    let points: Vec<(f64, f64)> = match (args.x, args.y) {
        (Some(x), Some(y)) => vec![(x, y)],
        _ => {
            let q = args.grid.unwrap_or(8);
            if q < 2 {
                return Err(usage("--grid must be at least 2"));
            }
            let mut grid = Vec::with_capacity((q - 1) * (q - 1));
            for i in 1..q {
                for j in 1..q {
                    grid.push((i as f64 / q as f64, j as f64 / q as f64));
                }
            }
            grid
        }
    };
    let mut table = String::from("x,y,value\n");
    for (x, y) in points {
        table.push_str(&format!("{x},{y},{:e}\n", kernel(x, y)?));
    }
    emit(&table, output)
}

fn run_gap(args: &GapArgs, config: &ExperimentConfig, output: Option<&Path>) -> Result<()> {
    let n = require(args.n, "--n")?;
    let alpha = require(args.alpha.or(config.alpha), "--alpha")?;
    let delta = require(args.delta.or(config.delta), "--delta")?;
    let t = require(args.t, "--t")?;
    let (sup_gap, hs_gap) = semigroup_gap(n, alpha, delta, t)?;
    let table =
        format!("n,alpha,delta,t,sup_gap,hs_gap\n{n},{alpha},{delta},{t},{sup_gap:e},{hs_gap:e}\n");
    emit(&table, output)
}

fn run_lemma_check(
    args: &LemmaCheckArgs,
    config: &ExperimentConfig,
    output: Option<&Path>,
) -> Result<()> {
    let alpha = require(args.alpha.or(config.alpha), "--alpha")?;
    let delta = args.delta.or(config.delta).unwrap_or(0.0);
    let gamma = args.gamma.unwrap_or(1.0);
    let times = args.times.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.5]);
    let levels = args
        .levels
        .clone()
        .or_else(|| config.levels.clone())
        .unwrap_or_else(|| vec![8, 16, 32, 64, 128]);
    let table = lemma_sum_check(alpha, delta, gamma, &times, &levels)?;
    for slope in &table.slopes {
        eprintln!(
            "t = {}: head slope {:.3}, tail slope {:.3}, head ratio spread {:.3}",
            slope.t, slope.head_slope, slope.tail_slope, slope.head_ratio_spread
        );
    }
    emit(&table.to_csv(), output)
}

fn run_det_rate(
    args: &DetRateArgs,
    config: &ExperimentConfig,
    output: Option<&Path>,
) -> Result<()> {
    let alpha = require(args.alpha.or(config.alpha), "--alpha")?;
    let eta = args.eta.or(config.eta).unwrap_or(1.0);
    let t = args.t.unwrap_or(0.1);
    let levels = args
        .levels
        .clone()
        .or_else(|| config.levels.clone())
        .unwrap_or_else(|| vec![8, 16, 32, 64, 128]);
    let report = det_rate_study(alpha, eta, t, &levels)?;
    if let Some(path) = &args.csv {
        emit(&report.to_csv(), Some(path))?;
    }
    emit(&report.to_json(), output)
}

fn resolve_strong(args: &StrongRateArgs, config: &ExperimentConfig) -> Result<StrongRunConfig> {
    let alpha = require(args.alpha.or(config.alpha), "--alpha")?;
    let levels = args
        .levels
        .clone()
        .or_else(|| config.levels.clone())
        .unwrap_or_else(|| vec![8, 16, 32, 64]);
    let finest = levels.iter().copied().max().unwrap_or(0);
    let coarsest = levels.first().copied().unwrap_or(0);
    if coarsest == 0 {
        return Err(usage("levels must be non-empty"));
    }
    let t_final = args.t_final.or(config.t_final).unwrap_or(0.5);
    let steps = args
        .steps
        .or(config.steps)
        .unwrap_or_else(|| (8.0 * (coarsest as f64).powf(alpha)).ceil() as usize);
    Ok(StrongRunConfig {
        alpha,
        g: args
            .g
            .clone()
            .or_else(|| config.g.clone())
            .unwrap_or_else(|| "cos".into()),
        delta: args.delta.or(config.delta).unwrap_or(0.75),
        eta: args.eta.or(config.eta).unwrap_or(1.0),
        p: args.p.or(config.p).unwrap_or(2.0),
        ref_n: args.ref_n.or(config.ref_n).unwrap_or(4 * finest),
        levels,
        t_final,
        steps,
        samples: args.samples.or(config.samples).unwrap_or(64),
        seed: args.seed.or(config.seed).unwrap_or(0),
        frozen_diffusion: args.frozen_diffusion || config.frozen_diffusion.unwrap_or(false),
        theorem: args.theorem.or(config.theorem).unwrap_or(1),
    })
}

fn run_strong_rate(
    args: &StrongRateArgs,
    config: &ExperimentConfig,
    output: Option<&Path>,
    threads: usize,
) -> Result<()> {
    let run = resolve_strong(args, config)?;
    eprintln!("seed: {}", run.seed);
    let report = mc_strong_error(&run, threads)?;
    warn_on_violations(&report);
    if let Some(path) = &args.csv {
        emit(&report.to_csv(), Some(path))?;
    }
    if args.dump_paths {
        dump_paths(&run, output)?;
    }
    emit(&report.to_json(), output)
}

fn warn_on_violations(report: &ConvergenceReport) {
    if !report.theoretical.hypotheses_met {
        eprintln!(
            "warning: theoretical-rate hypotheses violated; the reported xi is indicative only"
        );
        for violation in &report.theoretical.violations {
            eprintln!("  - {violation}");
        }
    }
}

/// Recomputes sample 0 of the study and writes its paths as CSV files
/// `<stem>-paths-reference.csv` and `<stem>-paths-n<level>.csv`, where
/// `<stem>` is the output path without extension (or `strong-rate`).
fn dump_paths(run: &StrongRunConfig, output: Option<&Path>) -> Result<()> {
    let stem: PathBuf = output
        .map(|p| p.with_extension(""))
        .unwrap_or_else(|| PathBuf::from("strong-rate"));
    let with_suffix = |suffix: String| -> PathBuf {
        let mut os = stem.clone().into_os_string();
        os.push(suffix);
        PathBuf::from(os)
    };
    let g = NemytskiiMap::from_name(&run.g)?;
    let grid = TimeGrid::new(run.t_final, run.steps)?;
    let u0 = make_initial(run.eta, run.ref_n)?;
    let bundle = NoiseBundle::generate(sample_seed(run.seed, 0), run.ref_n, grid)?;
    let view = bundle.view();
    let reference = solve_reference(
        run.ref_n,
        run.alpha,
        &g,
        &u0,
        grid,
        &view,
        run.frozen_diffusion,
    )?;
    let mut written = vec![with_suffix("-paths-reference.csv".into())];
    emit(&reference.to_csv(), Some(&written[0]))?;
    for &n in &run.levels {
        let path = solve_discrete(n, run.alpha, &g, &u0, grid, &view, run.frozen_diffusion)?;
        let file = with_suffix(format!("-paths-n{n}.csv"));
        emit(&path.to_csv(), Some(&file))?;
        written.push(file);
    }
    eprintln!(
        "dumped sample-0 paths: {}",
        written
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn run_gruenwald(
    args: &GruenwaldArgs,
    config: &ExperimentConfig,
    output: Option<&Path>,
) -> Result<()> {
    let r = require(args.r, "--r")?;
    let x = args.x.unwrap_or(1.0);
    let f = args.f.as_deref().unwrap_or("identity");
    let levels = args
        .levels
        .clone()
        .or_else(|| config.levels.clone())
        .unwrap_or_else(|| vec![64, 128, 256, 512, 1024, 2048, 4096]);
    // Closed-form left Riemann-Liouville derivatives on (0, 1]:
    // D^r x = x^{1-r} / Gamma(2 - r); D^r 1 = x^{-r} / Gamma(1 - r).
    let (sample, target): (fn(f64) -> f64, f64) = match f {
        "identity" => (|v| v, x.powf(1.0 - r) / gamma(2.0 - r)),
        "constant" => (|_| 1.0, x.powf(-r) / gamma(1.0 - r)),
        other => {
            return Err(usage(format!(
                "unknown test function '{other}' (identity, constant)"
            )))
        }
    };
    let mut table = String::from("n,value,error\n");
    let mut errors = Vec::with_capacity(levels.len());
    for &n in &levels {
        let scheme = GruenwaldScheme::new(r, n)?;
        let samples: Vec<f64> = (0..=n).map(|i| sample(i as f64 / n as f64)).collect();
        let value = scheme.apply(&samples, x)?;
        let error = (value - target).abs();
        errors.push(error);
        table.push_str(&format!("{n},{value},{error:e}\n"));
    }
    if levels.len() >= 3 && errors.iter().all(|e| *e > 0.0) {
        let fitted = fit_rate(&levels, &errors)?;
        eprintln!("fitted order: {:.3}", fitted.value);
    }
    emit(&table, output)
}
