use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scenopt::helly_bounds::{mpc_stage_bounds, MpcStageDims};
use scenopt::lp::SimplexSolver;
use scenopt::rmpc::{self, solve_rmpc, AffinePolicy, MpcProblem};
use scenopt::sample_complexity::{
    min_sample_size_exact, min_sample_size_explicit, vc_dim_affine, vc_dim_quadratic,
    vc_sample_size, SampleSizeQuery, VcQuery,
};
use scenopt::support::{preset_family, verify_bound, Preset};
use scenopt::table::{fmt_sig, write_csv};
use scenopt::validation::{
    estimate_beta, stage_sample_sizes, BoundRule, Inversion, ValidationConfig,
};
use scenopt::Error;

#[derive(Parser)]
#[command(
    name = "scenopt",
    version,
    about = "Scenario sample sizes, support bounds and randomized MPC experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest sample size for a violation level, confidence and support bound.
    Samplesize(SampleSizeArgs),
    /// Stage bounds on the number of support samples for randomized MPC.
    Bounds(BoundsArgs),
    /// Empirical support counts of a random structured family.
    Verify(VerifyArgs),
    /// Solve randomized MPC instances and estimate violation and confidence.
    Rmpc(RmpcArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VcKind {
    Aff,
    Quad,
}

#[derive(Args)]
struct SampleSizeArgs {
    /// Violation level in (0, 1)
    #[arg(long)]
    eps: f64,
    /// Confidence parameter in (0, 1)
    #[arg(long)]
    beta: f64,
    /// Bound on the number of support samples
    #[arg(long, default_value_t = 1)]
    zeta: u64,
    /// Compare with the VC sample size of r rows in dimension d.
    #[arg(long, num_args = 3, value_names = ["R", "D", "aff|quad"])]
    vc: Option<Vec<String>>,
    /// Print CSV instead of plain text.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Single stage; otherwise 1..=k-max.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 4)]
    k_max: usize,
    /// Single input dimension; otherwise 1..=nu-max.
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long, default_value_t = 5)]
    nu_max: usize,
    #[arg(long, default_value_t = 1)]
    n_f: usize,
    #[arg(long, default_value_t = 1)]
    n_delta: usize,
    #[arg(long, default_value_t = 1)]
    rank_f: usize,
    /// State constraints are upper/lower pairs; n-f counts both sides
    #[arg(long)]
    box_states: bool,
    /// Report the tightened bound k (one constraint, scalar disturbance)
    #[arg(long)]
    tightened: bool,
    /// Write bounds.csv into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// additive, multiplicative, separable, affine, quadratic, box or example1
    #[arg(long)]
    preset: String,
    /// Decision dimension (preset default otherwise)
    #[arg(long)]
    n: Option<usize>,
    /// Constraint rows
    #[arg(long)]
    r: Option<usize>,
    /// Uncertainty dimension
    #[arg(long)]
    d: Option<usize>,
    /// Columns of G (separable and multiplicative)
    #[arg(long)]
    m: Option<usize>,
    /// Samples per program.
    #[arg(long = "N", default_value_t = 100)]
    n_samples: usize,
    /// Independent programs
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Master seed of every random stream
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (all cores otherwise)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RmpcArgs {
    /// Built-in problem; ignored when --config is given.
    #[arg(long, default_value = "inventory")]
    preset: String,
    /// MPC problem as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T", default_value_t = 8)]
    horizon: usize,
    #[arg(long, default_value_t = 2)]
    nu: usize,
    /// Per-stage violation level (problem value otherwise)
    #[arg(long)]
    eps: Option<f64>,
    /// Per-stage confidence (problem value or 0.1 otherwise)
    #[arg(long)]
    beta: Option<f64>,
    /// Stage bound: standard, srank, new or tightened
    #[arg(long, default_value = "new")]
    rule: String,
    /// Size stages by the explicit bound instead of exact inversion
    #[arg(long)]
    explicit: bool,
    /// Independent RMPC programs
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Fresh trajectories per program for the violation estimate
    #[arg(long, default_value_t = 2000)]
    test_samples: usize,
    /// Master seed of every random stream
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (all cores otherwise)
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Lib(Error),
    Io(io::Error),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type CmdResult = Result<(), Failure>;

macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(io::stdout().lock(), $($arg)*)?
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Samplesize(a) => samplesize(a),
        Command::Bounds(a) => bounds(a),
        Command::Verify(a) => verify(a),
        Command::Rmpc(a) => rmpc_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e @ (Error::Infeasible | Error::Unbounded))) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Lib(e @ (Error::Domain(_) | Error::Dimension(_)))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, Failure> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::domain("--threads must be at least 1").into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Failure::Other(e.to_string())),
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn samplesize(a: SampleSizeArgs) -> CmdResult {
    let q = SampleSizeQuery::new(a.eps, a.beta, a.zeta)?;
    let exact = min_sample_size_exact(&q);
    let explicit = min_sample_size_explicit(&q);
    let vc = match &a.vc {
        None => None,
        Some(v) => {
            let parse = |s: &str| {
                s.parse::<u64>().ok().filter(|&x| x >= 1).ok_or_else(|| {
                    Error::domain(format!("--vc expects positive integers, got {s:?}"))
                })
            };
            let (r, d) = (parse(&v[0])?, parse(&v[1])?);
            let xi = match v[2].as_str() {
                "aff" => vc_dim_affine(r, d),
                "quad" => vc_dim_quadratic(r, d),
                other => {
                    return Err(Error::domain(format!(
                        "--vc kind must be aff or quad, got {other:?}"
                    ))
                    .into())
                }
            };
            Some((xi, vc_sample_size(&VcQuery::new(xi, a.eps, a.beta)?)))
        }
    };
    let mut out = io::stdout().lock();
    if a.csv {
        let mut header = vec!["epsilon", "beta", "zeta", "exact", "explicit"];
        let mut row = vec![
            fmt_sig(a.eps),
            fmt_sig(a.beta),
            a.zeta.to_string(),
            exact.to_string(),
            explicit.to_string(),
        ];
        if let Some((xi, n)) = vc {
            header.extend(["vc_dim", "vc"]);
            row.extend([fmt_sig(xi), n.to_string()]);
        }
        write_csv(&mut out, &header, &[row])?;
    } else {
        writeln!(out, "exact {exact}")?;
        writeln!(out, "explicit {explicit}")?;
        if let Some((xi, n)) = vc {
            writeln!(out, "vc {n} (dimension {})", fmt_sig(xi))?;
        }
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> CmdResult {
    let ks: Vec<usize> = a.k.map_or_else(|| (1..=a.k_max).collect(), |k| vec![k]);
    let nus: Vec<usize> = a.nu.map_or_else(|| (1..=a.nu_max).collect(), |n| vec![n]);
    if ks.is_empty() || nus.is_empty() {
        return Err(Error::domain("empty (k, n_u) grid").into());
    }
    let mut rows = Vec::new();
    for &k in &ks {
        for &nu in &nus {
            let mut dims = MpcStageDims::new(k, nu, a.n_delta, a.n_f, a.rank_f);
            dims.box_states = a.box_states;
            dims.tightened = a.tightened;
            let b = mpc_stage_bounds(&dims)?;
            rows.push(
                [k, nu, a.n_delta, a.n_f, a.rank_f, b.std, b.srank, b.new]
                    .iter()
                    .map(|v| v.to_string())
                    .collect(),
            );
        }
    }
    let header = [
        "k", "n_u", "n_delta", "n_f", "rank_f", "std", "srank", "new",
    ];
    match &a.out {
        None => write_csv(io::stdout().lock(), &header, &rows)?,
        Some(dir) => {
            let (path, mut w) = create(dir, "bounds.csv")?;
            write_csv(&mut w, &header, &rows)?;
            w.flush()?;
            say!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> CmdResult {
    let preset = Preset::parse(&a.preset)?;
    let mut dims = preset.default_dims();
    dims.n = a.n.unwrap_or(dims.n);
    dims.r = a.r.unwrap_or(dims.r);
    dims.d = a.d.unwrap_or(dims.d);
    dims.m = a.m.unwrap_or(dims.m);
    let family = preset_family(preset, dims, a.seed)?;
    let solver = SimplexSolver::default();
    let report = with_threads(a.threads, || {
        verify_bound(&family, a.n_samples, a.trials, a.seed, &solver)
    })??;
    let (path, mut w) = create(&a.out, &format!("verify-{}.csv", a.seed))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    say!(
        "preset={} n={} N={} trials={} bound={} max_support={} violations={} standard_violations={} failed={}",
        report.family,
        report.n,
        report.n_samples,
        report.trials,
        report.bound,
        report.max_support_count,
        report.violations,
        report.standard_violations,
        report.failed_trials
    );
    say!("wrote {}", path.display());
    Ok(())
}

fn load_problem(a: &RmpcArgs) -> Result<MpcProblem, Failure> {
    match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let mut cfg: scenopt::rmpc::MpcConfig = serde_json::from_str(&text)
                .map_err(|e| Error::domain(format!("{}: {e}", path.display())))?;
            if let Some(eps) = a.eps {
                cfg.epsilon = eps;
            }
            if let Some(beta) = a.beta {
                cfg.beta = Some(beta);
            }
            Ok(MpcProblem::from_config(&cfg)?)
        }
        None => {
            if a.preset != "inventory" {
                return Err(Error::domain(format!("unknown MPC preset {:?}", a.preset)).into());
            }
            let mut p = rmpc::inventory(a.horizon, a.nu, a.eps.unwrap_or(0.2))?;
            p.beta = Some(a.beta.unwrap_or(0.1));
            Ok(p)
        }
    }
}

fn policy_rows(policy: &AffinePolicy) -> Vec<Vec<String>> {
    let (nu, nd) = (policy.n_u, policy.n_delta);
    let mut rows = Vec::new();
    for k in 0..policy.horizon {
        for a in 0..nu {
            rows.push(vec![
                "h".into(),
                k.to_string(),
                a.to_string(),
                String::new(),
                String::new(),
                fmt_sig(policy.h[k * nu + a]),
            ]);
            for j in 0..k {
                for b in 0..nd {
                    rows.push(vec![
                        "M".into(),
                        k.to_string(),
                        a.to_string(),
                        j.to_string(),
                        b.to_string(),
                        fmt_sig(policy.m[(k * nu + a, j * nd + b)]),
                    ]);
                }
            }
        }
    }
    rows
}

fn rmpc_cmd(a: RmpcArgs) -> CmdResult {
    let p = load_problem(&a)?;
    let cfg = ValidationConfig {
        n_instances: a.instances,
        n_test_samples: a.test_samples,
        epsilon: p.epsilon,
        beta: p.beta.unwrap_or(0.1),
        rule: BoundRule::parse(&a.rule)?,
        inversion: if a.explicit {
            Inversion::Explicit
        } else {
            Inversion::Exact
        },
        seed: a.seed,
    };
    let (_, sizes) = stage_sample_sizes(&p, &cfg)?;
    let solver = SimplexSolver::default();
    let nominal = solve_rmpc(&p, &sizes, a.seed, &solver)?;
    let report = with_threads(a.threads, || estimate_beta(&cfg, &p, &solver))??;

    let (policy_path, mut w) = create(&a.out, &format!("rmpc-{}-policy.csv", a.seed))?;
    write_csv(
        &mut w,
        &["kind", "k", "input", "j", "delta", "value"],
        &policy_rows(&nominal.policy),
    )?;
    w.flush()?;
    let (path, mut w) = create(&a.out, &format!("rmpc-{}.csv", a.seed))?;
    report.write_csv(&mut w)?;
    w.flush()?;

    say!(
        "rule={} expected_cost={}",
        cfg.rule.name(),
        fmt_sig(nominal.expected_cost())
    );
    for s in &report.stages {
        say!(
            "stage {} N={} bound={} epsilon_hat={} beta_hat={}",
            s.stage,
            s.n_samples,
            s.bound,
            fmt_sig(s.epsilon_hat),
            fmt_sig(s.beta_hat)
        );
    }
    if report.failed_instances > 0 {
        say!("failed instances: {}", report.failed_instances);
    }
    say!("wrote {} and {}", path.display(), policy_path.display());
    Ok(())
}
