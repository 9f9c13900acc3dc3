#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dpmix::adaptive::{delta_opt_recursive, GridSpec, MechanismSequence, Slot};
use dpmix::audit::{audit_exp_mech, audit_gaussian, audit_grr, audit_laplace, audit_trunc_gauss, AuditReport};
use dpmix::calibration::{
    analytic_gaussian_delta, gaussian_zcdp_eps, kfold_comparison, kfold_sweep, laplace_histogram_eps,
    solve_eps_analytic, solve_sigma_analytic, solve_sigma_zcdp, HistogramSpec,
};
use dpmix::mechanisms::{
    exp_mech_topk, known_gauss, known_lap, ls_noise, tokenize_counts, trunc_gauss_release, Histogram, RngState,
    TruncGaussConfig,
};
use dpmix::nonadaptive::{delta_opt_mixed, eps_inverse, Bound, CompositionQuery};
use dpmix::setwise::{PrivacyClass, SetwiseAccountant};
use dpmix_cli::figures::{self, linear_grid};
use dpmix_cli::table::{fmt_f64, Cell, Table};

#[derive(Parser)]
#[command(name = "dpmix", version, about = "Privacy accounting for mixed DP and bounded-range mechanisms")]
struct Cli {
    /// Seed for every randomized command.
    #[arg(long, global = true, env = "DPMIX_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Composition bounds.
    #[command(subcommand)]
    Compose(Compose),
    /// Laplace against Gaussian calibration for histograms.
    #[command(subcommand)]
    Compare(Compare),
    /// Curve data for the figures.
    Figures(FiguresArgs),
    /// Private top-k pipelines.
    Topk(TopkArgs),
    /// Monte-Carlo privacy audit, reported as JSON.
    Audit(AuditArgs),
    /// Noise calibration calculators.
    #[command(subcommand)]
    Calibrate(Calibrate),
}

#[derive(Args, Clone)]
struct Curve {
    /// Single global ε.
    #[arg(long, allow_negative_numbers = true)]
    eps_g: Option<f64>,
    /// Global ε grid as `start:end:step`.
    #[arg(long)]
    eps_g_grid: Option<String>,
    /// Report ε_g at `--delta` instead of δ.
    #[arg(long)]
    invert: bool,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Subcommand)]
enum Compose {
    Dp {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        curve: Curve,
    },
    Br {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        curve: Curve,
    },
    Mixed {
        #[arg(long)]
        k: u64,
        /// Number of DP mechanisms.
        #[arg(long)]
        m: u64,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        curve: Curve,
    },
    Adaptive {
        /// Comma-separated slots, e.g. `DP,BR,BR`.
        #[arg(long)]
        slots: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = GridSpec::default().points_per_level)]
        grid_points: usize,
        #[arg(long, default_value_t = GridSpec::default().refine_rounds)]
        refine_rounds: usize,
        #[command(flatten)]
        curve: Curve,
    },
    Setwise {
        /// Accountant JSON document.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        delta: f64,
    },
}

#[derive(Subcommand)]
enum Compare {
    Histogram {
        #[arg(long)]
        delta0: u64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        delta: f64,
        /// Number of composed releases.
        #[arg(long, default_value_t = 1)]
        k: u64,
        /// Sweep `k = 1..=k_max` instead of a single `k`.
        #[arg(long)]
        k_max: Option<u64>,
    },
}

#[derive(Args)]
struct FiguresArgs {
    /// Figure number; all figures when absent.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    figure: Option<u8>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// `element,count` lines.
    Csv,
    /// Object mapping element to count.
    Json,
    /// Raw text, tokenized into word counts.
    Corpus,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopkMode {
    KnownLap,
    KnownGauss,
    Lsnoise,
    TruncGauss,
}

#[derive(Args)]
struct TopkArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: InputFormat,
    #[arg(long, value_enum)]
    mode: TopkMode,
    #[arg(long)]
    k: usize,
    /// ε per Laplace count or per discovery round.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 13.1)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// ℓ0-sensitivity; defaults to `k`.
    #[arg(long)]
    delta0: Option<u64>,
    /// Bound on distinct elements; defaults to the input size.
    #[arg(long)]
    d_bar: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditMechanism {
    Grr,
    Laplace,
    Gaussian,
    TruncGauss,
    ExpMech,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_enum)]
    mechanism: AuditMechanism,
    #[arg(long, allow_negative_numbers = true)]
    eps_g: f64,
    #[arg(long, default_value_t = 1_000_000)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// GRR parameter t; defaults to eps / 2.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Counts for the exponential-mechanism audit.
    #[arg(long, value_delimiter = ',', default_value = "3,2,1")]
    counts: Vec<f64>,
}

#[derive(Subcommand)]
enum Calibrate {
    /// Analytic Gaussian: σ from (ε, δ), ε from (σ, δ) or δ from (σ, ε).
    Analytic {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Gaussian through zCDP on a histogram with ℓ0-sensitivity `delta0`.
    Zcdp {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        delta0: u64,
        #[arg(long)]
        delta: f64,
    },
    /// Truncation level of the truncated Gaussian release.
    Truncation {
        #[arg(long)]
        delta0: u64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Global ε of per-coordinate Laplace noise.
    Laplace {
        #[arg(long)]
        eps_per_coord: f64,
        #[arg(long)]
        delta0: u64,
        #[arg(long)]
        delta: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    CliError::Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<dpmix::Error>() {
            return match e {
                dpmix::Error::Bracket { .. } | dpmix::Error::Convergence { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => 2,
                CliError::Io { .. } => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { context: format!("reading {}", path.display()), source }.into())
}

fn write_file(path: &Path, content: &str) -> anyhow::Result<()> {
    std::fs::write(path, content)
        .map_err(|source| CliError::Io { context: format!("writing {}", path.display()), source }.into())
}

fn emit(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_file(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("grid must be start:end:step, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    if !(v[2] > 0.0) || !(v[1] >= v[0]) || !v.iter().all(|x| x.is_finite()) {
        return Err(usage(format!("grid needs finite start <= end and step > 0, got '{s}'")));
    }
    Ok(linear_grid(v[0], v[1], v[2]))
}

/// Evaluates `delta_at` on the requested ε_g values, or inverts it.
fn curve_table(
    curve: &Curve,
    mut table: Table,
    delta_at: &dyn Fn(f64) -> dpmix::Result<f64>,
    invert: &dyn Fn(f64) -> anyhow::Result<f64>,
) -> anyhow::Result<Table> {
    if curve.invert {
        let delta = curve.delta.ok_or_else(|| usage("--invert requires --delta"))?;
        table.columns = vec!["delta".into(), "eps_g".into()];
        table.push(vec![delta.into(), invert(delta)?.into()]);
        return Ok(table.param("delta", fmt_f64(delta)));
    }
    let grid = match (&curve.eps_g, &curve.eps_g_grid) {
        (Some(e), None) => vec![*e],
        (None, Some(g)) => parse_grid(g)?,
        _ => return Err(usage("give exactly one of --eps-g, --eps-g-grid, or --invert with --delta")),
    };
    table.columns = vec!["eps_g".into(), "delta".into()];
    for eg in grid {
        table.push(vec![eg.into(), delta_at(eg)?.into()]);
    }
    Ok(table)
}

fn invert_by_bisection(target: f64, hi: f64, f: &dyn Fn(f64) -> dpmix::Result<f64>) -> anyhow::Result<f64> {
    use dpmix::numerics::{bisect_bracket, Bracket};
    if !(target > 0.0 && target < 1.0) {
        return Err(usage(format!("--delta must lie in (0, 1), got {target}")));
    }
    if f(0.0)? <= target {
        return Ok(0.0);
    }
    let g = |x: f64| f(x).map(|d| d - target).unwrap_or(f64::NAN);
    Ok(bisect_bracket(g, &Bracket::new(0.0, hi, 1e-9, 200)?)?.hi)
}

fn run_compose(cmd: Compose, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let table = match cmd {
        Compose::Dp { k, eps, curve } => {
            let t = Table::new(&[]).param("bound", "dp").param("k", k).param("eps", fmt_f64(eps));
            let bound = Bound::Dp;
            curve_table(&curve, t, &|eg| bound.delta(k, eps, eg), &|d| Ok(eps_inverse(d, bound, k, eps)?))?
        }
        Compose::Br { k, eps, curve } => {
            let t = Table::new(&[]).param("bound", "br").param("k", k).param("eps", fmt_f64(eps));
            let bound = Bound::Br;
            curve_table(&curve, t, &|eg| bound.delta(k, eps, eg), &|d| Ok(eps_inverse(d, bound, k, eps)?))?
        }
        Compose::Mixed { k, m, eps, curve } => {
            let t = Table::new(&[]).param("bound", "mixed").param("k", k).param("m", m).param("eps", fmt_f64(eps));
            let bound = Bound::Mixed { m };
            CompositionQuery::new(k, m, eps, 0.0)?;
            curve_table(
                &curve,
                t,
                &|eg| Ok(delta_opt_mixed(&CompositionQuery::new(k, m, eps, eg)?)),
                &|d| Ok(eps_inverse(d, bound, k, eps)?),
            )?
        }
        Compose::Adaptive { slots, eps, grid_points, refine_rounds, curve } => {
            let parsed = slots
                .split(',')
                .map(|s| s.trim().parse::<Slot>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(format!("invalid --slots '{slots}': {e}")))?;
            let seq = MechanismSequence::new(parsed, eps)?;
            let grid = GridSpec::new(grid_points, refine_rounds)?;
            let t = Table::new(&[])
                .param("bound", "adaptive")
                .param("slots", slots.replace(',', " "))
                .param("eps", fmt_f64(eps))
                .param("grid_points", grid_points)
                .param("refine_rounds", refine_rounds);
            let f = |eg: f64| delta_opt_recursive(&seq, eg, &grid);
            let hi = eps * seq.slots.len() as f64;
            curve_table(&curve, t, &f, &|d| invert_by_bisection(d, hi, &f))?
        }
        Compose::Setwise { config, delta } => {
            let acc: SetwiseAccountant = serde_json::from_str(&read_file(&config)?)
                .with_context(|| format!("parsing accountant {}", config.display()))?;
            let has_zcdp = acc.registered().iter().any(|c| matches!(c, PrivacyClass::ZCDP { .. }));
            let mut t = Table::new(&["eps_g", "delta"])
                .param("bound", if has_zcdp { "setwise_zcdp" } else { "setwise_cdp" })
                .param("registered", acc.registered().len())
                .param("consumed", acc.consumed().len());
            let (eg, d) = if has_zcdp { acc.global_bound_zcdp(delta)? } else { (acc.global_bound_cdp(delta)?, delta) };
            t.push(vec![eg.into(), d.into()]);
            t
        }
    };
    emit(out, &table.to_csv())
}

fn kfold_table(rows: &[dpmix::calibration::KfoldRow], spec: &HistogramSpec) -> Table {
    let mut t = Table::new(&["method", "k", "sigma", "delta", "eps_g", "metadata"])
        .param("delta0", spec.delta0)
        .param("tau", fmt_f64(spec.tau));
    for r in rows {
        t.push(vec![r.method.name().into(), r.k.into(), r.sigma.into(), r.delta.into(), r.eps_g.into(), r.metadata.clone().into()]);
    }
    t
}

fn run_compare(cmd: Compare, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let Compare::Histogram { delta0, tau, sigma, delta, k, k_max } = cmd;
    let spec = HistogramSpec::new(delta0, delta0, tau, delta0)?;
    let rows = match k_max {
        Some(km) => kfold_sweep(km, &spec, sigma, delta)?,
        None => kfold_comparison(k, &spec, sigma, delta)?,
    };
    emit(out, &kfold_table(&rows, &spec).to_csv())
}

fn run_figures(args: FiguresArgs, seed: u64) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|source| CliError::Io { context: format!("creating {}", args.out_dir.display()), source })?;
    let which: Vec<u8> = args.figure.map(|f| vec![f]).unwrap_or_else(|| (1..=7).collect());
    for n in which {
        let t = figures::figure(n, seed)?;
        let path = args.out_dir.join(format!("figure{n}.csv"));
        write_file(&path, &t.to_csv())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn read_histogram_entries(path: &Path, format: InputFormat) -> anyhow::Result<BTreeMap<String, f64>> {
    let text = read_file(path)?;
    Ok(match format {
        InputFormat::Corpus => tokenize_counts(&text),
        InputFormat::Json => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        InputFormat::Csv => {
            let mut m = BTreeMap::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (id, count) = line
                    .rsplit_once(',')
                    .ok_or_else(|| usage(format!("{}:{}: expected element,count", path.display(), i + 1)))?;
                match count.trim().parse::<f64>() {
                    Ok(c) => *m.entry(id.trim().to_string()).or_insert(0.0) += c,
                    Err(_) if i == 0 => continue,
                    Err(_) => return Err(usage(format!("{}:{}: invalid count '{count}'", path.display(), i + 1))),
                }
            }
            m
        }
    })
}

fn run_topk(a: TopkArgs, seed: u64, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let entries = read_histogram_entries(&a.input, a.format)?;
    let n = entries.len() as u64;
    let delta0 = a.delta0.unwrap_or(a.k as u64).max(1);
    let d_bar = a.d_bar.unwrap_or(n).max(n);
    let spec = HistogramSpec::new(d_bar.max(delta0), delta0, a.tau, d_bar)?;
    let h = Histogram::new(entries, spec)?;
    if a.k > h.entries.len() {
        return Err(usage(format!("--k = {} exceeds the {} input elements", a.k, h.entries.len())));
    }
    let mut rng = RngState::new(seed);
    let top_by_value = |mut v: Vec<(String, f64)>| {
        v.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        v.truncate(a.k);
        v
    };
    let (mode, rows): (&str, Vec<(usize, String, f64)>) = match a.mode {
        TopkMode::KnownLap => {
            let v = top_by_value(known_lap(&h, a.eps, &mut rng)?);
            ("known-lap", v.into_iter().enumerate().map(|(i, (e, x))| (i + 1, e, x)).collect())
        }
        TopkMode::KnownGauss => {
            let v = top_by_value(known_gauss(&h, a.sigma, &mut rng)?);
            ("known-gauss", v.into_iter().enumerate().map(|(i, (e, x))| (i + 1, e, x)).collect())
        }
        TopkMode::Lsnoise => {
            let ordering = exp_mech_topk(&h, a.k, a.eps, &mut rng)?;
            let v = ls_noise(&h, &ordering, a.sigma, &mut rng)?;
            ("lsnoise", v.into_iter().enumerate().map(|(i, (e, x))| (i + 1, e, x)).collect())
        }
        TopkMode::TruncGauss => {
            let cfg = TruncGaussConfig::new(delta0, d_bar, a.tau, a.sigma, a.delta)?;
            let items = trunc_gauss_release(&h, &cfg, &mut rng)?;
            let v = items.into_iter().take(a.k).map(|it| (it.rank, it.element, it.value)).collect();
            ("trunc-gauss", v)
        }
    };
    let mut t = Table::new(&["rank", "element", "value"])
        .param("mode", mode)
        .param("k", a.k)
        .param("eps", fmt_f64(a.eps))
        .param("sigma", fmt_f64(a.sigma))
        .param("delta", fmt_f64(a.delta))
        .param("tau", fmt_f64(a.tau))
        .param("delta0", delta0)
        .param("d_bar", d_bar)
        .param("seed", seed)
        .param("rng", RngState::ALGORITHM);
    for (r, e, v) in rows {
        t.push(vec![Cell::from(r), e.into(), v.into()]);
    }
    emit(out, &t.to_csv())
}

fn run_audit(a: AuditArgs, seed: u64, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let report: AuditReport = match a.mechanism {
        AuditMechanism::Grr => audit_grr(a.eps, a.t.unwrap_or(a.eps / 2.0), a.eps_g, a.trials, seed)?,
        AuditMechanism::Laplace => audit_laplace(a.eps, a.eps_g, a.trials, seed)?,
        AuditMechanism::Gaussian => audit_gaussian(a.sigma, a.eps_g, a.trials, seed)?,
        AuditMechanism::TruncGauss => {
            let cfg = TruncGaussConfig::new(1, 1, 1.0, a.sigma, a.delta)?;
            audit_trunc_gauss(&cfg, a.eps_g, a.trials, seed)?
        }
        AuditMechanism::ExpMech => audit_exp_mech(&a.counts, 0, a.eps, a.eps_g, a.trials, seed)?,
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    emit(out, &s)
}

fn run_calibrate(cmd: Calibrate, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let one = |name: &str, v: f64, t: Table| {
        let mut t = Table { columns: vec![name.to_string()], ..t };
        t.push(vec![v.into()]);
        t
    };
    let table = match cmd {
        Calibrate::Analytic { eps, sigma, delta } => {
            let t = Table::new(&[]).param("calibration", "analytic_gaussian");
            match (eps, sigma, delta) {
                (Some(e), None, Some(d)) => one("sigma", solve_sigma_analytic(e, d)?, t.param("eps", fmt_f64(e)).param("delta", fmt_f64(d))),
                (None, Some(s), Some(d)) => one("eps", solve_eps_analytic(s, d)?, t.param("sigma", fmt_f64(s)).param("delta", fmt_f64(d))),
                (Some(e), Some(s), None) => one("delta", analytic_gaussian_delta(s, e)?, t.param("sigma", fmt_f64(s)).param("eps", fmt_f64(e))),
                _ => return Err(usage("give exactly two of --eps, --sigma, --delta")),
            }
        }
        Calibrate::Zcdp { eps, sigma, delta0, delta } => {
            let t = Table::new(&[]).param("calibration", "gaussian_zcdp").param("delta0", delta0).param("delta", fmt_f64(delta));
            match (eps, sigma) {
                (Some(e), None) => one("sigma", solve_sigma_zcdp(e, delta0, delta)?, t.param("eps", fmt_f64(e))),
                (None, Some(s)) => one("eps", gaussian_zcdp_eps(s, delta0, delta)?, t.param("sigma", fmt_f64(s))),
                _ => return Err(usage("give exactly one of --eps, --sigma")),
            }
        }
        Calibrate::Truncation { delta0, tau, sigma, delta } => {
            let cfg = TruncGaussConfig::new(delta0, delta0, tau, sigma, delta)?;
            let t = Table::new(&[])
                .param("calibration", "truncation")
                .param("delta0", delta0)
                .param("tau", fmt_f64(tau))
                .param("sigma", fmt_f64(sigma))
                .param("delta", fmt_f64(delta));
            let mut t = Table { columns: vec!["T".into(), "threshold".into()], ..t };
            t.push(vec![cfg.t.into(), cfg.threshold().into()]);
            t
        }
        Calibrate::Laplace { eps_per_coord, delta0, delta } => {
            let spec = HistogramSpec::new(delta0, delta0, 1.0, delta0)?;
            let t = Table::new(&[])
                .param("calibration", "laplace")
                .param("eps_per_coord", fmt_f64(eps_per_coord))
                .param("delta0", delta0)
                .param("delta", fmt_f64(delta));
            one("eps_g", laplace_histogram_eps(eps_per_coord, &spec, delta)?, t)
        }
    };
    emit(out, &table.to_csv())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Compose(c) => run_compose(c, &cli.out),
        Command::Compare(c) => run_compare(c, &cli.out),
        Command::Figures(f) => run_figures(f, cli.seed),
        Command::Topk(t) => run_topk(t, cli.seed, &cli.out),
        Command::Audit(a) => run_audit(a, cli.seed, &cli.out),
        Command::Calibrate(c) => run_calibrate(c, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
