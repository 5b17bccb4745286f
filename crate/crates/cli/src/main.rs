use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use thermoflow::asymptotics::{
    aep_bounds, convergence_csv, convergence_table, corollary1_delta, find_n_star_capped, AepBounds,
    ConvergenceRow, EpsilonSchedule, FiniteNReport, DEFAULT_CLASS_CAP, DEFAULT_N_CAP,
};
use thermoflow::curves::curve_of;
use thermoflow::divergences::{divergence_profile, smoothed_divergence_conventional, AlphaGrid};
use thermoflow::io::{SmoothingReport, StateDocument};
use thermoflow::smoothing::{flattest_state, steep_state, steepest_state_small_eps};
use thermoflow::state::{BlockDiagonalState, ThermalContext};
use thermoflow::transitions::{check_exact_second_laws_tol, check_theorem1_tol, check_to_exact_tol, Verdict};

const CLASS_CAP_VAR: &str = "THERMOFLOW_CLASS_CAP";

#[derive(Debug, Parser)]
#[command(name = "thermoflow", version, about = "Thermo-majorization, smoothed free energies and transition checks")]
struct Cli {
    /// Margin tolerance for verdicts.
    #[arg(long, global = true, default_value_t = thermoflow::transitions::DEFAULT_MARGIN_TOL)]
    tol: f64,
    /// α-grid: `default` or a comma separated list such as `0.5,2,inf`.
    #[arg(long, global = true, default_value = "default")]
    grid: String,
    /// Seed for sampled estimates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Report divergences in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Use the thermal state for inputs that only carry a spectrum.
    #[arg(long, global = true)]
    thermal: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Flattest,
    Steep,
    Steepest,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Smooth a state within the ε-ball.
    Smooth {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_parser = unit_interval)]
        eps: f64,
        input: PathBuf,
    },
    /// Kinks of the thermo-majorization curve.
    Curve {
        /// Add `c − ε` and `c + ε` columns.
        #[arg(long, value_parser = unit_interval)]
        band: Option<f64>,
        input: PathBuf,
    },
    /// Rényi divergences and free energies over the grid.
    Divergence {
        /// Smoothed values at this ε.
        #[arg(long, value_parser = unit_interval)]
        eps: Option<f64>,
        /// Also estimate the conventional smoothing with this many ball candidates.
        #[arg(long)]
        conventional: Option<usize>,
        input: PathBuf,
    },
    /// Transition feasibility from `rho` to `sigma`.
    Check {
        #[command(subcommand)]
        mode: CheckMode,
    },
    /// Finite-n envelope of the normalized smoothed divergences.
    Aep {
        /// Copy numbers, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        /// `cbrt`, `inverse` or a fixed ε.
        #[arg(long, default_value = "cbrt")]
        schedule: String,
        /// Only the closed-form envelope, no tensor powers.
        #[arg(long)]
        bounds_only: bool,
        input: PathBuf,
    },
    /// Smallest copy number at which the finite-n condition holds.
    Nstar {
        #[arg(long, default_value = "cbrt")]
        schedule: String,
        #[arg(long, default_value_t = DEFAULT_N_CAP)]
        cap: u64,
        rho: PathBuf,
        sigma: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CheckMode {
    /// Exact second laws on the grid.
    Exact { rho: PathBuf, sigma: PathBuf },
    /// Thermo-majorization on curves.
    To { rho: PathBuf, sigma: PathBuf },
    /// Smoothed second laws with ε₁ on the input and ε₂ on the target.
    Theorem1 {
        #[arg(long, value_parser = unit_interval)]
        eps1: f64,
        #[arg(long, value_parser = unit_interval)]
        eps2: f64,
        rho: PathBuf,
        sigma: PathBuf,
    },
    /// Finite-n sufficient condition at `n` copies.
    FiniteN {
        #[arg(long, value_parser = positive_n)]
        n: u64,
        #[arg(long, value_parser = unit_interval)]
        eps: f64,
        rho: PathBuf,
        sigma: PathBuf,
    },
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive_n(s: &str) -> std::result::Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("n must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(format!("{e}")),
    }
}

fn load(path: &Path, thermal: bool) -> Result<(ThermalContext, BlockDiagonalState)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = StateDocument::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let use_thermal = thermal && doc.probabilities.is_none();
    doc.load(use_thermal).with_context(|| format!("loading {}", path.display()))
}

fn load_pair(rho: &Path, sigma: &Path, thermal: bool) -> Result<(ThermalContext, BlockDiagonalState, BlockDiagonalState)> {
    let (ctx, r) = load(rho, thermal)?;
    let (ctx_s, s) = load(sigma, thermal)?;
    if !ctx.same_as(&ctx_s) {
        bail!("{} and {} use different spectra or temperatures", rho.display(), sigma.display());
    }
    Ok((ctx, r, s))
}

fn class_cap() -> Result<u128> {
    match std::env::var(CLASS_CAP_VAR) {
        Ok(v) => v.trim().parse().with_context(|| format!("{CLASS_CAP_VAR}={v}")),
        Err(_) => Ok(DEFAULT_CLASS_CAP),
    }
}

fn schedule(s: &str) -> Result<EpsilonSchedule> {
    let sched: EpsilonSchedule = s.parse().with_context(|| format!("unknown schedule {s:?}"))?;
    if let EpsilonSchedule::Fixed(e) = sched {
        if !(e > 0.0 && e < 1.0) {
            bail!("fixed epsilon must lie in (0, 1), got {e}");
        }
    }
    Ok(sched)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

struct Units {
    bits: bool,
}

impl Units {
    fn d(&self, nats: f64) -> f64 {
        if self.bits {
            nats / std::f64::consts::LN_2
        } else {
            nats
        }
    }

    fn name(&self) -> &'static str {
        if self.bits {
            "bits"
        } else {
            "nats"
        }
    }
}

#[derive(Serialize)]
struct DivergenceRow {
    alpha: thermoflow::divergences::Alpha,
    d: f64,
    free_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    conventional: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conventional_exact: Option<bool>,
}

#[derive(Serialize)]
struct DivergenceOutput {
    units: &'static str,
    epsilon: Option<f64>,
    rows: Vec<DivergenceRow>,
}

#[derive(Serialize)]
struct AepOutput {
    units: &'static str,
    schedule: EpsilonSchedule,
    bounds: Vec<AepRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    convergence: Vec<ConvergenceRow>,
}

#[derive(Serialize)]
struct AepRow {
    #[serde(flatten)]
    bounds: AepBounds,
    g1: f64,
    g2: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct FiniteNOutput {
    units: &'static str,
    verdict: Verdict,
    #[serde(flatten)]
    report: FiniteNReport,
}

/// Rendered output plus the process exit code.
struct Outcome {
    text: String,
    code: u8,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, code: 0 }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let grid = AlphaGrid::parse(&cli.grid).with_context(|| format!("grid {:?}", cli.grid))?;
    let units = Units { bits: cli.bits };
    let format = cli.format;
    match &cli.command {
        Command::Smooth { kind, eps, input } => {
            let (ctx, state) = load(input, cli.thermal)?;
            let result = match kind {
                Kind::Flattest => flattest_state(&state, &ctx, *eps),
                Kind::Steep => steep_state(&state, &ctx, *eps),
                Kind::Steepest => steepest_state_small_eps(&state, &ctx, *eps),
            }?;
            let report = SmoothingReport::new(&ctx, &state, &result);
            Ok(Outcome::ok(match format.unwrap_or(Format::Json) {
                Format::Json => json(&report)?,
                Format::Csv => {
                    let mut out = String::from("index,energy,input,smoothed\n");
                    for (i, ((e, p), q)) in ctx
                        .spectrum()
                        .energies()
                        .iter()
                        .zip(state.probabilities())
                        .zip(&report.probabilities)
                        .enumerate()
                    {
                        out.push_str(&format!("{i},{e},{p},{q}\n"));
                    }
                    out
                }
            }))
        }
        Command::Curve { band, input } => {
            let (ctx, state) = load(input, cli.thermal)?;
            let curve = curve_of(&state, &ctx)?;
            Ok(Outcome::ok(match format.unwrap_or(Format::Csv) {
                Format::Csv => match band {
                    Some(eps) => curve.to_band_csv(*eps),
                    None => curve.to_csv(),
                },
                Format::Json => json(&curve.kinks())?,
            }))
        }
        Command::Divergence {
            eps,
            conventional,
            input,
        } => {
            let (ctx, state) = load(input, cli.thermal)?;
            let profile = divergence_profile(&state, &ctx, &grid, *eps)?;
            let mut rows = Vec::with_capacity(grid.len());
            for (i, &alpha) in grid.values().iter().enumerate() {
                let conv = match (conventional, eps) {
                    (Some(budget), Some(e)) => Some(smoothed_divergence_conventional(
                        &state, &ctx, alpha, *e, *budget, cli.seed,
                    )?),
                    _ => None,
                };
                rows.push(DivergenceRow {
                    alpha,
                    d: units.d(profile.d_values[i]),
                    free_energy: profile.f_values[i],
                    conventional: conv.map(|c| units.d(c.value)),
                    conventional_exact: conv.map(|c| c.exact),
                });
            }
            let output = DivergenceOutput {
                units: units.name(),
                epsilon: *eps,
                rows,
            };
            Ok(Outcome::ok(match format.unwrap_or(Format::Json) {
                Format::Json => json(&output)?,
                Format::Csv => {
                    let mut out = format!("alpha,D_{},F", units.name());
                    if conventional.is_some() && eps.is_some() {
                        out.push_str(&format!(",conventional_D_{},conventional_exact", units.name()));
                    }
                    out.push('\n');
                    for r in &output.rows {
                        out.push_str(&format!("{},{:.16e},{:.16e}", r.alpha, r.d, r.free_energy));
                        if let (Some(c), Some(x)) = (r.conventional, r.conventional_exact) {
                            out.push_str(&format!(",{c:.16e},{x}"));
                        }
                        out.push('\n');
                    }
                    out
                }
            }))
        }
        Command::Check { mode } => check(mode, cli, &grid, &units),
        Command::Aep {
            n,
            schedule: sched,
            bounds_only,
            input,
        } => {
            let (ctx, state) = load(input, cli.thermal)?;
            let sched = schedule(sched)?;
            if n.contains(&0) {
                bail!("n must be at least 1");
            }
            let bounds = n
                .iter()
                .map(|&k| {
                    let b = aep_bounds(&state, &ctx, k as u64, sched.epsilon(k as u64))?;
                    Ok(AepRow {
                        g1: units.d(b.g1()),
                        g2: units.d(b.g2()),
                        lower: units.d(b.lower()),
                        upper: units.d(b.upper()),
                        bounds: b,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let convergence = if *bounds_only {
                Vec::new()
            } else {
                convergence_table(&state, &ctx, n, &grid, sched, class_cap()?)?
                    .into_iter()
                    .map(|r| ConvergenceRow {
                        normalized_d: units.d(r.normalized_d),
                        lower_bound: units.d(r.lower_bound),
                        upper_bound: units.d(r.upper_bound),
                        ..r
                    })
                    .collect()
            };
            Ok(Outcome::ok(match format.unwrap_or(Format::Json) {
                Format::Json => json(&AepOutput {
                    units: units.name(),
                    schedule: sched,
                    bounds,
                    convergence,
                })?,
                Format::Csv if *bounds_only => {
                    let mut out = String::from("n,epsilon,delta,relative_entropy,g1,g2,lower,upper\n");
                    for r in &bounds {
                        out.push_str(&format!(
                            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                            r.bounds.n,
                            r.bounds.epsilon,
                            units.d(r.bounds.delta),
                            units.d(r.bounds.relative_entropy),
                            r.g1,
                            r.g2,
                            r.lower,
                            r.upper
                        ));
                    }
                    out
                }
                Format::Csv => convergence_csv(&convergence),
            }))
        }
        Command::Nstar {
            schedule: sched,
            cap,
            rho,
            sigma,
        } => {
            let (ctx, r, s) = load_pair(rho, sigma, cli.thermal)?;
            let report = find_n_star_capped(&r, &s, &ctx, schedule(sched)?, *cap)?;
            Ok(Outcome::ok(json(&report)?))
        }
    }
}

fn check(mode: &CheckMode, cli: &Cli, grid: &AlphaGrid, units: &Units) -> Result<Outcome> {
    let report = match mode {
        CheckMode::Exact { rho, sigma } => {
            let (ctx, r, s) = load_pair(rho, sigma, cli.thermal)?;
            check_exact_second_laws_tol(&r, &s, &ctx, grid, cli.tol)?
        }
        CheckMode::To { rho, sigma } => {
            let (ctx, r, s) = load_pair(rho, sigma, cli.thermal)?;
            check_to_exact_tol(&r, &s, &ctx, cli.tol)?
        }
        CheckMode::Theorem1 { eps1, eps2, rho, sigma } => {
            let (ctx, r, s) = load_pair(rho, sigma, cli.thermal)?;
            check_theorem1_tol(&r, &s, &ctx, *eps1, *eps2, grid, cli.tol)?
        }
        CheckMode::FiniteN { n, eps, rho, sigma } => {
            let (ctx, r, s) = load_pair(rho, sigma, cli.thermal)?;
            let mut report = corollary1_delta(&r, &s, &ctx, *n, *eps)?;
            let verdict = if report.condition_holds {
                Verdict::FeasibleCtoGrid
            } else {
                Verdict::Inconclusive
            };
            report.delta = units.d(report.delta);
            report.g1 = units.d(report.g1);
            report.g2 = units.d(report.g2);
            report.big_delta = units.d(report.big_delta);
            let output = FiniteNOutput {
                units: units.name(),
                verdict,
                report,
            };
            return Ok(Outcome {
                text: json(&output)?,
                code: verdict.exit_code() as u8,
            });
        }
    };
    Ok(Outcome {
        text: json(&report)?,
        code: report.verdict.exit_code() as u8,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, &outcome.text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{}", outcome.text);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(outcome.code)
}
