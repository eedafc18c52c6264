//! `nexus`: fit surrogates, build, solve and study energy-water nexus plans.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nexus_core::builder::{build, BuildError};
use nexus_core::config::{load_config, ConfigError, LoadedConfig, Overrides};
use nexus_core::instance::{SolveMode, WaterBasis};
use nexus_core::solution::{solve_built, PipelineError, Solution};
use nexus_core::surrogates::FitOptions;
use nexus_core::sweep::{epsilon_sweep, storage_phenomenon_study, SweepError};
use nexus_core::validator::{check_solution, energy_mix_report};
use nexus_milp::{export_lp, SolveStatus, SolverConfig};

/// Relative tolerance of the solution check written next to every solution.
const VALIDATION_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "nexus", version, about = "Energy-water nexus planning with MILP surrogates")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each can also be set through a
/// `NEXUS_*` environment variable.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "NEXUS_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "NEXUS_MODE")]
    mode: Option<ModeArg>,
    /// Override the horizon; series are tiled to fit.
    #[arg(long, global = true, env = "NEXUS_HORIZON_STEPS")]
    horizon_steps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "NEXUS_OUT", default_value = "results")]
    out: PathBuf,
    #[arg(long, global = true, env = "NEXUS_SEED", default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit per MILP solve [s].
    #[arg(long, global = true, env = "NEXUS_TIME_LIMIT")]
    time_limit: Option<f64>,
    /// Relative optimality gap.
    #[arg(long, global = true, env = "NEXUS_GAP")]
    gap: Option<f64>,
    #[arg(long, global = true, env = "NEXUS_EPSILON_WATER_BASIS")]
    epsilon_water_basis: Option<BasisArg>,
    /// Absolute land limit [ha]; replaces the configured one.
    #[arg(long, global = true, env = "NEXUS_EPSILON_LAND")]
    epsilon_land: Option<f64>,
    /// Absolute water limit [m³ over the horizon]; replaces the configured one.
    #[arg(long, global = true, env = "NEXUS_EPSILON_WATER")]
    epsilon_water: Option<f64>,
    #[arg(long, global = true, env = "NEXUS_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Full,
    Steady,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BasisArg {
    Feed,
    Permeate,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit cost and land lines for every technology with a unit model.
    FitSurrogates,
    /// Write the MILP in LP format plus a size report.
    Build,
    /// Solve, check the solution and write results and plot data.
    Solve,
    /// Solve an ε grid given as fractions of the unrestricted land and water use.
    Sweep {
        #[arg(long, value_delimiter = ',', env = "NEXUS_LAND", default_value = "1.0")]
        land: Vec<f64>,
        #[arg(long, value_delimiter = ',', env = "NEXUS_WATER", default_value = "1.0")]
        water: Vec<f64>,
    },
    /// Compare tank use in full and steady mode under a water limit.
    StudyStorage {
        /// Water limit as a fraction of the unrestricted water use.
        #[arg(long, env = "NEXUS_WATER_FRACTION", default_value_t = 0.99)]
        water_fraction: f64,
    },
    /// Re-check a solution file against the configured instance.
    #[command(hide = true)]
    Validate {
        #[arg(long)]
        solution: PathBuf,
    },
}

/// Process exit codes.
mod exit {
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const LIMIT: u8 = 4;
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(exit::CONFIG, e.to_string())
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::GuaranteedInfeasible { .. } => Failure::new(exit::INFEASIBLE, e.to_string()),
            e => Failure::new(exit::CONFIG, e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Build(b) => b.into(),
            PipelineError::Solve(s) => Failure::new(exit::FAILURE, s.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::BadFraction(_) => Failure::new(exit::CONFIG, e.to_string()),
            SweepError::Baseline { status, .. } | SweepError::BothFailed { full: status, .. } => {
                Failure::new(status_code(status).unwrap_or(exit::FAILURE), e.to_string())
            }
            SweepError::Pipeline(p) => p.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(exit::FAILURE, e.to_string())
    }
}

/// Exit code for a status that ends the run unsuccessfully.
fn status_code(status: SolveStatus) -> Option<u8> {
    match status {
        SolveStatus::Optimal => None,
        SolveStatus::Infeasible | SolveStatus::Unbounded => Some(exit::INFEASIBLE),
        SolveStatus::Feasible | SolveStatus::IterationLimit => Some(exit::LIMIT),
    }
}

impl Common {
    fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig { seed: self.seed, workers: self.workers.max(1), ..SolverConfig::default() };
        cfg.time_limit_seconds = self.time_limit;
        if let Some(g) = self.gap {
            cfg.relative_gap = g;
        }
        cfg
    }

    fn overrides(&self) -> Overrides {
        Overrides {
            horizon_steps: self.horizon_steps,
            mode: self.mode.map(|m| match m {
                ModeArg::Full => SolveMode::Full,
                ModeArg::Steady => SolveMode::Steady,
            }),
            epsilon_water_basis: self.epsilon_water_basis.map(|b| match b {
                BasisArg::Feed => WaterBasis::Feed,
                BasisArg::Permeate => WaterBasis::Permeate,
            }),
            epsilon_land: self.epsilon_land,
            epsilon_water: self.epsilon_water,
            force_fit: false,
        }
    }

    fn load(&self, force_fit: bool) -> Result<LoadedConfig, Failure> {
        let path = self.config.as_deref().ok_or_else(|| Failure::new(exit::CONFIG, "--config is required"))?;
        let fit = FitOptions { solver: self.solver(), force_milp: false, workers: self.workers.max(1) };
        Ok(load_config(path, &Overrides { force_fit, ..self.overrides() }, &fit)?)
    }

    fn out_dir(&self) -> Result<&Path, Failure> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = &cli.common;
    match cli.command {
        Command::FitSurrogates => {
            let loaded = c.load(true)?;
            if loaded.fits.is_empty() {
                return Err(Failure::new(exit::CONFIG, "no technology has both a unit model and a resource series"));
            }
            output::write_fits(c.out_dir()?, &loaded.fits)?;
            for f in &loaded.fits {
                let s = &f.surrogate;
                println!(
                    "{}: cost {:.6e}·E + {:.2} (R² {:.4}), land {:.6e}·E + {:.4} (R² {:.4})",
                    s.name, s.cost_slope, s.cost_intercept, s.r_squared_cost, s.land_slope, s.land_intercept, s.r_squared_land
                );
            }
        }
        Command::Build => {
            let loaded = c.load(false)?;
            let art = build(&loaded.instance)?;
            let lp = export_lp(&art.model).map_err(|e| Failure::new(exit::FAILURE, e.to_string()))?;
            let out = c.out_dir()?;
            std::fs::write(out.join("model.lp"), lp)?;
            output::write_json(&out.join("size.json"), &art.size)?;
            let s = art.size;
            println!(
                "{} steps: {} rows, {} continuous, {} binaries, {} integers",
                loaded.instance.grid.horizon_steps, s.rows, s.continuous, s.binaries, s.integers
            );
        }
        Command::Solve => {
            let loaded = c.load(false)?;
            let inst = &loaded.instance;
            let art = build(inst)?;
            let sol = solve_built(inst, &art, &c.solver())?;
            let out = c.out_dir()?;
            output::write_json(&out.join("solution.json"), &sol)?;
            if !sol.has_values() {
                return Err(Failure::new(status_code(sol.status).unwrap_or(exit::FAILURE), format!("no solution: {:?}", sol.status)));
            }
            let report = check_solution(inst, &sol, VALIDATION_TOL).map_err(|e| Failure::new(exit::FAILURE, e.to_string()))?;
            output::write_json(&out.join("validation.json"), &report)?;
            output::write_series(out, &sol)?;
            output::write_tank_plot(&out.join("tank_level_plot.csv"), inst.grid.dt_hours, &[("tank_level", &sol)])?;
            if let Ok(mix) = energy_mix_report(inst, &sol, VALIDATION_TOL) {
                output::write_json(&out.join("energy_mix.json"), &mix)?;
                output::write_mix(out, &mix)?;
            }
            println!(
                "{} ({} mode): {:?}, objective {:.2} $/yr, validator {}",
                inst.name,
                inst.mode,
                sol.status,
                sol.objective,
                if report.pass { "PASS" } else { "FAIL" }
            );
            if !report.pass {
                return Err(Failure::new(exit::FAILURE, format!("validator flagged {}", report.flagged_names().join(", "))));
            }
            if let Some(code) = status_code(sol.status) {
                return Err(Failure::new(code, format!("stopped at a limit with gap {:.3e}", sol.stats.relative_gap)));
            }
        }
        Command::Sweep { land, water } => {
            let loaded = c.load(false)?;
            let table = epsilon_sweep(&loaded.instance, &land, &water, &c.solver(), c.workers)?;
            let out = c.out_dir()?;
            output::write_json(&out.join("sweep.json"), &table)?;
            output::write_sweep(&out.join("sweep.csv"), &table)?;
            for r in &table.rows {
                println!(
                    "land {:.3} water {:.3}: {:?} {}",
                    r.land_fraction,
                    r.water_fraction,
                    r.status,
                    if r.objective.is_finite() { format!("{:.2}", r.objective) } else { "-".into() }
                );
            }
        }
        Command::StudyStorage { water_fraction } => {
            let loaded = c.load(false)?;
            let study = storage_phenomenon_study(&loaded.instance, water_fraction, &c.solver())?;
            let out = c.out_dir()?;
            output::write_json(&out.join("storage_study.json"), &study)?;
            output::write_tank_plot(
                &out.join("tank_level_plot.csv"),
                loaded.instance.grid.dt_hours,
                &[("full", &study.full), ("steady", &study.steady)],
            )?;
            println!(
                "ε_W {:.1} m³: full max V {:.2} m³ ({:?}), steady max V {:.2} m³ ({:?}), steady − full {:.2} $/yr",
                study.epsilon_water,
                study.full_max_level,
                study.full.status,
                study.steady_max_level,
                study.steady.status,
                study.steady_gap
            );
        }
        Command::Validate { solution } => {
            let loaded = c.load(false)?;
            let text = std::fs::read_to_string(&solution)?;
            let sol: Solution = serde_json::from_str(&text).map_err(|e| {
                Failure::new(exit::CONFIG, format!("{}:{}:{}: {e}", solution.display(), e.line(), e.column()))
            })?;
            let report = check_solution(&loaded.instance, &sol, VALIDATION_TOL).map_err(|e| Failure::new(exit::FAILURE, e.to_string()))?;
            if report.pass {
                println!("PASS");
            } else {
                println!("FAIL: {}", report.flagged_names().join(", "));
                return Err(Failure::new(exit::FAILURE, "solution rejected"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
