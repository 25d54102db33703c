//! Subcommands of the `lgdelay` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lgdelay::{integrate, validate_model, InitialHistory, Trajectory64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Analyses, BetaDenominatorConfig, RunConfig};
use crate::error::CliError;
use crate::pipeline::run_pipeline;
use crate::presets;
use crate::report::{build_report, now_unix, write_outputs, Flag};

#[derive(Debug, Parser)]
#[command(
    name = "lgdelay",
    version,
    about = "Delayed predator-prey model: bounds, stability and fixed-point analyses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Output directory (defaults to the config's `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Integration step.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// End of the integration interval; a `t_settle` at or past it moves to the midpoint.
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    /// Seed for random initial histories.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bound dividing the beta coefficient: M1 (prey) or M2 (predator).
    #[arg(long = "beta-denominator", global = true, value_parser = parse_denominator)]
    pub beta_denominator: Option<BetaDenominatorConfig>,
}

fn parse_denominator(s: &str) -> Result<BetaDenominatorConfig, String> {
    match s {
        "M1" => Ok(BetaDenominatorConfig::M1),
        "M2" => Ok(BetaDenominatorConfig::M2),
        other => Err(format!("expected M1 or M2, got `{other}`")),
    }
}

/// Where a subcommand takes its model from.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in preset (`example1` or `example2`).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Permanence bounds and the empirical check of a trajectory tail.
    Bounds(Source),
    /// Integrate and write trajectories.csv; optionally test random constant histories.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Number of random positive constant histories to integrate (uses --seed).
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
    /// Stability coefficients and the attractivity experiment.
    Stability(Source),
    /// Picard iteration of the integral operator.
    FixedPoint(Source),
    /// Ergodic-mean and near-period diagnostics.
    PapCheck(Source),
    /// Run every analysis for a built-in preset.
    Preset { name: String },
    /// Run the analyses selected in a configuration file.
    Run { config: PathBuf },
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        pointer: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    RunConfig::from_json(&text)
}

impl Source {
    fn load(&self) -> Result<RunConfig, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path),
            (None, Some(name)) => presets::by_name(name),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(h) = self.h {
            cfg.run.h = h;
        }
        if let Some(t_end) = self.t_end {
            cfg.run.t_end = t_end;
            if cfg.run.t_settle >= t_end {
                cfg.run.t_settle = 0.5 * (cfg.run.t0 + t_end);
            }
        }
        if let Some(d) = self.beta_denominator {
            cfg.options.beta_denominator = d;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
    }
}

fn with_analyses(mut cfg: RunConfig, analyses: Analyses) -> RunConfig {
    cfg.analyses = analyses;
    cfg
}

/// Runs the pipeline, writes every output file and returns a short summary.
pub fn run_and_write(cfg: &RunConfig) -> Result<String, CliError> {
    let results = run_pipeline(cfg)?;
    let timestamp = now_unix();
    let paths = write_outputs(&results, &cfg.output_dir, timestamp)?;
    let report = build_report(&results, timestamp);

    let mut s = String::new();
    if let Some(name) = &report.name {
        let _ = writeln!(s, "run: {name}");
    }
    if let Some(p) = &report.permanence {
        let _ = writeln!(
            s,
            "permanence ({}): M1={:.6} M2={:.6} m1={:.6} m2={:.6} c0_holds={}",
            p.source, p.prey_max, p.predator_max, p.prey_min, p.predator_min, p.c0_holds
        );
    }
    if let Some(st) = &report.stability {
        if let (Some(a), Some(b)) = (st.alpha_liminf, st.beta_liminf) {
            let _ = writeln!(
                s,
                "stability ({}, beta over {}): alpha_liminf={a:.6} beta_liminf={b:.6} hypothesis_holds={}",
                st.source,
                st.beta_denominator,
                st.hypothesis_holds.unwrap_or(false)
            );
        }
        if let Some(at) = &st.attractivity {
            let _ = writeln!(
                s,
                "attractivity: d(t_end)={:.3e} passed={}",
                at.final_distance, at.passed
            );
        }
    }
    if let Some(f) = &report.fixed_point {
        let _ = writeln!(
            s,
            "fixed point: {} after {} iterations (last update {:.3e}); box corners map inside: {}",
            f.outcome, f.iterations, f.final_delta, f.corners_inside
        );
    }
    if let Some(p) = &report.pap {
        let _ = writeln!(
            s,
            "pap: prey means {}, near period tau={:.2} defect={:.3e}",
            p.prey.verdict, p.prey_near_period.tau, p.prey_near_period.defect
        );
    }
    if let Some(ds) = &report.discrepancies {
        let count = |f: Flag| ds.iter().filter(|d| d.flag == f).count();
        let _ = writeln!(
            s,
            "discrepancies: {} match, {} minor, {} major, {} not computed",
            count(Flag::Match),
            count(Flag::Minor),
            count(Flag::Major),
            count(Flag::NotComputed)
        );
    }
    for p in paths {
        let _ = writeln!(s, "wrote {}", p.display());
    }
    Ok(s)
}

/// Draws `count` constant histories with both components in `[0.05, 2]`.
pub fn random_histories(seed: u64, count: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0)))
        .collect()
}

fn simulate(cfg: &RunConfig, random: usize, seed: u64) -> Result<String, CliError> {
    cfg.check()?;
    let spec = cfg.model_spec()?;
    let history = cfg.history.build("/history")?;
    let hz = &cfg.options.horizons;
    let validation = validate_model::<f64>(&spec, hz.bounds, hz.bounds_samples)?;
    history.validate(validation.max_lag_r, 1001)?;
    let run = &cfg.run;
    let traj: Trajectory64 = integrate(&spec, &history, run.t0, run.t_end, run.h)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("trajectories.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    traj.write_csv(std::io::BufWriter::new(file), 1)
        .map_err(|e| CliError::io(&path, e))?;

    let mut s = format!(
        "integrated {} knots on [{}, {}], min(u, v) = {:.6e}\nwrote {}\n",
        traj.knots().len(),
        run.t0,
        run.t_end,
        traj.min_state(),
        path.display()
    );
    if random > 0 {
        let minima = random_histories(seed, random)
            .par_iter()
            .map(|&(u, v)| {
                integrate::<f64>(
                    &spec,
                    &InitialHistory::constant(u, v),
                    run.t0,
                    run.t_end,
                    run.h,
                )
                .map(|t| t.min_state())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let worst = minima.iter().copied().fold(f64::INFINITY, f64::min);
        let positive = minima.iter().filter(|&&m| m > 0.0).count();
        let _ = writeln!(
            s,
            "random histories (seed {seed}): {positive}/{random} stay positive, smallest min(u, v) = {worst:.6e}"
        );
    }
    Ok(s)
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let ov = &cli.overrides;
    let prepared = |cfg: RunConfig| {
        let mut cfg = cfg;
        ov.apply(&mut cfg);
        cfg
    };
    match &cli.command {
        Command::Bounds(src) => run_and_write(&prepared(with_analyses(
            src.load()?,
            Analyses {
                bounds: true,
                ..Analyses::NONE
            },
        ))),
        Command::Simulate { source, random } => {
            simulate(&prepared(source.load()?), *random, ov.seed.unwrap_or(0))
        }
        Command::Stability(src) => run_and_write(&prepared(with_analyses(
            src.load()?,
            Analyses {
                stability: true,
                attractivity: true,
                ..Analyses::NONE
            },
        ))),
        Command::FixedPoint(src) => run_and_write(&prepared(with_analyses(
            src.load()?,
            Analyses {
                fixed_point: true,
                ..Analyses::NONE
            },
        ))),
        Command::PapCheck(src) => run_and_write(&prepared(with_analyses(
            src.load()?,
            Analyses {
                pap: true,
                ..Analyses::NONE
            },
        ))),
        Command::Preset { name } => run_and_write(&prepared(presets::by_name(name)?)),
        Command::Run { config } => run_and_write(&prepared(load_config(config)?)),
    }
}
