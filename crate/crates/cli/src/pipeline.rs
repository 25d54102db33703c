//! Runs the selected analyses for one configuration.

use lgdelay::examples::{apply_table, Tabulated};
use lgdelay::{
    apply_upsilon, check_trajectory, compare_trajectories, compute_permanence_bounds, dde_residual,
    estimate_liminf, find_near_period, integrate, iterate_fixed_point, pap0_trend, tail_lengths,
    uniform_grid, validate_model, AttractivityResult64, BetaDenominator, Coefficient,
    CoefficientBounds64, FixedPointResult64, GridFunctionPair64, InitialHistory, LiminfEstimate,
    ModelSpec, NearPeriod, OperatorBounds, PermanenceBounds64, PermanenceCheck, PermanenceInputs,
    Trajectory64, TrendReport, UpsilonOptions, ValidationReport64, Window,
};

use crate::config::RunConfig;
use crate::error::CliError;

/// Where a set of coefficient extremes came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSource {
    /// Hand-entered values from the configuration's reference table.
    Table,
    /// Sampled from the coefficient expressions.
    Estimated,
}

impl BoundSource {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundSource::Table => "table",
            BoundSource::Estimated => "estimated",
        }
    }
}

/// Permanence and stability coefficients computed from one bound source.
#[derive(Debug, Clone)]
pub struct SourceResult {
    pub source: BoundSource,
    pub coefficients: CoefficientBounds64,
    pub permanence: PermanenceBounds64,
    /// Trajectory tail checked against these bounds.
    pub empirical: Option<PermanenceCheck<f64>>,
    pub liminf: Option<LiminfEstimate<f64>>,
}

/// Constant pair at a corner of the bounding box and the range of its image.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerCheck {
    pub label: &'static str,
    pub phi: f64,
    pub psi: f64,
    pub image_phi: (f64, f64),
    pub image_psi: (f64, f64),
    pub inside: bool,
}

/// The trajectory tail against the operator and the Picard result.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub window: [f64; 2],
    /// `sup |Y(x) - x|` over the window, `x` the trajectory sampled on the operator grid.
    pub upsilon_defect: f64,
    /// DDE residual of the sampled trajectory on the window.
    pub trajectory_residual: Option<f64>,
    /// `sup |x* - x|` over the window, when Picard converged.
    pub fixed_point_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FixedPointRun {
    pub grid: [f64; 3],
    pub options: UpsilonOptions<f64>,
    pub tail_lengths: (f64, f64),
    pub seed: (f64, f64),
    pub tol: f64,
    pub max_iter: usize,
    pub result: FixedPointResult64,
    pub corners: Vec<CornerCheck>,
    pub cross: CrossCheck,
}

#[derive(Debug, Clone)]
pub struct PapRun {
    pub window: Window<f64>,
    pub prey_trend: TrendReport<f64>,
    pub predator_trend: TrendReport<f64>,
    /// Means of the attractivity distance over windows starting at `t0`.
    pub distance_trend: Option<TrendReport<f64>>,
    pub near_period: NearPeriod<f64>,
    pub near_period_found: bool,
    pub near_period_eps: f64,
    pub near_period_range: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub history: InitialHistory,
    pub validation: ValidationReport64,
    pub primary: BoundSource,
    pub sources: Vec<SourceResult>,
    pub denominator: BetaDenominator,
    pub trajectory: Option<Trajectory64>,
    pub attractivity: Option<AttractivityResult64>,
    pub fixed_point: Option<FixedPointRun>,
    pub pap: Option<PapRun>,
}

impl RunResults {
    pub fn source(&self, source: BoundSource) -> Option<&SourceResult> {
        self.sources.iter().find(|s| s.source == source)
    }

    pub fn primary_source(&self) -> &SourceResult {
        self.source(self.primary)
            .expect("primary source is always computed")
    }
}

/// Near-period scan parameters for solution-derived diagnostics.
const NEAR_PERIOD_EPS: f64 = 1e-2;
const NEAR_PERIOD_TAU_LO: f64 = 0.5;
const NEAR_PERIOD_TAU_HI: f64 = 20.0;
const NEAR_PERIOD_STEP: f64 = 0.01;
const NEAR_PERIOD_POINTS: usize = 400;

fn table_rows(config: &RunConfig) -> Vec<Tabulated> {
    config
        .reference
        .as_ref()
        .map(|r| {
            r.table
                .iter()
                .map(|(name, e)| Tabulated {
                    coefficient: Coefficient::from_name(name).expect("checked by RunConfig::check"),
                    inf: e.inf,
                    sup: e.sup,
                })
                .collect()
        })
        .unwrap_or_default()
}

pub fn run_pipeline(config: &RunConfig) -> Result<RunResults, CliError> {
    config.check()?;
    let analyses = config.analyses;
    if !analyses.any() {
        return Err(CliError::NothingToReport);
    }
    let spec = config.model_spec()?;
    let history = config.history.build("/history")?;
    let second_history = config
        .options
        .second_history
        .build("/options/second_history")?;
    let opts = &config.options;
    let hz = &opts.horizons;
    let run = &config.run;

    let validation: ValidationReport64 = validate_model(&spec, hz.bounds, hz.bounds_samples)?;
    history.validate(validation.max_lag_r, 1001)?;
    second_history.validate(validation.max_lag_r, 1001)?;

    let estimated = CoefficientBounds64::from_report(&validation);
    let rows = table_rows(config);
    let mut bound_sets = Vec::new();
    let primary = if rows.is_empty() {
        BoundSource::Estimated
    } else {
        bound_sets.push((BoundSource::Table, apply_table(&estimated, &rows)));
        BoundSource::Table
    };
    bound_sets.push((BoundSource::Estimated, estimated));

    let denominator: BetaDenominator = opts.beta_denominator.into();
    let needs_trajectory = analyses.bounds || analyses.attractivity || analyses.pap;

    let (trajectories, sources) = rayon::join(
        || -> Result<_, CliError> {
            if !needs_trajectory {
                return Ok((None, None));
            }
            let (main, other) = rayon::join(
                || integrate(&spec, &history, run.t0, run.t_end, run.h),
                || {
                    analyses
                        .attractivity
                        .then(|| integrate(&spec, &second_history, run.t0, run.t_end, run.h))
                        .transpose()
                },
            );
            Ok((Some(main?), other?))
        },
        || -> Result<Vec<SourceResult>, CliError> {
            let grid = uniform_grid(run.t0, hz.liminf, hz.liminf_samples);
            bound_sets
                .iter()
                .map(|&(source, coefficients)| {
                    let permanence =
                        compute_permanence_bounds(&PermanenceInputs::from_bounds(&coefficients))?;
                    let liminf = analyses
                        .stability
                        .then(|| estimate_liminf(&spec, &permanence, &grid, denominator))
                        .transpose()?;
                    Ok(SourceResult {
                        source,
                        coefficients,
                        permanence,
                        empirical: None,
                        liminf,
                    })
                })
                .collect()
        },
    );
    let (trajectory, second): (Option<Trajectory64>, Option<Trajectory64>) = trajectories?;
    let mut source_results = sources?;
    if let (Some(traj), true) = (&trajectory, analyses.bounds) {
        for s in &mut source_results {
            s.empirical = Some(check_trajectory(
                traj,
                &s.permanence,
                run.t_settle,
                opts.slack,
            )?);
        }
    }

    let attractivity = match (&trajectory, &second) {
        (Some(a), Some(b)) => Some(compare_trajectories(a, b, opts.threshold)?),
        _ => None,
    };

    let primary_result = source_results
        .iter()
        .find(|s| s.source == primary)
        .expect("primary source computed");
    let (fixed_point, pap) = rayon::join(
        || {
            analyses
                .fixed_point
                .then(|| run_fixed_point(config, &spec, &history, primary_result))
                .transpose()
        },
        || match (&trajectory, analyses.pap) {
            (Some(traj), true) => run_pap(config, traj, second.as_ref()).map(Some),
            _ => Ok(None),
        },
    );

    Ok(RunResults {
        config: config.clone(),
        spec,
        history,
        validation,
        primary,
        sources: source_results,
        denominator,
        trajectory,
        attractivity,
        fixed_point: fixed_point?,
        pap: pap?,
    })
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Index range of grid nodes inside `[lo, hi]`.
fn window_indices(pair: &GridFunctionPair64, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
    let h = pair.step();
    let first = ((lo - pair.t_lo()) / h - 1e-9).ceil().max(0.0) as usize;
    let last = (((hi - pair.t_lo()) / h + 1e-9).floor() as usize).min(pair.len() - 1);
    first..=last
}

fn run_fixed_point(
    config: &RunConfig,
    spec: &ModelSpec,
    history: &InitialHistory,
    primary: &SourceResult,
) -> Result<FixedPointRun, CliError> {
    let hz = &config.options.horizons;
    let [t_lo, t_hi] = hz.fixed_point_grid;
    let h = hz.fixed_point_h;
    let [w_lo, w_hi] = hz.cross_window;
    if !(t_lo >= config.run.t0 && t_hi > t_lo && h > 0.0) {
        return Err(CliError::Config {
            pointer: "/options/horizons/fixed_point_grid".into(),
            message: format!(
                "grid [{t_lo}, {t_hi}] must start at or after t0 and have positive length"
            ),
        });
    }
    if !(w_lo >= t_lo && w_hi <= t_hi && w_hi > w_lo) {
        return Err(CliError::Config {
            pointer: "/options/horizons/cross_window".into(),
            message: format!(
                "window [{w_lo}, {w_hi}] must lie inside the fixed-point grid [{t_lo}, {t_hi}]"
            ),
        });
    }
    let bounds = &primary.permanence;
    let ob = OperatorBounds::from_coefficients(&primary.coefficients);
    let options = UpsilonOptions::new(hz.quad_step, hz.tail_tol);
    let seed_value = (
        0.5 * (bounds.prey_min + bounds.prey_max),
        0.5 * (bounds.predator_min + bounds.predator_max),
    );
    let seed = GridFunctionPair64::constant(t_lo, t_hi, h, seed_value.0, seed_value.1)?;
    let tails = tail_lengths(&seed, &ob, hz.tail_tol)?;

    let corner_values = [
        ("lower", bounds.prey_min, bounds.predator_min),
        ("upper", bounds.prey_max, bounds.predator_max),
    ];
    let (picard, diagnostics) = rayon::join(
        || {
            iterate_fixed_point(
                spec,
                &seed,
                &ob,
                &options,
                config.options.tol,
                config.options.max_iter,
                Some(bounds),
            )
        },
        || -> Result<_, lgdelay::Error> {
            let mut corners = Vec::new();
            for (label, phi, psi) in corner_values {
                let pair = GridFunctionPair64::constant(t_lo, t_hi, h, phi, psi)?;
                let image = apply_upsilon(spec, &pair, &ob, &options)?;
                corners.push(CornerCheck {
                    label,
                    phi,
                    psi,
                    image_phi: range(image.phi()),
                    image_psi: range(image.psi()),
                    inside: image.in_set(bounds),
                });
            }
            let long = integrate(spec, history, config.run.t0, t_hi, config.run.h)?;
            let sampled = GridFunctionPair64::from_trajectory(&long, t_lo, t_hi, h)?;
            let image = apply_upsilon(spec, &sampled, &ob, &options)?;
            let idx = window_indices(&sampled, w_lo, w_hi);
            let upsilon_defect = idx
                .clone()
                .map(|i| {
                    (image.phi()[i] - sampled.phi()[i])
                        .abs()
                        .max((image.psi()[i] - sampled.psi()[i]).abs())
                })
                .fold(0.0, f64::max);
            let windowed = GridFunctionPair64::from_trajectory(&long, w_lo, w_hi, h)?;
            let trajectory_residual = dde_residual(spec, &windowed).ok();
            Ok((
                corners,
                (
                    sampled,
                    idx,
                    CrossCheck {
                        window: [w_lo, w_hi],
                        upsilon_defect,
                        trajectory_residual,
                        fixed_point_distance: None,
                    },
                ),
            ))
        },
    );
    let result = picard?;
    let (corners, (sampled, idx, mut cross)) = diagnostics?;
    if result.converged {
        cross.fixed_point_distance = Some(
            idx.map(|i| {
                (result.pair.phi()[i] - sampled.phi()[i])
                    .abs()
                    .max((result.pair.psi()[i] - sampled.psi()[i]).abs())
            })
            .fold(0.0, f64::max),
        );
    }
    Ok(FixedPointRun {
        grid: [t_lo, t_hi, h],
        options,
        tail_lengths: tails,
        seed: seed_value,
        tol: config.options.tol,
        max_iter: config.options.max_iter,
        result,
        corners,
        cross,
    })
}

fn run_pap(
    config: &RunConfig,
    traj: &Trajectory64,
    other: Option<&Trajectory64>,
) -> Result<PapRun, CliError> {
    let run = &config.run;
    let panels_per_unit = 1.0 / run.h;
    let settle_half = 0.5 * (run.t_end - run.t_settle);
    let fractions = [0.25, 0.5, 0.75, 1.0];
    let settle_widths: Vec<f64> = fractions.iter().map(|f| f * settle_half).collect();
    let window = Window::Shifted {
        start: run.t_settle,
    };

    let prey = |t: f64| traj.sample_state(t).map(|s| s.0);
    let predator = |t: f64| traj.sample_state(t).map(|s| s.1);
    let prey_trend = pap0_trend(prey, &settle_widths, panels_per_unit, window)?;
    let predator_trend = pap0_trend(predator, &settle_widths, panels_per_unit, window)?;

    let distance_trend = other
        .map(|b| {
            let full_half = 0.5 * (run.t_end - run.t0);
            let widths: Vec<f64> = [0.0625, 0.125, 0.25, 0.5, 1.0]
                .iter()
                .map(|f| f * full_half)
                .collect();
            let d = |t: f64| -> lgdelay::Result<f64> {
                let (ua, va) = traj.sample_state(t)?;
                let (ub, vb) = b.sample_state(t)?;
                Ok((ua - ub).abs() + (va - vb).abs())
            };
            pap0_trend(
                d,
                &widths,
                panels_per_unit,
                Window::Shifted { start: run.t0 },
            )
        })
        .transpose()?;

    let tau_hi = NEAR_PERIOD_TAU_HI.min(settle_half);
    let tau_lo = NEAR_PERIOD_TAU_LO.min(tau_hi);
    let grid = uniform_grid(run.t_settle, run.t_end - tau_hi, NEAR_PERIOD_POINTS);
    let (near_period, near_period_found) = find_near_period(
        prey,
        NEAR_PERIOD_EPS,
        tau_lo,
        tau_hi,
        NEAR_PERIOD_STEP,
        &grid,
    )?;

    Ok(PapRun {
        window,
        prey_trend,
        predator_trend,
        distance_trend,
        near_period,
        near_period_found,
        near_period_eps: NEAR_PERIOD_EPS,
        near_period_range: [tau_lo, tau_hi],
    })
}
