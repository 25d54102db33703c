//! The JSON report, CSV series and gnuplot script.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use lgdelay::textfmt::fmt17;
use lgdelay::{
    Coefficient, HistoryComponent, PermanenceBounds64, PermanenceCheck, TrendReport, Window,
};
use serde::Serialize;

use crate::config::{ReportedValue, RunSection, REPORTED_KEYS};
use crate::error::CliError;
use crate::pipeline::{BoundSource, RunResults, SourceResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub timestamp_unix: u64,
    pub name: Option<String>,
    pub model: ModelSection,
    pub permanence: Option<PermanenceSection>,
    pub stability: Option<StabilitySection>,
    pub pap: Option<PapSection>,
    pub fixed_point: Option<FixedPointSection>,
    pub discrepancies: Option<Vec<Discrepancy>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremes {
    pub inf: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSection {
    pub coefficients: BTreeMap<&'static str, String>,
    pub history: BTreeMap<&'static str, String>,
    pub run: RunSection,
    pub validation: ValidationSection,
    pub trajectory: Option<TrajectorySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSection {
    pub horizon: f64,
    pub samples: usize,
    pub all_positive: bool,
    pub max_lag_r: f64,
    pub min_delay: f64,
    pub estimated: BTreeMap<&'static str, Extremes>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub knots: usize,
    pub min_u: f64,
    pub min_v: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsEntry {
    #[serde(rename = "M1")]
    pub prey_max: f64,
    #[serde(rename = "M2")]
    pub predator_max: f64,
    #[serde(rename = "m1")]
    pub prey_min: f64,
    #[serde(rename = "m2")]
    pub predator_min: f64,
    pub c0_holds: bool,
    pub c0_margin: f64,
    pub inputs: BTreeMap<&'static str, f64>,
    pub coefficients: BTreeMap<&'static str, Extremes>,
    pub empirical: Option<EmpiricalCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCheck {
    pub t_settle: f64,
    pub t_end: f64,
    pub slack: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub prey_max_ok: bool,
    pub predator_max_ok: bool,
    pub prey_min_ok: bool,
    pub predator_min_ok: bool,
    pub all_pass: bool,
}

impl From<&PermanenceCheck<f64>> for EmpiricalCheck {
    fn from(c: &PermanenceCheck<f64>) -> Self {
        EmpiricalCheck {
            t_settle: c.t_settle,
            t_end: c.t_end,
            slack: c.slack,
            u_min: c.u_min,
            u_max: c.u_max,
            v_min: c.v_min,
            v_max: c.v_max,
            prey_max_ok: c.prey_max_ok,
            predator_max_ok: c.predator_max_ok,
            prey_min_ok: c.prey_min_ok,
            predator_min_ok: c.predator_min_ok,
            all_pass: c.all_pass(),
        }
    }
}

/// Headline values come from the primary source; `by_source` has all of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermanenceSection {
    pub source: &'static str,
    #[serde(rename = "M1")]
    pub prey_max: f64,
    #[serde(rename = "M2")]
    pub predator_max: f64,
    #[serde(rename = "m1")]
    pub prey_min: f64,
    #[serde(rename = "m2")]
    pub predator_min: f64,
    pub c0_holds: bool,
    pub by_source: BTreeMap<&'static str, BoundsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiminfEntry {
    pub alpha_liminf: f64,
    pub beta_liminf: f64,
    pub tail: [f64; 2],
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractivitySection {
    pub second_history: BTreeMap<&'static str, String>,
    pub final_distance: f64,
    pub threshold: f64,
    pub window_maxima: Vec<f64>,
    pub tail_nonincreasing: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySection {
    pub beta_denominator: &'static str,
    pub source: &'static str,
    /// Both liminf estimates of the primary source are positive.
    pub hypothesis_holds: Option<bool>,
    pub alpha_liminf: Option<f64>,
    pub beta_liminf: Option<f64>,
    pub by_source: BTreeMap<&'static str, LiminfEntry>,
    /// `[t, alpha, beta]` of the primary source.
    pub samples: Vec<[f64; 3]>,
    pub attractivity: Option<AttractivitySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSection {
    pub window_start: f64,
    /// `[T, mean]` pairs.
    pub means: Vec<[f64; 2]>,
    pub verdict: &'static str,
}

impl TrendSection {
    fn new(trend: &TrendReport<f64>, window: Window<f64>) -> Self {
        let window_start = match window {
            Window::Shifted { start } => start,
            Window::Symmetric => f64::NAN,
        };
        TrendSection {
            window_start,
            means: trend.means.iter().map(|&(t, m)| [t, m]).collect(),
            verdict: trend.verdict.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearPeriodSection {
    pub tau: f64,
    pub defect: f64,
    pub eps: f64,
    pub found: bool,
    pub search_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PapSection {
    /// Solution windows start at `t_settle` instead of being centred at zero.
    pub window: &'static str,
    pub prey: TrendSection,
    pub predator: TrendSection,
    pub attractivity_distance: Option<TrendSection>,
    pub prey_near_period: NearPeriodSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerSection {
    pub corner: &'static str,
    pub phi: f64,
    pub psi: f64,
    pub image_phi: [f64; 2],
    pub image_psi: [f64; 2],
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub window: [f64; 2],
    pub upsilon_defect: f64,
    pub trajectory_residual: Option<f64>,
    pub fixed_point_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSection {
    pub source: &'static str,
    pub grid: [f64; 3],
    pub quad_step: f64,
    pub tail_tol: f64,
    pub tail_lengths: [f64; 2],
    pub seed: [f64; 2],
    pub tol: f64,
    pub max_iter: usize,
    pub outcome: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
    pub deltas: Vec<f64>,
    pub residual: Option<f64>,
    pub stayed_in_set: Option<bool>,
    pub corners: Vec<CornerSection>,
    pub corners_inside: bool,
    pub trajectory_check: CrossSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Match,
    Minor,
    Major,
    NotComputed,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Match => "match",
            Flag::Minor => "minor",
            Flag::Major => "major",
            Flag::NotComputed => "not_computed",
        }
    }
}

/// Relative gap up to which a value that misses the rounding tolerance is a minor mismatch.
pub const MINOR_GAP: f64 = 0.05;
/// Relative tolerance for a match when the reference carries no rounding information.
pub const EXACT_GAP: f64 = 1e-3;

/// `match` if `computed` rounds to `reference` at the given decimals
/// (or is within `EXACT_GAP` without decimals), `minor` within `MINOR_GAP`, else `major`.
pub fn classify(reference: f64, decimals: Option<u32>, computed: f64) -> Flag {
    let gap = (computed - reference).abs();
    let rel = if reference != 0.0 {
        gap / reference.abs()
    } else {
        f64::INFINITY
    };
    let matches = match decimals {
        Some(d) => gap <= 0.5 * 10f64.powi(-(d as i32)) * (1.0 + 1e-9),
        None if reference == 0.0 => gap <= 1e-12,
        None => rel <= EXACT_GAP,
    };
    if matches {
        Flag::Match
    } else if rel <= MINOR_GAP {
        Flag::Minor
    } else {
        Flag::Major
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub quantity: String,
    /// `reported` for reference results, `table` for tabulated coefficient extremes.
    pub kind: &'static str,
    pub reference_value: f64,
    pub decimals: Option<u32>,
    /// Primary-source value (for `table` rows, the sampled estimate).
    pub computed_value: Option<f64>,
    pub computed_by_source: BTreeMap<&'static str, Option<f64>>,
    pub absolute_gap: Option<f64>,
    pub relative_gap: Option<f64>,
    pub flag: Flag,
}

impl Discrepancy {
    fn new(
        quantity: String,
        kind: &'static str,
        reference: ReportedValue,
        computed: Option<f64>,
        by_source: BTreeMap<&'static str, Option<f64>>,
    ) -> Self {
        let absolute_gap = computed.map(|c| c - reference.value);
        let relative_gap =
            absolute_gap.and_then(|g| (reference.value != 0.0).then(|| g / reference.value.abs()));
        Discrepancy {
            quantity,
            kind,
            reference_value: reference.value,
            decimals: reference.decimals,
            computed_value: computed,
            computed_by_source: by_source,
            absolute_gap,
            relative_gap,
            flag: computed.map_or(Flag::NotComputed, |c| {
                classify(reference.value, reference.decimals, c)
            }),
        }
    }
}

fn history_text(c: &HistoryComponent) -> String {
    match c {
        HistoryComponent::Constant(x) => format!("{x}"),
        HistoryComponent::Expr(e) => e.source_text().to_string(),
    }
}

fn history_map(h: &lgdelay::InitialHistory) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("phi1", history_text(&h.phi1)),
        ("phi2", history_text(&h.phi2)),
    ])
}

fn coefficient_map(b: &lgdelay::CoefficientBounds64) -> BTreeMap<&'static str, Extremes> {
    Coefficient::ALL
        .iter()
        .map(|&c| {
            (
                c.name(),
                Extremes {
                    inf: b.inf(c),
                    sup: b.sup(c),
                },
            )
        })
        .collect()
}

fn inputs_map(p: &PermanenceBounds64) -> BTreeMap<&'static str, f64> {
    let i = &p.inputs;
    BTreeMap::from([
        ("a1_inf", i.a1_inf),
        ("a1_sup", i.a1_sup),
        ("a2_inf", i.a2_inf),
        ("a2_sup", i.a2_sup),
        ("b_inf", i.b_inf),
        ("b_sup", i.b_sup),
        ("c1_sup", i.c1_sup),
        ("c2_inf", i.c2_inf),
        ("c2_sup", i.c2_sup),
        ("k1_inf", i.k1_inf),
        ("k2_inf", i.k2_inf),
        ("k2_sup", i.k2_sup),
        ("tau2_sup", i.tau2_sup),
    ])
}

fn reported_value(s: &SourceResult, key: &str) -> Option<f64> {
    let p = &s.permanence;
    match key {
        "M1" => Some(p.prey_max),
        "M2" => Some(p.predator_max),
        "m1" => Some(p.prey_min),
        "m2" => Some(p.predator_min),
        "alpha_inf" => s.liminf.as_ref().map(|l| l.alpha_liminf),
        "beta_inf" => s.liminf.as_ref().map(|l| l.beta_liminf),
        _ => None,
    }
}

fn discrepancies(results: &RunResults) -> Option<Vec<Discrepancy>> {
    let reference = results.config.reference.as_ref()?;
    let mut out = Vec::new();
    // Reference values in a fixed order, each exactly once.
    for key in REPORTED_KEYS {
        let Some(&value) = reference.reported.get(key) else {
            continue;
        };
        let by_source = results
            .sources
            .iter()
            .map(|s| (s.source.as_str(), reported_value(s, key)))
            .collect();
        let computed = reported_value(results.primary_source(), key);
        out.push(Discrepancy::new(
            key.to_string(),
            "reported",
            value,
            computed,
            by_source,
        ));
    }
    let estimated = results
        .source(BoundSource::Estimated)
        .map(|s| s.coefficients);
    for c in Coefficient::ALL {
        let Some(entry) = reference.table.get(c.name()) else {
            continue;
        };
        let sides = [("inf", entry.inf), ("sup", Some(entry.sup))];
        for (side, value) in sides {
            let Some(value) = value else { continue };
            let computed = estimated.map(|b| if side == "inf" { b.inf(c) } else { b.sup(c) });
            let by_source = BTreeMap::from([(BoundSource::Estimated.as_str(), computed)]);
            out.push(Discrepancy::new(
                format!("{}.{side}", c.name()),
                "table",
                ReportedValue {
                    value,
                    decimals: None,
                },
                computed,
                by_source,
            ));
        }
    }
    Some(out)
}

pub fn build_report(results: &RunResults, timestamp_unix: u64) -> Report {
    let cfg = &results.config;
    let analyses = cfg.analyses;
    let v = &results.validation;

    let model = ModelSection {
        coefficients: results
            .spec
            .iter()
            .map(|(c, e)| (c.name(), e.source_text().to_string()))
            .collect(),
        history: history_map(&results.history),
        run: cfg.run.clone(),
        validation: ValidationSection {
            horizon: v.horizon,
            samples: v.samples,
            all_positive: true,
            max_lag_r: v.max_lag_r,
            min_delay: v.min_delay,
            estimated: v
                .bounds
                .iter()
                .map(|(c, b)| {
                    (
                        c.name(),
                        Extremes {
                            inf: b.inf_value,
                            sup: b.sup_value,
                        },
                    )
                })
                .collect(),
        },
        trajectory: results.trajectory.as_ref().map(|t| {
            let min_u = t.knots().iter().map(|k| k.u).fold(f64::INFINITY, f64::min);
            let min_v = t.knots().iter().map(|k| k.v).fold(f64::INFINITY, f64::min);
            TrajectorySummary {
                knots: t.knots().len(),
                min_u,
                min_v,
                positive: min_u > 0.0 && min_v > 0.0,
            }
        }),
    };

    let primary = results.primary_source();
    let permanence = analyses.bounds.then(|| PermanenceSection {
        source: results.primary.as_str(),
        prey_max: primary.permanence.prey_max,
        predator_max: primary.permanence.predator_max,
        prey_min: primary.permanence.prey_min,
        predator_min: primary.permanence.predator_min,
        c0_holds: primary.permanence.c0_holds,
        by_source: results
            .sources
            .iter()
            .map(|s| {
                let p = &s.permanence;
                let entry = BoundsEntry {
                    prey_max: p.prey_max,
                    predator_max: p.predator_max,
                    prey_min: p.prey_min,
                    predator_min: p.predator_min,
                    c0_holds: p.c0_holds,
                    c0_margin: p.c0_margin,
                    inputs: inputs_map(p),
                    coefficients: coefficient_map(&s.coefficients),
                    empirical: s.empirical.as_ref().map(EmpiricalCheck::from),
                };
                (s.source.as_str(), entry)
            })
            .collect(),
    });

    let attractivity = results.attractivity.as_ref().map(|a| AttractivitySection {
        second_history: history_map(
            &cfg.options
                .second_history
                .build("/options/second_history")
                .expect("validated by the pipeline"),
        ),
        final_distance: a.final_distance,
        threshold: a.threshold,
        window_maxima: a.window_maxima.clone(),
        tail_nonincreasing: a.tail_nonincreasing,
        passed: a.passed,
    });
    let stability = (analyses.stability || analyses.attractivity).then(|| {
        let liminf = primary.liminf.as_ref();
        StabilitySection {
            beta_denominator: results.denominator.as_str(),
            source: results.primary.as_str(),
            hypothesis_holds: liminf.map(|l| l.alpha_liminf > 0.0 && l.beta_liminf > 0.0),
            alpha_liminf: liminf.map(|l| l.alpha_liminf),
            beta_liminf: liminf.map(|l| l.beta_liminf),
            by_source: results
                .sources
                .iter()
                .filter_map(|s| {
                    let l = s.liminf.as_ref()?;
                    Some((
                        s.source.as_str(),
                        LiminfEntry {
                            alpha_liminf: l.alpha_liminf,
                            beta_liminf: l.beta_liminf,
                            tail: [l.tail_start, l.tail_end],
                            positive: l.alpha_liminf > 0.0 && l.beta_liminf > 0.0,
                        },
                    ))
                })
                .collect(),
            samples: liminf
                .map(|l| l.samples.iter().map(|&(t, a, b)| [t, a, b]).collect())
                .unwrap_or_default(),
            attractivity,
        }
    });

    let pap = results.pap.as_ref().map(|p| PapSection {
        window: "shifted",
        prey: TrendSection::new(&p.prey_trend, p.window),
        predator: TrendSection::new(&p.predator_trend, p.window),
        attractivity_distance: p
            .distance_trend
            .as_ref()
            .map(|d| TrendSection::new(d, Window::Shifted { start: cfg.run.t0 })),
        prey_near_period: NearPeriodSection {
            tau: p.near_period.tau,
            defect: p.near_period.defect,
            eps: p.near_period_eps,
            found: p.near_period_found,
            search_range: p.near_period_range,
        },
    });

    let fixed_point = results.fixed_point.as_ref().map(|f| {
        let r = &f.result;
        FixedPointSection {
            source: results.primary.as_str(),
            grid: f.grid,
            quad_step: f.options.quad_step,
            tail_tol: f.options.tail_tol,
            tail_lengths: [f.tail_lengths.0, f.tail_lengths.1],
            seed: [f.seed.0, f.seed.1],
            tol: f.tol,
            max_iter: f.max_iter,
            outcome: r.outcome.as_str(),
            converged: r.converged,
            iterations: r.iterations,
            final_delta: r.final_delta,
            deltas: r.deltas.clone(),
            residual: r.residual,
            stayed_in_set: r.stayed_in_set,
            corners_inside: f.corners.iter().all(|c| c.inside),
            corners: f
                .corners
                .iter()
                .map(|c| CornerSection {
                    corner: c.label,
                    phi: c.phi,
                    psi: c.psi,
                    image_phi: [c.image_phi.0, c.image_phi.1],
                    image_psi: [c.image_psi.0, c.image_psi.1],
                    inside: c.inside,
                })
                .collect(),
            trajectory_check: CrossSection {
                window: f.cross.window,
                upsilon_defect: f.cross.upsilon_defect,
                trajectory_residual: f.cross.trajectory_residual,
                fixed_point_distance: f.cross.fixed_point_distance,
            },
        }
    });

    Report {
        timestamp_unix,
        name: cfg.name.clone(),
        model,
        permanence,
        stability,
        pap,
        fixed_point,
        discrepancies: discrepancies(results),
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Writes the series of `results` as CSV files; returns the names written.
pub fn write_series(results: &RunResults, dir: &Path) -> Result<Vec<&'static str>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    if let Some(traj) = &results.trajectory {
        write_with(&dir.join("trajectories.csv"), |w| traj.write_csv(w, 1))?;
        written.push("trajectories.csv");
    }
    if let Some(a) = &results.attractivity {
        write_with(&dir.join("attractivity.csv"), |w| {
            writeln!(w, "t,distance")?;
            for &(t, d) in &a.curve {
                writeln!(w, "{},{}", fmt17(t), fmt17(d))?;
            }
            Ok(())
        })?;
        written.push("attractivity.csv");
    }
    if let Some(f) = &results.fixed_point {
        write_with(&dir.join("fixedpoint.csv"), |w| f.result.pair.write_csv(w))?;
        written.push("fixedpoint.csv");
    }
    Ok(written)
}

/// Gnuplot commands drawing each CSV in `series` (paths relative to the script).
pub fn plot_script(series: &[&str]) -> String {
    let mut s = String::from("# gnuplot script; run from this directory with `gnuplot plot.gp`\n");
    s.push_str("set datafile separator ','\nset terminal pngcairo size 1000,600\nset key autotitle columnhead\n");
    for &name in series {
        let stem = name.trim_end_matches(".csv");
        s.push_str(&format!("\nset output '{stem}.png'\nset xlabel 't'\n"));
        match name {
            "trajectories.csv" => s.push_str(&format!(
                "set title 'Prey and predator'\nplot '{name}' using 1:2 with lines, '{name}' using 1:3 with lines\n"
            )),
            "attractivity.csv" => s.push_str(&format!(
                "set title 'Distance between two solutions'\nset logscale y\nplot '{name}' using 1:2 with lines\nunset logscale y\n"
            )),
            "fixedpoint.csv" => s.push_str(&format!(
                "set title 'Final operator iterate'\nplot '{name}' using 1:2 with lines, '{name}' using 1:3 with lines\n"
            )),
            _ => s.push_str(&format!("plot '{name}' using 1:2 with lines\n")),
        }
    }
    s
}

/// Writes report.json, the CSV series and plot.gp into `dir`; returns their paths.
pub fn write_outputs(
    results: &RunResults,
    dir: &Path,
    timestamp_unix: u64,
) -> Result<Vec<PathBuf>, CliError> {
    let report = build_report(results, timestamp_unix);
    let series = write_series(results, dir)?;
    let report_path = dir.join("report.json");
    fs::write(&report_path, report.to_json()).map_err(|e| CliError::io(&report_path, e))?;
    let plot_path = dir.join("plot.gp");
    fs::write(&plot_path, plot_script(&series)).map_err(|e| CliError::io(&plot_path, e))?;
    let mut paths = vec![report_path];
    paths.extend(series.iter().map(|s| dir.join(s)));
    paths.push(plot_path);
    Ok(paths)
}
