//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use lgdelay::{
    BetaDenominator, Coefficient, CoefficientExpr, HistoryComponent, InitialHistory, ModelSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A coefficient or history entry: a number or an expression in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprValue {
    Number(f64),
    Text(String),
}

impl ExprValue {
    fn parse(&self, pointer: &str) -> Result<CoefficientExpr, CliError> {
        match self {
            ExprValue::Number(x) => Ok(CoefficientExpr::constant(*x)),
            ExprValue::Text(s) => CoefficientExpr::parse(s).map_err(|e| CliError::Config {
                pointer: pointer.to_string(),
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryConfig {
    pub phi1: ExprValue,
    pub phi2: ExprValue,
}

impl HistoryConfig {
    pub fn constant(u: f64, v: f64) -> Self {
        HistoryConfig {
            phi1: ExprValue::Number(u),
            phi2: ExprValue::Number(v),
        }
    }

    pub fn build(&self, pointer: &str) -> Result<InitialHistory, CliError> {
        let component = |v: &ExprValue, name: &str| -> Result<HistoryComponent, CliError> {
            Ok(match v {
                ExprValue::Number(x) => HistoryComponent::Constant(*x),
                ExprValue::Text(_) => {
                    HistoryComponent::Expr(v.parse(&format!("{pointer}/{name}"))?)
                }
            })
        };
        Ok(InitialHistory {
            phi1: component(&self.phi1, "phi1")?,
            phi2: component(&self.phi2, "phi2")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub h: f64,
    pub t_settle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    #[serde(default)]
    pub bounds: bool,
    #[serde(default)]
    pub stability: bool,
    #[serde(default)]
    pub attractivity: bool,
    #[serde(default)]
    pub fixed_point: bool,
    #[serde(default)]
    pub pap: bool,
}

impl Analyses {
    pub const ALL: Analyses = Analyses {
        bounds: true,
        stability: true,
        attractivity: true,
        fixed_point: true,
        pap: true,
    };
    pub const NONE: Analyses = Analyses {
        bounds: false,
        stability: false,
        attractivity: false,
        fixed_point: false,
        pap: false,
    };

    pub fn any(&self) -> bool {
        self.bounds || self.stability || self.attractivity || self.fixed_point || self.pap
    }
}

fn default_one_thousand() -> f64 {
    1000.0
}
fn default_bounds_samples() -> usize {
    1_000_000
}
fn default_liminf_end() -> f64 {
    500.0
}
fn default_liminf_samples() -> usize {
    2000
}
fn default_fp_grid() -> [f64; 2] {
    [0.0, 2000.0]
}
fn default_fp_h() -> f64 {
    0.05
}
fn default_quad_step() -> f64 {
    0.025
}
fn default_tail_tol() -> f64 {
    1e-6
}
fn default_cross_window() -> [f64; 2] {
    [300.0, 500.0]
}

/// Horizons and resolutions of the individual analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizons {
    #[serde(default = "default_one_thousand")]
    pub bounds: f64,
    #[serde(default = "default_bounds_samples")]
    pub bounds_samples: usize,
    /// `T1` of the liminf tail `[T1 / 2, T1]`.
    #[serde(default = "default_liminf_end")]
    pub liminf: f64,
    #[serde(default = "default_liminf_samples")]
    pub liminf_samples: usize,
    #[serde(default = "default_fp_grid")]
    pub fixed_point_grid: [f64; 2],
    #[serde(default = "default_fp_h")]
    pub fixed_point_h: f64,
    #[serde(default = "default_quad_step")]
    pub quad_step: f64,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Window on which the fixed point is compared with a long trajectory.
    #[serde(default = "default_cross_window")]
    pub cross_window: [f64; 2],
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons {
            bounds: default_one_thousand(),
            bounds_samples: default_bounds_samples(),
            liminf: default_liminf_end(),
            liminf_samples: default_liminf_samples(),
            fixed_point_grid: default_fp_grid(),
            fixed_point_h: default_fp_h(),
            quad_step: default_quad_step(),
            tail_tol: default_tail_tol(),
            cross_window: default_cross_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BetaDenominatorConfig {
    #[default]
    M1,
    M2,
}

impl From<BetaDenominatorConfig> for BetaDenominator {
    fn from(d: BetaDenominatorConfig) -> Self {
        match d {
            BetaDenominatorConfig::M1 => BetaDenominator::M1,
            BetaDenominatorConfig::M2 => BetaDenominator::M2,
        }
    }
}

fn default_slack() -> f64 {
    0.05
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    200
}
fn default_threshold() -> f64 {
    1e-3
}
fn default_second_history() -> HistoryConfig {
    HistoryConfig::constant(0.75, 0.75)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default)]
    pub beta_denominator: BetaDenominatorConfig,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Picard update tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Attractivity pass threshold on the final distance.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// History of the second solution in the attractivity experiment.
    #[serde(default = "default_second_history")]
    pub second_history: HistoryConfig,
    #[serde(default)]
    pub horizons: Horizons,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            beta_denominator: BetaDenominatorConfig::default(),
            slack: default_slack(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            threshold: default_threshold(),
            second_history: default_second_history(),
            horizons: Horizons::default(),
        }
    }
}

/// A tabulated extreme; delays may give only the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inf: Option<f64>,
    pub sup: f64,
}

/// A reference scalar; `decimals` is the number of digits it was rounded to
/// (absent for exact claims such as `0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportedValue {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimals: Option<u32>,
}

pub const REPORTED_KEYS: [&str; 6] = ["alpha_inf", "beta_inf", "M1", "m1", "M2", "m2"];

/// Reference material a run is audited against.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    #[serde(default)]
    pub table: BTreeMap<String, TableEntry>,
    #[serde(default)]
    pub reported: BTreeMap<String, ReportedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: BTreeMap<String, ExprValue>,
    pub history: HistoryConfig,
    pub run: RunSection,
    pub analyses: Analyses,
    #[serde(default)]
    pub options: Options,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config {
                pointer: json_pointer(&path),
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parses the coefficients, naming the offending key on failure.
    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        for key in self.model.keys() {
            if Coefficient::from_name(key).is_none() {
                return Err(CliError::Config {
                    pointer: format!("/model/{key}"),
                    message: format!("unknown coefficient `model.{key}`"),
                });
            }
        }
        let mut parsed = Vec::with_capacity(11);
        for c in Coefficient::ALL {
            let value = self.model.get(c.name()).ok_or_else(|| CliError::Config {
                pointer: format!("/model/{}", c.name()),
                message: format!("missing coefficient `model.{}`", c.name()),
            })?;
            parsed.push((c, value.parse(&format!("/model/{}", c.name()))?));
        }
        Ok(ModelSpec::from_exprs(parsed)?)
    }

    /// Checks the scalar run parameters.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |pointer: &str, message: String| {
            Err(CliError::Config {
                pointer: pointer.into(),
                message,
            })
        };
        let r = &self.run;
        if !(r.h > 0.0 && r.h.is_finite()) {
            return bad("/run/h", format!("step must be positive, got {}", r.h));
        }
        if !(r.t_end > r.t0) {
            return bad(
                "/run/t_end",
                format!("t_end = {} must exceed t0 = {}", r.t_end, r.t0),
            );
        }
        if !(r.t_settle >= r.t0 && r.t_settle < r.t_end) {
            return bad(
                "/run/t_settle",
                format!("t_settle = {} must lie in [t0, t_end)", r.t_settle),
            );
        }
        if let Some(reference) = &self.reference {
            for key in reference.table.keys() {
                if Coefficient::from_name(key).is_none() {
                    return bad(
                        &format!("/reference/table/{key}"),
                        format!("unknown coefficient `{key}`"),
                    );
                }
            }
            for key in reference.reported.keys() {
                if !REPORTED_KEYS.contains(&key.as_str()) {
                    return bad(
                        &format!("/reference/reported/{key}"),
                        format!("unknown quantity `{key}`; expected one of {REPORTED_KEYS:?}"),
                    );
                }
            }
        }
        Ok(())
    }
}

/// `model.c2` / `run.h` / `x[3]` style paths to JSON pointers.
fn json_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let mut rest = part;
        while let Some(open) = rest.find('[') {
            if open > 0 {
                out.push('/');
                out.push_str(&rest[..open]);
            }
            let close = rest[open..]
                .find(']')
                .map(|c| c + open)
                .unwrap_or(rest.len() - 1);
            out.push('/');
            out.push_str(&rest[open + 1..close]);
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}
