//! The delayed predator-prey system: coefficients, initial history and right-hand side.
//!
//! ```text
//! u'(t) = (a1(t) - b(t) u(t) - c1(t) v(t - tau1(t)) / (u(t - sigma1(t)) + k1(t))) u(t)
//! v'(t) = (a2(t) - c2(t) v(t - tau2(t)) / (u(t - sigma2(t)) + k2(t))) v(t)
//! ```

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{estimate_bounds, BoundsEstimate, CoefficientExpr, ExprError};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coefficient {
    A1,
    A2,
    B,
    C1,
    C2,
    K1,
    K2,
    Tau1,
    Tau2,
    Sigma1,
    Sigma2,
}

impl Coefficient {
    pub const ALL: [Coefficient; 11] = [
        Coefficient::A1,
        Coefficient::A2,
        Coefficient::B,
        Coefficient::C1,
        Coefficient::C2,
        Coefficient::K1,
        Coefficient::K2,
        Coefficient::Tau1,
        Coefficient::Tau2,
        Coefficient::Sigma1,
        Coefficient::Sigma2,
    ];

    pub const DELAYS: [Coefficient; 4] = [
        Coefficient::Tau1,
        Coefficient::Tau2,
        Coefficient::Sigma1,
        Coefficient::Sigma2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coefficient::A1 => "a1",
            Coefficient::A2 => "a2",
            Coefficient::B => "b",
            Coefficient::C1 => "c1",
            Coefficient::C2 => "c2",
            Coefficient::K1 => "k1",
            Coefficient::K2 => "k2",
            Coefficient::Tau1 => "tau1",
            Coefficient::Tau2 => "tau2",
            Coefficient::Sigma1 => "sigma1",
            Coefficient::Sigma2 => "sigma2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn is_delay(self) -> bool {
        Self::DELAYS.contains(&self)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The eleven coefficient functions of the system. `b` doubles as the `b1`
/// that appears in the attractivity coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    coeffs: [CoefficientExpr; 11],
}

/// Non-delay coefficient values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub a1: T,
    pub a2: T,
    pub b: T,
    pub c1: T,
    pub c2: T,
    pub k1: T,
    pub k2: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays<T> {
    pub tau1: T,
    pub tau2: T,
    pub sigma1: T,
    pub sigma2: T,
}

/// The four delayed state values entering the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedState<T> {
    pub u_sigma1: T,
    pub u_sigma2: T,
    pub v_tau1: T,
    pub v_tau2: T,
}

impl<T: Scalar> DelayedState<T> {
    /// Every delayed argument set to the current state.
    pub fn frozen(u: T, v: T) -> Self {
        DelayedState {
            u_sigma1: u,
            u_sigma2: u,
            v_tau1: v,
            v_tau2: v,
        }
    }
}

impl ModelSpec {
    /// Builds a spec from `(name, expression)` pairs; all eleven names are required.
    pub fn from_exprs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Coefficient, CoefficientExpr)>,
    {
        let mut slots: [Option<CoefficientExpr>; 11] = Default::default();
        for (c, e) in pairs {
            slots[c.index()] = Some(e);
        }
        let mut missing = Vec::new();
        for c in Coefficient::ALL {
            if slots[c.index()].is_none() {
                missing.push(c.name());
            }
        }
        if !missing.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "missing coefficients: {}",
                missing.join(", ")
            )));
        }
        Ok(ModelSpec {
            coeffs: slots.map(|s| s.expect("checked above")),
        })
    }

    /// Parses every coefficient from its source text.
    pub fn parse<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Coefficient, &'a str)>,
    {
        let mut exprs = Vec::new();
        for (c, text) in pairs {
            exprs.push((c, CoefficientExpr::parse(text)?));
        }
        Self::from_exprs(exprs)
    }

    /// All coefficients constant.
    pub fn constant(values: [(Coefficient, f64); 11]) -> Self {
        Self::from_exprs(values.map(|(c, v)| (c, CoefficientExpr::constant(v))))
            .expect("all eleven coefficients supplied")
    }

    pub fn get(&self, c: Coefficient) -> &CoefficientExpr {
        &self.coeffs[c.index()]
    }

    pub fn set(&mut self, c: Coefficient, expr: CoefficientExpr) {
        self.coeffs[c.index()] = expr;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Coefficient, &CoefficientExpr)> {
        Coefficient::ALL.into_iter().map(move |c| (c, self.get(c)))
    }

    fn value<T: Scalar>(&self, c: Coefficient, t: T) -> Result<T, ExprError> {
        self.coeffs[c.index()].evaluate(t)
    }

    pub fn rates_at<T: Scalar>(&self, t: T) -> Result<Rates<T>, ExprError> {
        Ok(Rates {
            a1: self.value(Coefficient::A1, t)?,
            a2: self.value(Coefficient::A2, t)?,
            b: self.value(Coefficient::B, t)?,
            c1: self.value(Coefficient::C1, t)?,
            c2: self.value(Coefficient::C2, t)?,
            k1: self.value(Coefficient::K1, t)?,
            k2: self.value(Coefficient::K2, t)?,
        })
    }

    pub fn delays_at<T: Scalar>(&self, t: T) -> Result<Delays<T>, ExprError> {
        Ok(Delays {
            tau1: self.value(Coefficient::Tau1, t)?,
            tau2: self.value(Coefficient::Tau2, t)?,
            sigma1: self.value(Coefficient::Sigma1, t)?,
            sigma2: self.value(Coefficient::Sigma2, t)?,
        })
    }
}

/// Per-capita growth rates `(u'/u, v'/v)`.
#[inline]
pub fn per_capita<T: Scalar>(r: &Rates<T>, u: T, delayed: &DelayedState<T>) -> (T, T) {
    let prey = r.a1 - r.b * u - r.c1 * delayed.v_tau1 / (delayed.u_sigma1 + r.k1);
    let predator = r.a2 - r.c2 * delayed.v_tau2 / (delayed.u_sigma2 + r.k2);
    (prey, predator)
}

/// Right-hand side `(u', v')` of the system at time `t`.
pub fn eval_rhs<T: Scalar>(
    spec: &ModelSpec,
    t: T,
    u: T,
    v: T,
    delayed: &DelayedState<T>,
) -> Result<(T, T), ExprError> {
    let rates = spec.rates_at(t)?;
    let (gu, gv) = per_capita(&rates, u, delayed);
    Ok((gu * u, gv * v))
}

/// Sampled bounds of every coefficient plus the lag extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub bounds: BTreeMap<Coefficient, BoundsEstimate<T>>,
    /// Largest delay over the grid.
    pub max_lag_r: T,
    /// Smallest delay over the grid; the integrator step may not exceed it.
    pub min_delay: T,
    pub horizon: T,
    pub samples: usize,
}

impl<T: Scalar> ValidationReport<T> {
    pub fn inf(&self, c: Coefficient) -> T {
        self.bounds[&c].inf_value
    }

    pub fn sup(&self, c: Coefficient) -> T {
        self.bounds[&c].sup_value
    }
}

fn first_nonpositive<T: Scalar>(
    expr: &CoefficientExpr,
    horizon: T,
    samples: usize,
) -> Result<Option<(T, T)>, ExprError> {
    let n = samples.max(2) - 1;
    for k in 0..=n {
        let t = horizon * from_usize::<T>(k) / from_usize::<T>(n);
        let v = expr.evaluate(t)?;
        if v <= T::zero() {
            return Ok(Some((t, v)));
        }
    }
    Ok(None)
}

/// Checks positivity of all coefficients on `[0, horizon]` and records their bounds.
pub fn validate_model<T: Scalar>(
    spec: &ModelSpec,
    horizon: T,
    samples: usize,
) -> Result<ValidationReport<T>> {
    if !(horizon > T::zero()) || samples < 2 {
        return Err(Error::InvalidArgument(
            "validation needs horizon > 0 and at least two samples".into(),
        ));
    }
    let per_coeff: Vec<Result<(Coefficient, BoundsEstimate<T>)>> = Coefficient::ALL
        .par_iter()
        .map(|&c| {
            let expr = spec.get(c);
            if let Some((t, v)) = first_nonpositive(expr, horizon, samples)? {
                return Err(Error::NonPositiveCoefficient {
                    name: c.name(),
                    t: to_f64(t),
                    value: to_f64(v),
                });
            }
            let b = estimate_bounds(expr, horizon, samples)?;
            if !(b.inf_value > T::zero()) {
                return Err(Error::NonPositiveCoefficient {
                    name: c.name(),
                    t: f64::NAN,
                    value: to_f64(b.inf_value),
                });
            }
            Ok((c, b))
        })
        .collect();

    let mut bounds = BTreeMap::new();
    for r in per_coeff {
        let (c, b) = r?;
        bounds.insert(c, b);
    }
    let max_lag_r = Coefficient::DELAYS
        .iter()
        .map(|c| bounds[c].sup_value)
        .fold(T::zero(), T::max);
    let min_delay = Coefficient::DELAYS
        .iter()
        .map(|c| bounds[c].inf_value)
        .fold(T::infinity(), T::min);
    Ok(ValidationReport {
        bounds,
        max_lag_r,
        min_delay,
        horizon,
        samples,
    })
}

/// One component of the initial history on `[-r, 0]`, as a function of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryComponent {
    Constant(f64),
    Expr(CoefficientExpr),
}

impl HistoryComponent {
    pub fn at<T: Scalar>(&self, theta: T) -> Result<T, ExprError> {
        match self {
            HistoryComponent::Constant(c) => Ok(lit(*c)),
            HistoryComponent::Expr(e) => e.evaluate(theta),
        }
    }
}

/// Initial data `(phi1, phi2)` on `[-r, 0]`; `theta = t - t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialHistory {
    pub phi1: HistoryComponent,
    pub phi2: HistoryComponent,
}

impl InitialHistory {
    pub fn constant(u: f64, v: f64) -> Self {
        InitialHistory {
            phi1: HistoryComponent::Constant(u),
            phi2: HistoryComponent::Constant(v),
        }
    }

    pub fn at<T: Scalar>(&self, theta: T) -> Result<(T, T), ExprError> {
        Ok((self.phi1.at(theta)?, self.phi2.at(theta)?))
    }

    /// `phi(0) > 0` and `phi >= 0` on a uniform grid of `[-r, 0]`.
    pub fn validate<T: Scalar>(&self, r: T, samples: usize) -> Result<()> {
        let (u0, v0) = self.at(T::zero())?;
        if !(u0 > T::zero() && v0 > T::zero()) {
            return Err(Error::InadmissibleHistory(format!(
                "phi(0) = ({u0}, {v0}) must be strictly positive"
            )));
        }
        let n = samples.max(2) - 1;
        for k in 0..=n {
            let theta = -r * from_usize::<T>(k) / from_usize::<T>(n);
            let (u, v) = self.at(theta)?;
            if u < T::zero() || v < T::zero() {
                return Err(Error::InadmissibleHistory(format!(
                    "phi({theta}) = ({u}, {v}) is negative"
                )));
            }
        }
        Ok(())
    }
}
