//! Attractivity coefficients `alpha(t)`, `beta(t)` and empirical convergence of
//! solution pairs.
//!
//! Both coefficients combine the permanence bounds with the lag inverse gaps
//! `zeta_i^{-1}(t) - t` and `varsigma_i^{-1}(t) - t`, where
//! `zeta_i(t) = t - tau_i(t)` and `varsigma_i(t) = t - sigma_i(t)`.
//! If both have a positive lower limit, all positive solutions attract each other.

use crate::error::{Error, Result};
use crate::expr::CoefficientExpr;
use crate::integrator::{integrate, Trajectory};
use crate::model::{Coefficient, InitialHistory, ModelSpec};
use crate::permanence::PermanenceBounds;
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Number of samples used to certify that `s - delay(s)` increases on the bracket.
const MONOTONE_SAMPLES: usize = 64;

/// `s* - t` where `s* - delay(s*) = t`.
///
/// Constant delays return the constant itself. Otherwise the root is bracketed
/// on `[t, t + delay(t) + ...]` and bisected down to adjacent floating-point values.
pub fn lag_inverse_gap<T: Scalar>(delay: &CoefficientExpr, t: T) -> Result<T> {
    if let Some(c) = delay.as_constant() {
        return Ok(lit(c));
    }
    let theta = |s: T| -> Result<T> { Ok(s - delay.evaluate(s)?) };

    let lo = t;
    let theta_lo = theta(lo)?;
    if theta_lo > t {
        return Err(Error::InvalidArgument(format!(
            "delay is negative at t = {t}; the lag map has no inverse gap"
        )));
    }
    let mut step = delay.evaluate(t)?.abs().max(lit(1e-3));
    let mut hi = t + step;
    let mut theta_hi = theta(hi)?;
    let mut prev = theta_lo;
    let mut expansions = 0;
    while theta_hi < t {
        if theta_hi <= prev || expansions > 60 {
            return Err(Error::NonMonotoneLag { s: to_f64(hi) });
        }
        prev = theta_hi;
        step = step + step;
        hi = hi + step;
        theta_hi = theta(hi)?;
        expansions += 1;
    }

    let n = from_usize::<T>(MONOTONE_SAMPLES);
    let mut last = theta_lo;
    for k in 1..=MONOTONE_SAMPLES {
        let s = lo + (hi - lo) * from_usize::<T>(k) / n;
        let th = theta(s)?;
        if th <= last {
            return Err(Error::NonMonotoneLag { s: to_f64(s) });
        }
        last = th;
    }

    let (mut a, mut b) = (lo, hi);
    loop {
        let mid = a + (b - a) / lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if theta(mid)? < t {
            a = mid;
        } else {
            b = mid;
        }
    }
    let s = if (theta(a)? - t).abs() <= (theta(b)? - t).abs() {
        a
    } else {
        b
    };
    Ok(s - t)
}

/// The four lag inverse gaps at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagGaps<T> {
    pub tau1: T,
    pub tau2: T,
    pub sigma1: T,
    pub sigma2: T,
}

pub fn lag_gaps<T: Scalar>(spec: &ModelSpec, t: T) -> Result<LagGaps<T>> {
    Ok(LagGaps {
        tau1: lag_inverse_gap(spec.get(Coefficient::Tau1), t)?,
        tau2: lag_inverse_gap(spec.get(Coefficient::Tau2), t)?,
        sigma1: lag_inverse_gap(spec.get(Coefficient::Sigma1), t)?,
        sigma2: lag_inverse_gap(spec.get(Coefficient::Sigma2), t)?,
    })
}

/// Which upper bound enters the leading predator self-limitation term
/// `c2^i / (D + k2^s)` of `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaDenominator {
    /// `D = M1`, the prey bound that the Lyapunov estimate produces.
    #[default]
    M1,
    /// `D = M2`.
    M2,
}

impl BetaDenominator {
    pub fn as_str(self) -> &'static str {
        match self {
            BetaDenominator::M1 => "M1",
            BetaDenominator::M2 => "M2",
        }
    }
}

impl std::str::FromStr for BetaDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M1" => Ok(BetaDenominator::M1),
            "M2" => Ok(BetaDenominator::M2),
            other => Err(Error::InvalidArgument(format!(
                "beta denominator must be \"M1\" or \"M2\", got {other:?}"
            ))),
        }
    }
}

/// `alpha` and `beta` for given gaps.
pub fn alpha_beta_from_gaps<T: Scalar>(
    bounds: &PermanenceBounds<T>,
    gaps: &LagGaps<T>,
    denominator: BetaDenominator,
) -> (T, T) {
    let p = &bounds.inputs;
    let (big_m1, big_m2, m1) = (bounds.prey_max, bounds.predator_max, bounds.prey_min);
    let (c1s, c2s, c2i) = (p.c1_sup, p.c2_sup, p.c2_inf);
    let (a1s, a2s, bs, bi) = (p.a1_sup, p.a2_sup, p.b_sup, p.b_inf);
    let two: T = lit(2.0);
    let q1 = m1 + p.k1_inf;
    let q2 = m1 + p.k2_inf;
    let m2sq = big_m2 * big_m2;

    let alpha = bi
        - c1s * big_m2 / (q1 * q1)
        - c2s * big_m2 / (q2 * q2)
        - c1s * c2s * m2sq / (q1 * q2 * q2) * gaps.tau1
        - (c1s * a1s * big_m2 / (q1 * q1)
            + two * c1s * bs * big_m1 * big_m2 / (q1 * q1)
            + c1s * c1s * m2sq / q1.powi(3)
            + c1s * c1s * big_m1 * m2sq / q1.powi(4))
            * gaps.sigma1
        - (c2s * c2s * m2sq / q2.powi(3)
            + two * c2s * bs * big_m1 * big_m2 / (q2 * q2)
            + c2s * c1s * m2sq / (q2 * q2 * q1 * q1)
            + c2s * a1s * big_m2 / (q2 * q2))
            * gaps.sigma2;

    let d = match denominator {
        BetaDenominator::M1 => big_m1,
        BetaDenominator::M2 => big_m2,
    };
    let beta = c2i / (d + p.k2_sup)
        - c1s / q1
        - c1s / q1 * (a2s + c2s * big_m2 / q2 + c1s * c2s * big_m2 / (q1 * q2)) * gaps.tau1
        - c1s * c1s * big_m1 * big_m2 / q1.powi(3) * gaps.sigma1
        - (c2s * a2s / q2 + two * c2s * c2s * big_m2 / (q2 * q2)) * gaps.tau2
        - (c2s * big_m1 * big_m2 / (q2 * q2 * q1)
            + c2s * c1s * big_m1 * m2sq / (q2 * q2 * q1 * q1))
            * gaps.sigma2;
    (alpha, beta)
}

pub fn eval_alpha_beta<T: Scalar>(
    spec: &ModelSpec,
    bounds: &PermanenceBounds<T>,
    t: T,
    denominator: BetaDenominator,
) -> Result<(T, T)> {
    Ok(alpha_beta_from_gaps(
        bounds,
        &lag_gaps(spec, t)?,
        denominator,
    ))
}

/// `n + 1` equispaced points on `[t0, t1]`.
pub fn uniform_grid<T: Scalar>(t0: T, t1: T, n: usize) -> Vec<T> {
    let n = n.max(1);
    (0..=n)
        .map(|k| t0 + (t1 - t0) * from_usize::<T>(k) / from_usize::<T>(n))
        .collect()
}

/// Sampled coefficients and their tail minima.
#[derive(Debug, Clone, PartialEq)]
pub struct LiminfEstimate<T> {
    /// `(t, alpha(t), beta(t))` over the whole grid.
    pub samples: Vec<(T, T, T)>,
    pub alpha_liminf: T,
    pub beta_liminf: T,
    /// The tail `[T1 / 2, T1]` the minima were taken over.
    pub tail_start: T,
    pub tail_end: T,
}

/// Minimum of the samples over the tail `[T1 / 2, T1]` of a grid ending at `T1`.
pub fn estimate_liminf<T: Scalar>(
    spec: &ModelSpec,
    bounds: &PermanenceBounds<T>,
    t_grid: &[T],
    denominator: BetaDenominator,
) -> Result<LiminfEstimate<T>> {
    use rayon::prelude::*;
    let t1 = *t_grid
        .last()
        .ok_or_else(|| Error::InvalidArgument("liminf grid is empty".into()))?;
    let samples = t_grid
        .par_iter()
        .map(|&t| eval_alpha_beta(spec, bounds, t, denominator).map(|(a, b)| (t, a, b)))
        .collect::<Result<Vec<_>>>()?;
    let tail_start = t1 / lit(2.0);
    let (mut alpha_liminf, mut beta_liminf) = (T::infinity(), T::infinity());
    for &(t, a, b) in samples.iter().filter(|s| s.0 >= tail_start) {
        debug_assert!(t <= t1);
        alpha_liminf = alpha_liminf.min(a);
        beta_liminf = beta_liminf.min(b);
    }
    if !alpha_liminf.is_finite() {
        // The whole grid precedes T1 / 2 only when it is a single negative point.
        let &(_, a, b) = samples.last().expect("nonempty");
        alpha_liminf = a;
        beta_liminf = b;
    }
    Ok(LiminfEstimate {
        samples,
        alpha_liminf,
        beta_liminf,
        tail_start,
        tail_end: t1,
    })
}

/// Distance curve between two solutions and its verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractivityResult<T> {
    /// `(t, |u_a - u_b| + |v_a - v_b|)` at every knot.
    pub curve: Vec<(T, T)>,
    pub final_distance: T,
    /// Maxima of consecutive windows covering the last quarter of the run.
    pub window_maxima: Vec<T>,
    pub tail_nonincreasing: bool,
    pub threshold: T,
    pub passed: bool,
}

/// Number of windows the last quarter of a distance curve is split into.
pub const TAIL_WINDOWS: usize = 8;

/// Compares two trajectories on the same grid.
pub fn compare_trajectories<T: Scalar>(
    a: &Trajectory<T>,
    b: &Trajectory<T>,
    threshold: T,
) -> Result<AttractivityResult<T>> {
    if a.knots().len() != b.knots().len() || a.step() != b.step() || a.t0() != b.t0() {
        return Err(Error::InvalidArgument(
            "trajectories must share their grid".into(),
        ));
    }
    let curve: Vec<(T, T)> = a
        .knots()
        .iter()
        .zip(b.knots())
        .map(|(p, q)| (p.t, (p.u - q.u).abs() + (p.v - q.v).abs()))
        .collect();
    let final_distance = curve.last().map(|c| c.1).unwrap_or_else(T::zero);

    let start = curve.len() - curve.len() / 4;
    let tail = &curve[start..];
    let window_maxima: Vec<T> = if tail.len() >= TAIL_WINDOWS {
        let width = tail.len() / TAIL_WINDOWS;
        (0..TAIL_WINDOWS)
            .map(|w| {
                let end = if w + 1 == TAIL_WINDOWS {
                    tail.len()
                } else {
                    (w + 1) * width
                };
                tail[w * width..end]
                    .iter()
                    .map(|c| c.1)
                    .fold(T::zero(), T::max)
            })
            .collect()
    } else {
        tail.iter().map(|c| c.1).collect()
    };
    let peak = window_maxima.iter().copied().fold(T::zero(), T::max);
    let noise = lit::<T>(1e-12) + lit::<T>(16.0) * T::epsilon() * peak;
    let tail_nonincreasing = window_maxima.windows(2).all(|w| w[1] <= w[0] + noise);
    Ok(AttractivityResult {
        passed: final_distance < threshold && tail_nonincreasing,
        curve,
        final_distance,
        window_maxima,
        tail_nonincreasing,
        threshold,
    })
}

/// Integrates both histories concurrently from `t0` and compares the solutions.
#[allow(clippy::too_many_arguments)]
pub fn run_attractivity<T: Scalar>(
    spec: &ModelSpec,
    history_a: &InitialHistory,
    history_b: &InitialHistory,
    t0: T,
    t_end: T,
    h: T,
    threshold: T,
) -> Result<AttractivityResult<T>> {
    let (a, b) = rayon::join(
        || integrate(spec, history_a, t0, t_end, h),
        || integrate(spec, history_b, t0, t_end, h),
    );
    compare_trajectories(&a?, &b?, threshold)
}

/// Everything the stability analysis produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub liminf: LiminfEstimate<T>,
    pub denominator: BetaDenominator,
    pub hypothesis_holds: bool,
    pub attractivity: Vec<AttractivityResult<T>>,
}

impl<T: Scalar> StabilityReport<T> {
    pub fn new(
        liminf: LiminfEstimate<T>,
        denominator: BetaDenominator,
        attractivity: Vec<AttractivityResult<T>>,
    ) -> Self {
        let hypothesis_holds = liminf.alpha_liminf > T::zero() && liminf.beta_liminf > T::zero();
        StabilityReport {
            liminf,
            denominator,
            hypothesis_holds,
            attractivity,
        }
    }
}
