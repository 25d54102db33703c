//! Numerical evidence for almost periodic and ergodic (mean-zero) behaviour.
//!
//! None of these tests can decide membership in a function class from finite
//! data. Verdicts are reported with an explicit `Inconclusive` outcome.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::simpson;
use crate::scalar::{from_usize, lit, Scalar};

/// Integration window of an ergodic mean with half-width `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window<T> {
    /// `[-T, T]`.
    Symmetric,
    /// `[start, start + 2T]`, for functions only known on a half-line.
    Shifted { start: T },
}

impl<T: Scalar> Window<T> {
    pub fn interval(&self, half_width: T) -> (T, T) {
        match *self {
            Window::Symmetric => (-half_width, half_width),
            Window::Shifted { start } => (start, start + half_width + half_width),
        }
    }
}

/// `(1 / 2T) * integral of |f|` over the window, by composite Simpson with `n` panels.
pub fn ergodic_mean<T, F>(f: F, half_width: T, n: usize, window: Window<T>) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> Result<T>,
{
    if !(half_width > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "ergodic mean needs T > 0, got {half_width}"
        )));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Simpson needs an even panel count, got {n}"
        )));
    }
    let (a, b) = window.interval(half_width);
    let integral = simpson(|t| f(t).map(T::abs), a, b, n)?;
    Ok(integral / (half_width + half_width))
}

/// `max |f(t + tau) - f(t)|` over `grid`.
pub fn shift_defect<T, F>(f: F, tau: T, grid: &[T]) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> Result<T>,
{
    let mut worst = T::zero();
    for &t in grid {
        worst = worst.max((f(t + tau)? - f(t)?).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearPeriod<T> {
    pub tau: T,
    pub defect: T,
}

/// Scans `tau = tau_lo, tau_lo + step, ...` up to `tau_hi` and returns the
/// shift with the smallest defect, together with whether it is below `eps`.
pub fn find_near_period<T, F>(
    f: F,
    eps: T,
    tau_lo: T,
    tau_hi: T,
    step: T,
    grid: &[T],
) -> Result<(NearPeriod<T>, bool)>
where
    T: Scalar,
    F: Fn(T) -> Result<T> + Sync,
{
    if !(step > T::zero()) || !(tau_hi >= tau_lo) {
        return Err(Error::InvalidArgument(
            "near-period scan needs step > 0 and tau_hi >= tau_lo".into(),
        ));
    }
    let count = ((tau_hi - tau_lo) / step).floor().to_usize().unwrap_or(0) + 1;
    let best = (0..count)
        .into_par_iter()
        .map(|k| {
            let tau = tau_lo + from_usize::<T>(k) * step;
            shift_defect(&f, tau, grid).map(|defect| NearPeriod { tau, defect })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(None::<NearPeriod<T>>, |acc, p| match acc {
            Some(a) if a.defect <= p.defect => Some(a),
            _ => Some(p),
        })
        .expect("at least one shift");
    Ok((best, best.defect < eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Vanishing,
    NonVanishing,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Vanishing => "vanishing",
            Verdict::NonVanishing => "non-vanishing",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// The last mean must drop below this fraction of the first for `Vanishing`.
pub const VANISHING_RATIO: f64 = 0.1;
/// Means stabilizing above this absolute level count as `NonVanishing`.
pub const NON_VANISHING_FLOOR: f64 = 1e-3;
/// Relative change between the last two means accepted as "stabilized".
pub const STABLE_CHANGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport<T> {
    /// `(T, mean)` per entry.
    pub means: Vec<(T, T)>,
    pub verdict: Verdict,
}

/// Classifies the ergodic means over increasing half-widths.
pub fn classify_means<T: Scalar>(means: &[T]) -> Verdict {
    let (first, last) = match (means.first(), means.last()) {
        (Some(&f), Some(&l)) if means.len() >= 2 => (f, l),
        _ => return Verdict::Inconclusive,
    };
    if first > T::zero() && last < lit::<T>(VANISHING_RATIO) * first {
        return Verdict::Vanishing;
    }
    let prev = means[means.len() - 2];
    let floor = lit::<T>(NON_VANISHING_FLOOR);
    if last > floor && prev > floor && (last - prev).abs() <= lit::<T>(STABLE_CHANGE) * last {
        return Verdict::NonVanishing;
    }
    Verdict::Inconclusive
}

/// Ergodic means at each half-width in `t_list` (with `panels_per_unit`
/// Simpson panels per unit length) and their verdict.
pub fn pap0_trend<T, F>(
    f: F,
    t_list: &[T],
    panels_per_unit: f64,
    window: Window<T>,
) -> Result<TrendReport<T>>
where
    T: Scalar,
    F: Fn(T) -> Result<T> + Sync,
{
    if t_list.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "trend needs at least 3 half-widths, got {}",
            t_list.len()
        )));
    }
    if t_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("half-widths must increase".into()));
    }
    let means = t_list
        .par_iter()
        .map(|&big_t| {
            let n = panel_count(big_t, panels_per_unit);
            ergodic_mean(&f, big_t, n, window).map(|m| (big_t, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = classify_means(&means.iter().map(|m| m.1).collect::<Vec<_>>());
    Ok(TrendReport { means, verdict })
}

/// Even panel count covering a window of length `2T` at the given density.
pub fn panel_count<T: Scalar>(half_width: T, panels_per_unit: f64) -> usize {
    let n = (crate::scalar::to_f64(half_width) * 2.0 * panels_per_unit).ceil() as usize;
    (n.max(2) + 1) & !1
}

/// Ergodic means, shift defects and a trend verdict for one function.
#[derive(Debug, Clone, PartialEq)]
pub struct PapReport<T> {
    pub ergodic_means: Vec<(T, T)>,
    /// `(tau, defect)` pairs.
    pub shift_defects: Vec<(T, T)>,
    pub trend_verdict: Verdict,
    pub window: Window<T>,
}
