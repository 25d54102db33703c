//! The integral operator whose fixed points are bounded solutions of the system,
//! its Picard iteration, and consistency checks.
//!
//! ```text
//! Y_j(phi, psi)(t) = integral_t^inf exp(-integral_t^s a_j) f_j(s) ds
//! f_1 = b phi^2 + c1 psi(s - tau1) phi / (phi(s - sigma1) + k1)
//! f_2 = c2 psi(s - tau2) psi / (phi(s - sigma2) + k2)
//! ```
//!
//! A fixed point satisfies `phi' = a1 phi - f_1` and `psi' = a2 psi - f_2`,
//! which is the original system.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::CoefficientExpr;
use crate::integrator::Trajectory;
use crate::model::{Coefficient, ModelSpec};
use crate::permanence::{CoefficientBounds, PermanenceBounds};
use crate::quadrature::{cumulative_simpson, simpson_samples};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::textfmt::fmt17;

/// Candidate `(u*, v*)` sampled on a uniform grid, with cubic interpolation
/// between nodes and constant continuation outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunctionPair<T> {
    t_lo: T,
    h: T,
    phi: Vec<T>,
    psi: Vec<T>,
}

impl<T: Scalar> GridFunctionPair<T> {
    pub fn new(t_lo: T, h: T, phi: Vec<T>, psi: Vec<T>) -> Result<Self> {
        if !(h > T::zero()) || phi.len() != psi.len() || phi.len() < 4 {
            return Err(Error::InvalidArgument(
                "grid pair needs h > 0 and two equal-length series of at least 4 points".into(),
            ));
        }
        Ok(GridFunctionPair { t_lo, h, phi, psi })
    }

    /// Samples `f(t) -> (phi, psi)` on the grid `t_lo, t_lo + h, ..., t_hi`.
    pub fn from_fn<F>(t_lo: T, t_hi: T, h: T, f: F) -> Result<Self>
    where
        F: Fn(T) -> Result<(T, T)>,
    {
        let n = ((t_hi - t_lo) / h).round().to_usize().unwrap_or(0);
        let (mut phi, mut psi) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        for i in 0..=n {
            let (p, q) = f(t_lo + from_usize::<T>(i) * h)?;
            phi.push(p);
            psi.push(q);
        }
        Self::new(t_lo, h, phi, psi)
    }

    pub fn constant(t_lo: T, t_hi: T, h: T, phi: T, psi: T) -> Result<Self> {
        Self::from_fn(t_lo, t_hi, h, |_| Ok((phi, psi)))
    }

    /// Samples a trajectory at the grid nodes.
    pub fn from_trajectory(traj: &Trajectory<T>, t_lo: T, t_hi: T, h: T) -> Result<Self> {
        Self::from_fn(t_lo, t_hi, h, |t| traj.sample_state(t))
    }

    pub fn t_lo(&self) -> T {
        self.t_lo
    }

    pub fn t_hi(&self) -> T {
        self.time(self.phi.len() - 1)
    }

    pub fn step(&self) -> T {
        self.h
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn time(&self, i: usize) -> T {
        self.t_lo + from_usize::<T>(i) * self.h
    }

    /// Four-point Lagrange interpolation; the stencil shifts inward at the ends.
    pub fn at(&self, t: T) -> (T, T) {
        let last = self.phi.len() - 1;
        if t <= self.t_lo {
            return (self.phi[0], self.psi[0]);
        }
        if t >= self.t_hi() {
            return (self.phi[last], self.psi[last]);
        }
        let pos = (t - self.t_lo) / self.h;
        let i = pos.floor().to_usize().unwrap_or(0).min(last - 1);
        let frac = pos - from_usize::<T>(i);
        if frac == T::zero() {
            return (self.phi[i], self.psi[i]);
        }
        let base = i.saturating_sub(1).min(last - 3);
        let s = pos - from_usize::<T>(base);
        let one = T::one();
        let two: T = lit(2.0);
        let three: T = lit(3.0);
        let six: T = lit(6.0);
        let w = [
            -(s - one) * (s - two) * (s - three) / six,
            s * (s - two) * (s - three) / two,
            -s * (s - one) * (s - three) / two,
            s * (s - one) * (s - two) / six,
        ];
        let mut out = (T::zero(), T::zero());
        for (k, wk) in w.iter().enumerate() {
            out.0 = out.0 + *wk * self.phi[base + k];
            out.1 = out.1 + *wk * self.psi[base + k];
        }
        out
    }

    /// Whether every node lies in `[m1, M1] x [m2, M2]`.
    pub fn in_set(&self, bounds: &PermanenceBounds<T>) -> bool {
        self.phi
            .iter()
            .all(|&p| p >= bounds.prey_min && p <= bounds.prey_max)
            && self
                .psi
                .iter()
                .all(|&q| q >= bounds.predator_min && q <= bounds.predator_max)
    }

    /// Sup-norm distance over both components; grids must coincide.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.phi
            .iter()
            .zip(&other.phi)
            .chain(self.psi.iter().zip(&other.psi))
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// Largest value of either component, or NaN if any value is not finite.
    fn peak(&self) -> T {
        let mut peak = T::zero();
        for &x in self.phi.iter().chain(&self.psi) {
            if !x.is_finite() {
                return T::nan();
            }
            peak = peak.max(x.abs());
        }
        peak
    }

    /// CSV `t,u_star,v_star`, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,u_star,v_star")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{}",
                fmt17(self.time(i)),
                fmt17(self.phi[i]),
                fmt17(self.psi[i])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Prey,
    Predator,
}

/// Arguments of `f_j` at one instant `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FArgs<T> {
    /// `phi(s)`
    pub phi: T,
    /// `psi(s)`
    pub psi: T,
    /// `phi(s - sigma_j(s))`
    pub phi_sigma: T,
    /// `psi(s - tau_j(s))`
    pub psi_tau: T,
}

fn nonlinearity<T: Scalar>(spec: &ModelSpec, species: Species, s: T, x: &FArgs<T>) -> Result<T> {
    let value = |c: Coefficient| -> Result<T> { Ok(spec.get(c).evaluate(s)?) };
    match species {
        Species::Prey => {
            let den = x.phi_sigma + value(Coefficient::K1)?;
            if !(den > T::zero()) {
                return Err(Error::NonPositiveDenominator("f1 (phi(s - sigma1) + k1)"));
            }
            Ok(value(Coefficient::B)? * x.phi * x.phi
                + value(Coefficient::C1)? * x.psi_tau * x.phi / den)
        }
        Species::Predator => {
            let den = x.phi_sigma + value(Coefficient::K2)?;
            if !(den > T::zero()) {
                return Err(Error::NonPositiveDenominator("f2 (phi(s - sigma2) + k2)"));
            }
            Ok(value(Coefficient::C2)? * x.psi_tau * x.psi / den)
        }
    }
}

/// `f_1` or `f_2` evaluated literally.
pub fn eval_f<T: Scalar>(spec: &ModelSpec, species: Species, s: T, args: &FArgs<T>) -> Result<T> {
    nonlinearity(spec, species, s, args)
}

fn f_args<T: Scalar>(
    spec: &ModelSpec,
    pair: &GridFunctionPair<T>,
    species: Species,
    s: T,
) -> Result<FArgs<T>> {
    let (tau, sigma) = match species {
        Species::Prey => (Coefficient::Tau1, Coefficient::Sigma1),
        Species::Predator => (Coefficient::Tau2, Coefficient::Sigma2),
    };
    let (phi, psi) = pair.at(s);
    let phi_sigma = pair.at(s - spec.get(sigma).evaluate(s)?).0;
    let psi_tau = pair.at(s - spec.get(tau).evaluate(s)?).1;
    Ok(FArgs {
        phi,
        psi,
        phi_sigma,
        psi_tau,
    })
}

/// Coefficient extremes that bound the operator's kernel and integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorBounds<T> {
    pub a1_inf: T,
    pub a2_inf: T,
    pub b_sup: T,
    pub c1_sup: T,
    pub c2_sup: T,
    pub k1_inf: T,
    pub k2_inf: T,
}

impl<T: Scalar> OperatorBounds<T> {
    pub fn from_coefficients(b: &CoefficientBounds<T>) -> Self {
        use Coefficient::*;
        OperatorBounds {
            a1_inf: b.inf(A1),
            a2_inf: b.inf(A2),
            b_sup: b.sup(B),
            c1_sup: b.sup(C1),
            c2_sup: b.sup(C2),
            k1_inf: b.inf(K1),
            k2_inf: b.inf(K2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpsilonOptions<T> {
    /// Target quadrature spacing; the grid step is divided into a whole number of panels.
    pub quad_step: T,
    /// Allowed contribution of the truncated tail.
    pub tail_tol: T,
    /// Multiplies the tail length (1 for the nominal truncation).
    pub tail_factor: T,
}

impl<T: Scalar> UpsilonOptions<T> {
    pub fn new(quad_step: T, tail_tol: T) -> Self {
        UpsilonOptions {
            quad_step,
            tail_tol,
            tail_factor: T::one(),
        }
    }
}

/// Truncation lengths `L_j = ln(sup f_j / (a_j^i tol)) / a_j^i` for both components.
pub fn tail_lengths<T: Scalar>(
    pair: &GridFunctionPair<T>,
    ob: &OperatorBounds<T>,
    tail_tol: T,
) -> Result<(T, T)> {
    if !(ob.a1_inf > T::zero() && ob.a2_inf > T::zero()) {
        return Err(Error::NonPositiveDenominator("tail length (a_j^i)"));
    }
    if !(tail_tol > T::zero()) {
        return Err(Error::InvalidArgument(
            "tail tolerance must be positive".into(),
        ));
    }
    let max_abs = |v: &[T]| v.iter().map(|x| x.abs()).fold(T::zero(), T::max);
    let (pm, qm) = (max_abs(&pair.phi), max_abs(&pair.psi));
    let f1_sup = ob.b_sup * pm * pm + ob.c1_sup * qm * pm / ob.k1_inf;
    let f2_sup = ob.c2_sup * qm * qm / ob.k2_inf;
    let len = |f_sup: T, a: T| {
        let l = (f_sup / (a * tail_tol)).ln() / a;
        if l.is_finite() {
            l.max(T::zero())
        } else {
            T::zero()
        }
    };
    Ok((len(f1_sup, ob.a1_inf), len(f2_sup, ob.a2_inf)))
}

/// For each mesh node `k`, `integral_{s_k}^{s_K} exp(-(I(s) - I(s_k))) F(s) ds`
/// with `I` the running integral of the rate, by a backward Simpson recurrence.
fn discounted_tails<T: Scalar>(f: &[T], cum_rate: &[T], delta: T) -> Vec<T> {
    let n = f.len();
    let mut r = vec![T::zero(); n];
    if n < 3 {
        return r;
    }
    let last = n - 1;
    let third = delta / lit(3.0);
    let twelfth = delta / lit(12.0);
    let (four, five, eight): (T, T, T) = (lit(4.0), lit(5.0), lit(8.0));
    let w = |k: usize, j: usize| (cum_rate[k] - cum_rate[j]).exp() * f[j];
    let mut k = last;
    while k >= 2 {
        k -= 2;
        r[k] = third * (f[k] + four * w(k, k + 1) + w(k, k + 2))
            + (cum_rate[k] - cum_rate[k + 2]).exp() * r[k + 2];
    }
    // Nodes an odd number of panels before the end: one panel, then chain.
    let mut k = last as isize - 1;
    while k >= 0 {
        let ku = k as usize;
        r[ku] = if ku + 2 <= last {
            twelfth * (five * f[ku] + eight * w(ku, ku + 1) - w(ku, ku + 2))
                + (cum_rate[ku] - cum_rate[ku + 1]).exp() * r[ku + 1]
        } else {
            // Final panel [s_{K-1}, s_K] from the quadratic through the last three nodes.
            twelfth * (-w(ku, ku - 1) + eight * f[ku] + five * w(ku, ku + 1))
        };
        k -= 2;
    }
    r
}

/// One application of the operator on the grid of `pair`.
pub fn apply_upsilon<T: Scalar>(
    spec: &ModelSpec,
    pair: &GridFunctionPair<T>,
    ob: &OperatorBounds<T>,
    opts: &UpsilonOptions<T>,
) -> Result<GridFunctionPair<T>> {
    if !(opts.quad_step > T::zero()) {
        return Err(Error::InvalidArgument(
            "quadrature step must be positive".into(),
        ));
    }
    let (l1, l2) = tail_lengths(pair, ob, opts.tail_tol)?;
    let tail = l1.max(l2) * opts.tail_factor;
    let span = pair.t_hi() - pair.t_lo;
    if span < tail {
        return Err(Error::GridTooShort {
            span: to_f64(span),
            required: to_f64(tail),
        });
    }
    let m = (pair.h / opts.quad_step)
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let delta = pair.h / from_usize::<T>(m);
    // An even number of tail panels keeps t_hi, where the constant continuation
    // has a corner, on a Simpson pair boundary.
    let tail_panels = ((tail / delta).ceil().to_usize().unwrap_or(0).max(2) + 1) & !1;
    let nodes = (pair.len() - 1) * m + tail_panels + 1;

    let samples = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let s = pair.t_lo + from_usize::<T>(k) * delta;
            let f1 = nonlinearity(
                spec,
                Species::Prey,
                s,
                &f_args(spec, pair, Species::Prey, s)?,
            )?;
            let f2 = nonlinearity(
                spec,
                Species::Predator,
                s,
                &f_args(spec, pair, Species::Predator, s)?,
            )?;
            let a1: T = spec.get(Coefficient::A1).evaluate(s)?;
            let a2: T = spec.get(Coefficient::A2).evaluate(s)?;
            Ok((f1, f2, a1, a2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut f1, mut f2, mut a1, mut a2) = (
        Vec::with_capacity(nodes),
        Vec::with_capacity(nodes),
        Vec::with_capacity(nodes),
        Vec::with_capacity(nodes),
    );
    for (p, q, r, s) in samples {
        f1.push(p);
        f2.push(q);
        a1.push(r);
        a2.push(s);
    }
    let (r1, r2) = rayon::join(
        || discounted_tails(&f1, &cumulative_simpson(&a1, delta), delta),
        || discounted_tails(&f2, &cumulative_simpson(&a2, delta), delta),
    );
    let phi = (0..pair.len()).map(|i| r1[i * m]).collect();
    let psi = (0..pair.len()).map(|i| r2[i * m]).collect();
    GridFunctionPair::new(pair.t_lo, pair.h, phi, psi)
}

/// How a Picard run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Update below tolerance at a nontrivial pair.
    Converged,
    /// Update below tolerance, but a component collapsed to zero.
    Trivial,
    /// Some value became non-finite or grew beyond `BLOWUP` times the seed's peak.
    Diverged,
    MaxIterations,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::Trivial => "trivial",
            Outcome::Diverged => "diverged",
            Outcome::MaxIterations => "max_iterations",
        }
    }
}

/// Growth factor over the seed's peak that counts as divergence.
pub const BLOWUP: f64 = 1e3;
/// Peak below which a component counts as collapsed.
pub const COLLAPSE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult<T> {
    pub pair: GridFunctionPair<T>,
    pub iterations: usize,
    pub final_delta: T,
    /// Sup-norm update per iteration.
    pub deltas: Vec<T>,
    /// DDE residual of the final pair, when it is finite.
    pub residual: Option<T>,
    pub converged: bool,
    pub outcome: Outcome,
    /// Every iterate stayed in the supplied bounding box.
    pub stayed_in_set: Option<bool>,
}

/// Plain Picard iteration `x_{n+1} = Y(x_n)` until the update is at most `tol`.
#[allow(clippy::too_many_arguments)]
pub fn iterate_fixed_point<T: Scalar>(
    spec: &ModelSpec,
    seed: &GridFunctionPair<T>,
    ob: &OperatorBounds<T>,
    opts: &UpsilonOptions<T>,
    tol: T,
    max_iter: usize,
    set: Option<&PermanenceBounds<T>>,
) -> Result<FixedPointResult<T>> {
    let limit = lit::<T>(BLOWUP) * seed.peak().max(T::one());
    let mut current = seed.clone();
    let mut deltas = Vec::new();
    let mut stayed = set.map(|b| seed.in_set(b));
    let mut outcome = Outcome::MaxIterations;
    for _ in 0..max_iter {
        let next = apply_upsilon(spec, &current, ob, opts)?;
        let peak = next.peak();
        let delta = next.sup_distance(&current);
        deltas.push(delta);
        if let (Some(b), Some(flag)) = (set, stayed.as_mut()) {
            *flag = *flag && next.in_set(b);
        }
        current = next;
        if !(peak <= limit) || !delta.is_finite() {
            outcome = Outcome::Diverged;
            break;
        }
        if delta <= tol {
            let collapsed = |v: &[T]| v.iter().all(|x| x.abs() < lit(COLLAPSE));
            outcome = if collapsed(&current.phi) || collapsed(&current.psi) {
                Outcome::Trivial
            } else {
                Outcome::Converged
            };
            break;
        }
    }
    let residual = if outcome == Outcome::Diverged {
        None
    } else {
        dde_residual(spec, &current).ok()
    };
    Ok(FixedPointResult {
        iterations: deltas.len(),
        final_delta: deltas.last().copied().unwrap_or_else(T::zero),
        converged: matches!(outcome, Outcome::Converged | Outcome::Trivial),
        pair: current,
        deltas,
        residual,
        outcome,
        stayed_in_set: stayed,
    })
}

/// `max |phi' - rhs_u| + |psi' - rhs_v|` over interior nodes whose delayed
/// arguments stay on the grid; derivatives by central differences.
pub fn dde_residual<T: Scalar>(spec: &ModelSpec, pair: &GridFunctionPair<T>) -> Result<T> {
    let two_h = pair.h + pair.h;
    let mut worst: Option<T> = None;
    for i in 1..pair.len() - 1 {
        let t = pair.time(i);
        let d = spec.delays_at(t)?;
        let r = d.tau1.max(d.tau2).max(d.sigma1).max(d.sigma2);
        if t - r < pair.t_lo {
            continue;
        }
        let rates = spec.rates_at(t)?;
        let (phi, psi) = (pair.phi[i], pair.psi[i]);
        let dphi = (pair.phi[i + 1] - pair.phi[i - 1]) / two_h;
        let dpsi = (pair.psi[i + 1] - pair.psi[i - 1]) / two_h;
        let rhs_u = (rates.a1
            - rates.b * phi
            - rates.c1 * pair.at(t - d.tau1).1 / (pair.at(t - d.sigma1).0 + rates.k1))
            * phi;
        let rhs_v = (rates.a2
            - rates.c2 * pair.at(t - d.tau2).1 / (pair.at(t - d.sigma2).0 + rates.k2))
            * psi;
        let e = (dphi - rhs_u).abs() + (dpsi - rhs_v).abs();
        worst = Some(worst.map_or(e, |w| w.max(e)));
    }
    worst.ok_or_else(|| {
        Error::GridTooCoarse(format!(
            "no interior node of [{}, {}] has its delayed arguments on the grid",
            pair.t_lo,
            pair.t_hi()
        ))
    })
}

/// Both sides of the kernel identity for `exp(-integral a(. + alpha))` against `exp(-integral b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelIdentity<T> {
    pub lhs: T,
    pub rhs: T,
    pub gap: T,
}

/// ```text
/// exp(-int_s^t a(u+alpha) du) - exp(-int_s^t b(u) du)
///   = int_s^t exp(-int_r^t a(u+alpha) du) exp(-int_s^r b(u) du) (b(r) - a(r+alpha)) dr
/// ```
/// Every integral uses composite Simpson on `quad_n` panels (inner integrals cumulatively).
pub fn kernel_identity_with<T, A, B>(
    a: A,
    b: B,
    alpha: T,
    s: T,
    t: T,
    quad_n: usize,
) -> Result<KernelIdentity<T>>
where
    T: Scalar,
    A: Fn(T) -> Result<T>,
    B: Fn(T) -> Result<T>,
{
    if !(s < t) || quad_n < 2 || !quad_n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "kernel identity needs s < t and an even panel count".into(),
        ));
    }
    let h = (t - s) / from_usize::<T>(quad_n);
    let mut av = Vec::with_capacity(quad_n + 1);
    let mut bv = Vec::with_capacity(quad_n + 1);
    for k in 0..=quad_n {
        let r = s + from_usize::<T>(k) * h;
        av.push(a(r + alpha)?);
        bv.push(b(r)?);
    }
    let big_a = cumulative_simpson(&av, h);
    let big_b = cumulative_simpson(&bv, h);
    let (a_t, b_t) = (big_a[quad_n], big_b[quad_n]);
    let lhs = (-a_t).exp() - (-b_t).exp();
    let integrand: Vec<T> = (0..=quad_n)
        .map(|k| (big_a[k] - a_t).exp() * (-big_b[k]).exp() * (bv[k] - av[k]))
        .collect();
    let rhs = simpson_samples(&integrand, h);
    Ok(KernelIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

pub fn kernel_identity_check<T: Scalar>(
    a: &CoefficientExpr,
    b: &CoefficientExpr,
    alpha: T,
    s: T,
    t: T,
    quad_n: usize,
) -> Result<KernelIdentity<T>> {
    kernel_identity_with(
        |x| Ok(a.evaluate(x)?),
        |x| Ok(b.evaluate(x)?),
        alpha,
        s,
        t,
        quad_n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{example_two, unit_model};
    use crate::model::validate_model;
    use crate::permanence::{compute_permanence_bounds, PermanenceInputs};
    use std::f64::consts::E;

    fn unit_bounds() -> OperatorBounds<f64> {
        OperatorBounds {
            a1_inf: 1.0,
            a2_inf: 1.0,
            b_sup: 1.0,
            c1_sup: 1.0,
            c2_sup: 1.0,
            k1_inf: 1.0,
            k2_inf: 1.0,
        }
    }

    #[test]
    fn lagrange_is_exact_for_cubics() {
        let f = |t: f64| 0.5 * t * t * t - t + 2.0;
        let pair = GridFunctionPair::from_fn(0.0, 2.0, 0.25, |t| Ok((f(t), -f(t)))).unwrap();
        for t in [0.01, 0.3, 1.0, 1.13, 1.99] {
            let (p, q) = pair.at(t);
            assert!(
                (p - f(t)).abs() < 1e-12 && (q + f(t)).abs() < 1e-12,
                "t = {t}"
            );
        }
        assert_eq!(pair.at(-1.0).0, f(0.0));
        assert_eq!(pair.at(5.0).0, pair.phi()[pair.len() - 1]);
    }

    #[test]
    fn f_values() {
        let spec = unit_model(0.5);
        let ones = FArgs {
            phi: 1.0,
            psi: 1.0,
            phi_sigma: 1.0,
            psi_tau: 1.0,
        };
        assert_eq!(eval_f(&spec, Species::Prey, 0.0, &ones).unwrap(), 1.5);
        let no_predator = FArgs {
            psi: 0.0,
            psi_tau: 0.0,
            ..ones
        };
        assert_eq!(
            eval_f(&spec, Species::Predator, 0.0, &no_predator).unwrap(),
            0.0
        );
    }

    #[test]
    fn example_two_f_direct_substitution() {
        // b(0) = 8.68: f1 = 8.68 * 0.25 + 0.32 * 0.25 / 17.2 ; f2 = 3.6 * 0.25 / 6.2
        let half = FArgs {
            phi: 0.5,
            psi: 0.5,
            phi_sigma: 0.5,
            psi_tau: 0.5,
        };
        let f1: f64 = eval_f(&example_two(), Species::Prey, 0.0, &half).unwrap();
        let f2: f64 = eval_f(&example_two(), Species::Predator, 0.0, &half).unwrap();
        assert!((f1 - 2.174651162790698).abs() < 1e-12, "{f1}");
        assert!((f2 - 0.14516129032258066).abs() < 1e-12, "{f2}");
    }

    #[test]
    fn constant_closed_form() {
        let spec = unit_model(0.5);
        let pair = GridFunctionPair::constant(0.0, 40.0, 0.05, 1.0, 1.0).unwrap();
        let out = apply_upsilon(
            &spec,
            &pair,
            &unit_bounds(),
            &UpsilonOptions::new(0.025, 1e-8),
        )
        .unwrap();
        for i in 0..out.len() {
            assert!((out.phi()[i] - 1.5).abs() < 1e-6, "{}", out.phi()[i]);
            assert!((out.psi()[i] - 0.5).abs() < 1e-6, "{}", out.psi()[i]);
        }
    }

    #[test]
    fn zero_predator_maps_to_zero() {
        let spec = unit_model(0.5);
        let pair = GridFunctionPair::constant(0.0, 40.0, 0.05, 0.7, 0.0).unwrap();
        let out = apply_upsilon(
            &spec,
            &pair,
            &unit_bounds(),
            &UpsilonOptions::new(0.025, 1e-8),
        )
        .unwrap();
        assert!(out.psi().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn short_grid_rejected() {
        let spec = unit_model(0.5);
        let pair = GridFunctionPair::constant(0.0, 5.0, 0.05, 1.0, 1.0).unwrap();
        let err = apply_upsilon(
            &spec,
            &pair,
            &unit_bounds(),
            &UpsilonOptions::new(0.025, 1e-8),
        )
        .unwrap_err();
        assert!(matches!(err, Error::GridTooShort { .. }));
    }

    #[test]
    fn doubling_tail_is_within_tolerance() {
        let spec = unit_model(0.5);
        let pair = GridFunctionPair::from_fn(0.0, 60.0, 0.05, |t: f64| {
            Ok((1.0 + 0.3 * t.sin(), 0.6 + 0.2 * t.cos()))
        })
        .unwrap();
        let tol = 1e-6;
        let mut opts = UpsilonOptions::new(0.025, tol);
        let base = apply_upsilon(&spec, &pair, &unit_bounds(), &opts).unwrap();
        opts.tail_factor = 2.0;
        let doubled = apply_upsilon(&spec, &pair, &unit_bounds(), &opts).unwrap();
        let d = base.sup_distance(&doubled);
        let worst = (0..base.len())
            .max_by(|&i, &j| {
                (base.phi()[i] - doubled.phi()[i])
                    .abs()
                    .partial_cmp(&(base.phi()[j] - doubled.phi()[j]).abs())
                    .unwrap()
            })
            .unwrap();
        assert!(d < 2.0 * tol, "{d} at {worst} of {}", base.len());
    }

    #[test]
    fn unit_system_fixed_point() {
        // Fixed points of phi = phi^2 + psi phi / (phi + 1), psi = psi^2 / (phi + 1) are
        // (0, 0), (1, 0) and (0, 1); from below, Picard falls into (0, 0).
        let spec = unit_model(0.5);
        let ob = unit_bounds();
        let opts = UpsilonOptions::new(0.025, 1e-9);
        let seed = GridFunctionPair::constant(0.0, 40.0, 0.05, 0.0, 0.0).unwrap();
        let r = iterate_fixed_point(&spec, &seed, &ob, &opts, 1e-6, 50, None).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.final_delta <= 1e-6);
        let seed = GridFunctionPair::constant(0.0, 40.0, 0.05, 0.3, 0.2).unwrap();
        let r = iterate_fixed_point(&spec, &seed, &ob, &opts, 1e-9, 200, None).unwrap();
        assert!(r.converged, "{:?}", r.outcome);
        for i in 0..r.pair.len() {
            let (p, q) = (r.pair.phi()[i], r.pair.psi()[i]);
            assert!((p - (p * p + q * p / (p + 1.0))).abs() < 1e-5);
        }
    }

    #[test]
    fn logistic_equilibrium_has_no_residual() {
        let spec = unit_model(0.5);
        let pair = GridFunctionPair::constant(0.0, 10.0, 0.01, 1.0, 0.0).unwrap();
        assert!(dde_residual(&spec, &pair).unwrap() <= 1e-8);
        let tiny = GridFunctionPair::constant(0.0, 0.03, 0.01, 1.0, 0.0).unwrap();
        assert!(matches!(
            dde_residual(&spec, &tiny),
            Err(Error::GridTooCoarse(_))
        ));
    }

    #[test]
    fn wrong_pair_has_large_residual() {
        let pair = GridFunctionPair::from_fn(0.0, 20.0, 0.01, |t: f64| {
            Ok((0.6 + 0.3 * (3.0 * t).sin(), 0.3))
        })
        .unwrap();
        assert!(dde_residual(&example_two(), &pair).unwrap() > 0.1);
    }

    #[test]
    fn example_two_operator_on_constant_box_corners() {
        let spec = example_two();
        let report = validate_model(&spec, 1000.0, 20_000).unwrap();
        let cb = CoefficientBounds::from_report(&report);
        let ob = OperatorBounds::from_coefficients(&cb);
        let p = compute_permanence_bounds(&PermanenceInputs::from_bounds(&cb)).unwrap();
        let opts = UpsilonOptions::new(0.05, 1e-6);
        let hi = GridFunctionPair::constant(0.0, 800.0, 0.1, p.prey_max, p.predator_max).unwrap();
        let out = apply_upsilon(&spec, &hi, &ob, &opts).unwrap();
        // Self-limitation dominates at the upper corner: the prey image exceeds M1.
        assert!(out.phi().iter().take(100).all(|&x| x > p.prey_max));
    }

    #[test]
    fn identical_kernels() {
        let a = CoefficientExpr::parse("1+0.5*sin(t)").unwrap();
        let k = kernel_identity_check(&a, &a, 0.0, 0.0, 2.0, 64).unwrap();
        assert!(k.lhs == 0.0 && k.rhs == 0.0 && k.gap <= 1e-14);
    }

    #[test]
    fn constant_kernels_closed_form() {
        let k = kernel_identity_check(
            &CoefficientExpr::constant(1.0),
            &CoefficientExpr::constant(2.0),
            0.0,
            0.0,
            1.0,
            4096,
        )
        .unwrap();
        let exact = 1.0 / E - 1.0 / (E * E);
        assert!((k.lhs - exact).abs() < 1e-14);
        assert!((k.rhs - exact).abs() < 1e-10);
        assert!(k.gap <= 1e-10);
    }

    #[test]
    fn varying_kernels() {
        let a = CoefficientExpr::parse("1+0.5*sin(t)").unwrap();
        let b = CoefficientExpr::parse("2+0.3*cos(t)").unwrap();
        let k = kernel_identity_check(&a, &b, 0.7, 0.0, 2.0, 4096).unwrap();
        assert!(k.gap <= 1e-8, "{k:?}");
        let coarse = kernel_identity_check(&a, &b, 0.7, 0.0, 2.0, 16).unwrap();
        let fine = kernel_identity_check(&a, &b, 0.7, 0.0, 2.0, 64).unwrap();
        assert!(
            coarse.gap >= 8.0 * fine.gap,
            "{} vs {}",
            coarse.gap,
            fine.gap
        );
    }

    #[test]
    fn csv_header() {
        let pair = GridFunctionPair::constant(0.0, 0.3, 0.1, 1.0, 2.0).unwrap();
        let mut buf = Vec::new();
        pair.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,u_star,v_star\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
