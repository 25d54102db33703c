//! Fixed-step RK4 for the delay system in log variables `x = ln u`, `y = ln v`.
//!
//! Delayed states are read from a cubic Hermite interpolant through the stored
//! knots (values and derivatives), or from the initial history before `t0`.
//! Because the state is carried as a logarithm, `u = exp(x)` and `v = exp(y)`
//! stay strictly positive.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::expr::Node;
use crate::model::{per_capita, DelayedState, InitialHistory, ModelSpec};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::textfmt::fmt17;

/// Grid point of a trajectory: log-state, its derivative, and the state itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    pub dx: T,
    pub dy: T,
    pub u: T,
    pub v: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    t0: T,
    t_end: T,
    h: T,
    knots: Vec<Knot<T>>,
    history: InitialHistory,
}

#[inline]
fn hermite<T: Scalar>(s: T, h: T, y0: T, d0: T, y1: T, d1: T) -> T {
    let one = T::one();
    let two: T = lit(2.0);
    let three: T = lit(3.0);
    let om = one - s;
    let h00 = (one + two * s) * om * om;
    let h10 = s * om * om;
    let h01 = s * s * (three - two * s);
    let h11 = s * s * (s - one);
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

impl<T: Scalar> Trajectory<T> {
    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn step(&self) -> T {
        self.h
    }

    pub fn knots(&self) -> &[Knot<T>] {
        &self.knots
    }

    pub fn history(&self) -> &InitialHistory {
        &self.history
    }

    fn knot_time(&self, i: usize) -> T {
        self.t0 + from_usize::<T>(i) * self.h
    }

    /// State at `t`, for `t` up to the newest knot. Times before `t0` read the history.
    fn lookup(&self, t: T) -> Result<(T, T)> {
        if t < self.t0 {
            return Ok(self.history.at(t - self.t0)?);
        }
        let last = self.knots.len() - 1;
        let pos = (t - self.t0) / self.h;
        let nearest = pos.round();
        if let Some(i) = nearest.to_usize() {
            if i <= last && self.knot_time(i) == t {
                let k = &self.knots[i];
                return Ok((k.u, k.v));
            }
        }
        let i = pos.floor().to_usize().unwrap_or(0).min(last);
        if i == last {
            let k = &self.knots[last];
            let tol = self.h * lit(1e-9);
            if t - k.t > tol {
                return Err(Error::OutOfDomain {
                    t: to_f64(t),
                    lo: to_f64(self.t0),
                    hi: to_f64(k.t),
                });
            }
            return Ok((k.u, k.v));
        }
        let (a, b) = (&self.knots[i], &self.knots[i + 1]);
        let s = (t - a.t) / self.h;
        let x = hermite(s, self.h, a.x, a.dx, b.x, b.dx);
        let y = hermite(s, self.h, a.y, a.dy, b.y, b.dy);
        Ok((x.exp(), y.exp()))
    }

    /// `(u, v)` at any `t` in `[t0 - r, t_end]` (the lower end is not enforced:
    /// the history is evaluable wherever its expression is).
    pub fn sample_state(&self, t: T) -> Result<(T, T)> {
        if t > self.t_end {
            return Err(Error::OutOfDomain {
                t: to_f64(t),
                lo: to_f64(self.t0),
                hi: to_f64(self.t_end),
            });
        }
        self.lookup(t)
    }

    /// Like [`sample_state`](Self::sample_state) but rejects times before `t0 - r`.
    pub fn sample_state_checked(&self, t: T, r: T) -> Result<(T, T)> {
        if t < self.t0 - r {
            return Err(Error::OutOfDomain {
                t: to_f64(t),
                lo: to_f64(self.t0 - r),
                hi: to_f64(self.t_end),
            });
        }
        self.sample_state(t)
    }

    /// Smallest `min(u, v)` over all knots.
    pub fn min_state(&self) -> T {
        self.knots
            .iter()
            .map(|k| k.u.min(k.v))
            .fold(T::infinity(), T::min)
    }

    /// CSV export with header `t,u,v`, one row every `stride` knots.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        writeln!(w, "t,u,v")?;
        for k in self.knots.iter().step_by(stride.max(1)) {
            writeln!(w, "{},{},{}", fmt17(k.t), fmt17(k.u), fmt17(k.v))?;
        }
        Ok(())
    }
}

struct Stepper<'a, T> {
    spec: &'a ModelSpec,
    traj: Trajectory<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    /// Log-state derivative at time `t` with prey log-state `x` (the predator
    /// per-capita rate does not depend on the current predator level); delayed states must be at or before the newest knot.
    fn field(&self, t: T, x: T) -> Result<(T, T)> {
        if x.abs() >= T::max_value().ln() {
            return Err(Error::Overflow { t: to_f64(t) });
        }
        let rates = self.spec.rates_at(t)?;
        let delays = self.spec.delays_at(t)?;
        let newest = self.traj.knots.last().expect("at least one knot").t;
        let tol = self.traj.h * lit(1e-9);
        let delayed_at = |d: T| -> Result<(T, T)> {
            let s = t - d;
            if s > newest + tol {
                return Err(Error::StepTooLarge {
                    h: to_f64(self.traj.h),
                    min_delay: to_f64(d),
                    t: to_f64(t),
                });
            }
            self.traj.lookup(s.min(newest))
        };
        let (u_sigma1, _) = delayed_at(delays.sigma1)?;
        let (u_sigma2, _) = delayed_at(delays.sigma2)?;
        let (_, v_tau1) = delayed_at(delays.tau1)?;
        let (_, v_tau2) = delayed_at(delays.tau2)?;
        let delayed = DelayedState {
            u_sigma1,
            u_sigma2,
            v_tau1,
            v_tau2,
        };
        let (gx, gy) = per_capita(&rates, x.exp(), &delayed);
        if !(gx.is_finite() && gy.is_finite()) {
            return Err(Error::NonFinite {
                t: to_f64(t),
                what: "right-hand side".into(),
            });
        }
        Ok((gx, gy))
    }
}

impl<'a, T: Scalar> Stepper<'a, T> {
    /// One classical RK4 step of size `dt` from `(t, x, y)` with known slope `(dx, dy)`.
    #[allow(clippy::too_many_arguments)]
    fn rk4(&self, t: T, x: T, y: T, dx: T, dy: T, dt: T) -> Result<(T, T)> {
        let half = dt / lit(2.0);
        let two: T = lit(2.0);
        let (k2x, k2y) = self.field(t + half, x + half * dx)?;
        let (k3x, k3y) = self.field(t + half, x + half * k2x)?;
        let (k4x, k4y) = self.field(t + dt, x + dt * k3x)?;
        let sixth = dt / lit(6.0);
        let xn = x + sixth * (dx + two * k2x + two * k3x + k4x);
        let yn = y + sixth * (dy + two * k2y + two * k3y + k4y);
        let limit = T::max_value().ln();
        if !(xn.abs() < limit && yn.abs() < limit) {
            return Err(Error::Overflow { t: to_f64(t + dt) });
        }
        Ok((xn, yn))
    }
}

/// Sign changes of the `abs` arguments of the coefficients. A coefficient is
/// only Lipschitz across such a point, which would cost RK4 two orders, so
/// steps are split there.
struct KinkTracker<T> {
    args: Vec<Node>,
    last: Vec<T>,
}

impl<T: Scalar> KinkTracker<T> {
    fn new(spec: &ModelSpec, t0: T) -> Result<Self> {
        let mut args: Vec<Node> = Vec::new();
        for (_, expr) in spec.iter() {
            for a in expr.root().abs_arguments() {
                if !args.contains(a) {
                    args.push(a.clone());
                }
            }
        }
        let last = args
            .iter()
            .map(|a| a.evaluate(t0))
            .collect::<Result<Vec<T>, _>>()?;
        Ok(KinkTracker { args, last })
    }

    /// Interior sign-change points in `(a, b)`, ascending; advances the stored signs to `b`.
    fn crossings(&mut self, a: T, b: T) -> Result<Vec<T>> {
        let mut out = Vec::new();
        let margin = (b - a) * lit(1e-9);
        for (arg, last) in self.args.iter().zip(self.last.iter_mut()) {
            let vb: T = arg.evaluate(b)?;
            if *last * vb < T::zero() {
                let (mut lo, mut hi, va) = (a, b, *last);
                loop {
                    let mid = lo + (hi - lo) / lit(2.0);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if arg.evaluate(mid)? * va > T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo - a > margin && b - lo > margin {
                    out.push(lo);
                }
            }
            *last = vb;
        }
        out.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
        out.dedup();
        Ok(out)
    }
}

/// Integrates from `t0` to `t_end` with step `h`.
///
/// Requires `h` not to exceed any delay met along the way, so every delayed
/// argument lies at or before the last completed knot.
pub fn integrate<T: Scalar>(
    spec: &ModelSpec,
    history: &InitialHistory,
    t0: T,
    t_end: T,
    h: T,
) -> Result<Trajectory<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step h = {h} must be positive"
        )));
    }
    if t_end < t0 {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} precedes t0 = {t0}"
        )));
    }
    let span = t_end - t0;
    let steps_f = (span / h).round();
    let steps = steps_f.to_usize().unwrap_or(0);
    if (steps_f * h - span).abs() > lit::<T>(1e-9) * span.max(T::one()) {
        return Err(Error::NonIntegralSpan {
            span: to_f64(span),
            h: to_f64(h),
        });
    }

    let (u0, v0) = history.at(T::zero())?;
    if !(u0 > T::zero() && v0 > T::zero()) {
        return Err(Error::InadmissibleHistory(format!(
            "phi(0) = ({u0}, {v0}) must be strictly positive"
        )));
    }
    let mut stepper = Stepper {
        spec,
        traj: Trajectory {
            t0,
            t_end,
            h,
            knots: Vec::with_capacity(steps + 1),
            history: history.clone(),
        },
    };
    let (x0, y0) = (u0.ln(), v0.ln());
    stepper.traj.knots.push(Knot {
        t: t0,
        x: x0,
        y: y0,
        dx: T::zero(),
        dy: T::zero(),
        u: u0,
        v: v0,
    });
    let (dx0, dy0) = stepper.field(t0, x0)?;
    stepper.traj.knots[0].dx = dx0;
    stepper.traj.knots[0].dy = dy0;

    let mut kinks = KinkTracker::new(spec, t0)?;
    for n in 0..steps {
        let k = *stepper.traj.knots.last().expect("nonempty");
        let t_next = t0 + from_usize::<T>(n + 1) * h;
        let (mut t, mut x, mut y, mut dx, mut dy) = (k.t, k.x, k.y, k.dx, k.dy);
        for tk in kinks.crossings(k.t, t_next)? {
            (x, y) = stepper.rk4(t, x, y, dx, dy, tk - t)?;
            t = tk;
            (dx, dy) = stepper.field(t, x)?;
        }
        (x, y) = stepper.rk4(t, x, y, dx, dy, t_next - t)?;
        stepper.traj.knots.push(Knot {
            t: t_next,
            x,
            y,
            dx: T::zero(),
            dy: T::zero(),
            u: x.exp(),
            v: y.exp(),
        });
        let (dx, dy) = stepper.field(t_next, x)?;
        let last = stepper.traj.knots.last_mut().expect("nonempty");
        last.dx = dx;
        last.dy = dy;
    }
    Ok(stepper.traj)
}

/// Result of a three-level self-convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderCheck<T> {
    /// `|sol_h - sol_{h/2}| / |sol_{h/2} - sol_{h/4}|` in the sup norm over shared knots.
    pub ratio: T,
    pub coarse_gap: T,
    pub fine_gap: T,
    /// The fine gap is at rounding level; the ratio carries no information.
    pub plateau: bool,
}

impl<T: Scalar> OrderCheck<T> {
    /// Observed order `log2(ratio)`.
    pub fn observed_order(&self) -> T {
        self.ratio.log2()
    }
}

fn sup_gap<T: Scalar>(coarse: &Trajectory<T>, fine: &Trajectory<T>, factor: usize) -> T {
    coarse
        .knots
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let b = &fine.knots[i * factor];
            (a.u - b.u).abs().max((a.v - b.v).abs())
        })
        .fold(T::zero(), T::max)
}

/// Richardson ratio from runs at `h`, `h/2` and `h/4`.
pub fn order_check<T: Scalar>(
    spec: &ModelSpec,
    history: &InitialHistory,
    t0: T,
    t_end: T,
    h: T,
) -> Result<OrderCheck<T>> {
    let two: T = lit(2.0);
    let (r1, (r2, r4)) = rayon::join(
        || integrate(spec, history, t0, t_end, h),
        || {
            rayon::join(
                || integrate(spec, history, t0, t_end, h / two),
                || integrate(spec, history, t0, t_end, h / (two * two)),
            )
        },
    );
    let (s1, s2, s4) = (r1?, r2?, r4?);
    let coarse_gap = sup_gap(&s1, &s2, 2);
    let fine_gap = sup_gap(&s2, &s4, 2);
    let scale = s4
        .knots
        .iter()
        .map(|k| k.u.abs().max(k.v.abs()))
        .fold(T::one(), T::max);
    let plateau = fine_gap <= lit::<T>(1e3) * T::epsilon() * scale;
    Ok(OrderCheck {
        ratio: coarse_gap / fine_gap,
        coarse_gap,
        fine_gap,
        plateau,
    })
}
