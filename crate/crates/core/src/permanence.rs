//! Explicit ultimate bounds `m1 <= u <= M1`, `m2 <= v <= M2` and the prey-floor condition.
//!
//! ```text
//! M1 = a1^s / b^i
//! M2 = a2^s (M1 + k2^s) exp(a2^s tau2^s) / c2^i
//! C0: a1^i k1^i - M2 c1^s > 0
//! m1 = (a1^i k1^i - M2 c1^s) / (b^s k1^i)        if C0, else 0
//! m2 = a2^i (m1 + k2^i) / (c2^s exp(c2^s M2 tau2^s / (k2^i + m1)))
//! ```
//!
//! Superscripts `s` and `i` denote the supremum and infimum of the absolute value.

use crate::error::{Error, Result};
use crate::integrator::{integrate, Trajectory};
use crate::model::{Coefficient, InitialHistory, ModelSpec, ValidationReport};
use crate::scalar::Scalar;

/// Infimum and supremum of every coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds<T> {
    inf: [T; 11],
    sup: [T; 11],
}

impl<T: Scalar> CoefficientBounds<T> {
    pub fn from_report(report: &ValidationReport<T>) -> Self {
        let mut inf = [T::zero(); 11];
        let mut sup = [T::zero(); 11];
        for c in Coefficient::ALL {
            inf[c as usize] = report.inf(c);
            sup[c as usize] = report.sup(c);
        }
        CoefficientBounds { inf, sup }
    }

    /// Every coefficient pinned to a single value (constant coefficients).
    pub fn uniform(values: [(Coefficient, T); 11]) -> Self {
        let mut b = CoefficientBounds {
            inf: [T::zero(); 11],
            sup: [T::zero(); 11],
        };
        for (c, v) in values {
            b.set(c, v, v);
        }
        b
    }

    pub fn inf(&self, c: Coefficient) -> T {
        self.inf[c as usize]
    }

    pub fn sup(&self, c: Coefficient) -> T {
        self.sup[c as usize]
    }

    pub fn set(&mut self, c: Coefficient, inf: T, sup: T) {
        self.inf[c as usize] = inf;
        self.sup[c as usize] = sup;
    }

    /// Copy with one coefficient replaced.
    pub fn with(mut self, c: Coefficient, inf: T, sup: T) -> Self {
        self.set(c, inf, sup);
        self
    }
}

/// The coefficient extremes the bound formulas and the stability coefficients read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermanenceInputs<T> {
    pub a1_inf: T,
    pub a1_sup: T,
    pub a2_inf: T,
    pub a2_sup: T,
    pub b_inf: T,
    pub b_sup: T,
    pub c1_sup: T,
    pub c2_inf: T,
    pub c2_sup: T,
    pub k1_inf: T,
    pub k2_inf: T,
    pub k2_sup: T,
    pub tau2_sup: T,
}

impl<T: Scalar> PermanenceInputs<T> {
    pub fn from_bounds(b: &CoefficientBounds<T>) -> Self {
        use Coefficient::*;
        PermanenceInputs {
            a1_inf: b.inf(A1),
            a1_sup: b.sup(A1),
            a2_inf: b.inf(A2),
            a2_sup: b.sup(A2),
            b_inf: b.inf(B),
            b_sup: b.sup(B),
            c1_sup: b.sup(C1),
            c2_inf: b.inf(C2),
            c2_sup: b.sup(C2),
            k1_inf: b.inf(K1),
            k2_inf: b.inf(K2),
            k2_sup: b.sup(K2),
            tau2_sup: b.sup(Tau2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermanenceBounds<T> {
    /// `M1`, ultimate upper bound of the prey.
    pub prey_max: T,
    /// `M2`, ultimate upper bound of the predator.
    pub predator_max: T,
    /// `m1`, ultimate lower bound of the prey (zero when C0 fails).
    pub prey_min: T,
    /// `m2`, ultimate lower bound of the predator.
    pub predator_min: T,
    pub c0_holds: bool,
    /// `a1^i k1^i - M2 c1^s`.
    pub c0_margin: T,
    pub inputs: PermanenceInputs<T>,
}

/// Strict test of `a1^i k1^i - M2 c1^s > 0`.
pub fn check_c0<T: Scalar>(a1_inf: T, k1_inf: T, predator_max: T, c1_sup: T) -> bool {
    a1_inf * k1_inf - predator_max * c1_sup > T::zero()
}

fn positive<T: Scalar>(x: T, what: &'static str) -> Result<T> {
    if x > T::zero() && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonPositiveDenominator(what))
    }
}

pub fn compute_permanence_bounds<T: Scalar>(
    p: &PermanenceInputs<T>,
) -> Result<PermanenceBounds<T>> {
    let b_inf = positive(p.b_inf, "M1 = a1^s / b^i")?;
    let c2_inf = positive(p.c2_inf, "M2 (c2^i)")?;
    let prey_max = p.a1_sup / b_inf;
    let predator_max = p.a2_sup * (prey_max + p.k2_sup) * (p.a2_sup * p.tau2_sup).exp() / c2_inf;
    let c0_margin = p.a1_inf * p.k1_inf - predator_max * p.c1_sup;
    let c0_holds = check_c0(p.a1_inf, p.k1_inf, predator_max, p.c1_sup);
    let prey_min = if c0_holds {
        c0_margin / positive(p.b_sup * p.k1_inf, "m1 (b^s k1^i)")?
    } else {
        T::zero()
    };
    let c2_sup = positive(p.c2_sup, "m2 (c2^s)")?;
    let shifted = positive(p.k2_inf + prey_min, "m2 (k2^i + m1)")?;
    let predator_min = p.a2_inf * (prey_min + p.k2_inf)
        / (c2_sup * (c2_sup * predator_max * p.tau2_sup / shifted).exp());
    Ok(PermanenceBounds {
        prey_max,
        predator_max,
        prey_min,
        predator_min,
        c0_holds,
        c0_margin,
        inputs: *p,
    })
}

/// Observed extremes of a trajectory tail against the four bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermanenceCheck<T> {
    pub t_settle: T,
    pub t_end: T,
    pub slack: T,
    pub u_min: T,
    pub u_max: T,
    pub v_min: T,
    pub v_max: T,
    pub prey_max_ok: bool,
    pub predator_max_ok: bool,
    pub prey_min_ok: bool,
    pub predator_min_ok: bool,
}

impl<T> PermanenceCheck<T> {
    pub fn all_pass(&self) -> bool {
        self.prey_max_ok && self.predator_max_ok && self.prey_min_ok && self.predator_min_ok
    }
}

/// Checks the bounds on the knots of `traj` with `t >= t_settle`.
pub fn check_trajectory<T: Scalar>(
    traj: &Trajectory<T>,
    bounds: &PermanenceBounds<T>,
    t_settle: T,
    slack: T,
) -> Result<PermanenceCheck<T>> {
    let mut tail = traj.knots().iter().filter(|k| k.t >= t_settle).peekable();
    if tail.peek().is_none() {
        return Err(Error::InvalidArgument(format!(
            "t_settle = {t_settle} is past the end of the trajectory"
        )));
    }
    let (mut u_min, mut u_max) = (T::infinity(), T::neg_infinity());
    let (mut v_min, mut v_max) = (T::infinity(), T::neg_infinity());
    for k in tail {
        u_min = u_min.min(k.u);
        u_max = u_max.max(k.u);
        v_min = v_min.min(k.v);
        v_max = v_max.max(k.v);
    }
    Ok(PermanenceCheck {
        t_settle,
        t_end: traj.t_end(),
        slack,
        u_min,
        u_max,
        v_min,
        v_max,
        prey_max_ok: u_max <= bounds.prey_max + slack,
        predator_max_ok: v_max <= bounds.predator_max + slack,
        prey_min_ok: u_min >= bounds.prey_min - slack,
        predator_min_ok: v_min >= bounds.predator_min - slack,
    })
}

/// Integrates from `t0 = 0` and checks the bounds over `[t_settle, t_end]`.
#[allow(clippy::too_many_arguments)]
pub fn verify_permanence<T: Scalar>(
    spec: &ModelSpec,
    history: &InitialHistory,
    bounds: &PermanenceBounds<T>,
    t_settle: T,
    t_end: T,
    h: T,
    slack: T,
) -> Result<PermanenceCheck<T>> {
    if !(t_settle < t_end) {
        return Err(Error::InvalidArgument(format!(
            "t_settle = {t_settle} must precede t_end = {t_end}"
        )));
    }
    let traj = integrate(spec, history, T::zero(), t_end, h)?;
    check_trajectory(&traj, bounds, t_settle, slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{example_one, example_two, unit_model};
    use crate::expr::CoefficientExpr;
    use crate::model::validate_model;
    use proptest::prelude::*;

    #[allow(clippy::too_many_arguments)]
    fn inputs(
        a1: (f64, f64),
        a2: (f64, f64),
        b: (f64, f64),
        c1s: f64,
        c2: (f64, f64),
        k1i: f64,
        k2: (f64, f64),
        tau2s: f64,
    ) -> PermanenceInputs<f64> {
        PermanenceInputs {
            a1_inf: a1.0,
            a1_sup: a1.1,
            a2_inf: a2.0,
            a2_sup: a2.1,
            b_inf: b.0,
            b_sup: b.1,
            c1_sup: c1s,
            c2_inf: c2.0,
            c2_sup: c2.1,
            k1_inf: k1i,
            k2_inf: k2.0,
            k2_sup: k2.1,
            tau2_sup: tau2s,
        }
    }

    pub(crate) fn table_one() -> PermanenceInputs<f64> {
        inputs(
            (0.04, 0.29),
            (0.01, 0.26),
            (2.6, 3.1),
            3.2,
            (3.5, 3.5),
            17.0,
            (3.4, 3.4),
            0.75,
        )
    }

    pub(crate) fn table_two() -> PermanenceInputs<f64> {
        inputs(
            (4.8, 5.05),
            (0.03, 0.28),
            (8.1, 8.6),
            0.32,
            (3.6, 3.6),
            16.7,
            (5.7, 5.7),
            0.92,
        )
    }

    #[test]
    fn c0_examples() {
        assert!(!check_c0(0.04, 17.0, 0.6506, 3.2));
        assert!(check_c0(4.8, 16.7, 0.6403, 0.32));
        assert!(!check_c0(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn table_two_bounds_match_oracle() {
        let p = compute_permanence_bounds(&table_two()).unwrap();
        assert!(p.c0_holds);
        assert!((p.prey_min - 0.5567).abs() < 1e-3);
        assert!((p.prey_max - 0.6234567901234568).abs() < 1e-9);
        assert!((p.predator_max - 0.636332850829015).abs() < 1e-9);
        assert!((p.prey_min - 0.5567217204270626).abs() < 1e-9);
        assert!((p.predator_min - 0.03722857678696458).abs() < 1e-9);
    }

    #[test]
    fn table_one_bounds_match_oracle() {
        let p = compute_permanence_bounds(&table_one()).unwrap();
        assert!(!p.c0_holds);
        assert_eq!(p.prey_min, 0.0);
        assert!((p.prey_max - 0.11153846153846153).abs() < 1e-12);
        assert!((p.predator_max - 0.31702255161860693).abs() < 1e-12);
        assert!((p.predator_min - 0.007605240110178087).abs() < 1e-12);
    }

    #[test]
    fn unit_case() {
        let one = (1.0, 1.0);
        let p = compute_permanence_bounds(&inputs(one, one, one, 1.0, one, 1.0, one, 0.0)).unwrap();
        assert_eq!(
            (p.prey_max, p.predator_max, p.prey_min, p.predator_min),
            (1.0, 2.0, 0.0, 1.0)
        );
        assert!(!p.c0_holds);
    }

    #[test]
    fn zero_denominator_rejected() {
        let mut p = table_two();
        p.b_inf = 0.0;
        assert!(matches!(
            compute_permanence_bounds(&p),
            Err(Error::NonPositiveDenominator(_))
        ));
    }

    #[test]
    fn example_two_tail_inside_estimated_bounds() {
        let spec = example_two();
        let report = validate_model(&spec, 1000.0, 100_000).unwrap();
        let p = compute_permanence_bounds(&PermanenceInputs::from_bounds(
            &CoefficientBounds::from_report(&report),
        ))
        .unwrap();
        let hist = InitialHistory::constant(0.5, 0.5);
        let check = verify_permanence(&spec, &hist, &p, 100.0, 200.0, 0.01, 0.05).unwrap();
        assert!(check.all_pass(), "{check:?} vs {p:?}");
    }

    #[test]
    fn example_one_prey_floor_trivial() {
        let spec = example_one();
        let p = compute_permanence_bounds(&table_one()).unwrap();
        let hist = InitialHistory::constant(0.5, 0.5);
        let check = verify_permanence(&spec, &hist, &p, 20.0, 60.0, 0.01, 0.05).unwrap();
        assert!(check.prey_min_ok);
    }

    #[test]
    fn weak_predation_settles_below_prey_bound() {
        let mut spec = unit_model(0.5);
        spec.set(Coefficient::C1, CoefficientExpr::constant(1e-6));
        spec.set(Coefficient::C2, CoefficientExpr::constant(1e-6));
        spec.set(Coefficient::A1, CoefficientExpr::constant(2.0));
        spec.set(Coefficient::A2, CoefficientExpr::constant(1e-6));
        let report = validate_model(&spec, 10.0, 100).unwrap();
        let p = compute_permanence_bounds(&PermanenceInputs::from_bounds(
            &CoefficientBounds::from_report(&report),
        ))
        .unwrap();
        let traj = integrate(&spec, &InitialHistory::constant(0.5, 1e-3), 0.0, 30.0, 0.01).unwrap();
        let (u, _): (f64, f64) = traj.sample_state(30.0).unwrap();
        assert!((u - 2.0).abs() < 1e-3 && u <= p.prey_max);
    }

    #[test]
    fn bad_window_rejected() {
        let p = compute_permanence_bounds(&table_two()).unwrap();
        let hist = InitialHistory::constant(0.5, 0.5);
        assert!(verify_permanence(&example_two(), &hist, &p, 10.0, 10.0, 0.01, 0.05).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_a1_sup_and_tau2_sup(d_a in 0.0f64..2.0, d_tau in 0.0f64..2.0) {
            let base = table_two();
            let p0 = compute_permanence_bounds(&base).unwrap();
            let mut bigger = base;
            bigger.a1_sup += d_a;
            bigger.tau2_sup += d_tau;
            let p1 = compute_permanence_bounds(&bigger).unwrap();
            prop_assert!(p1.prey_max >= p0.prey_max);
            prop_assert!(p1.predator_max >= p0.predator_max);
        }

        #[test]
        fn predator_floor_positive(
            a1i in 0.01f64..5.0, a1d in 0.0f64..1.0, a2i in 0.01f64..1.0, a2d in 0.0f64..1.0,
            bi in 0.1f64..5.0, bd in 0.0f64..1.0, c1 in 0.01f64..4.0, c2i in 0.1f64..4.0,
            c2d in 0.0f64..1.0, k1 in 0.1f64..20.0, k2i in 0.1f64..10.0, k2d in 0.0f64..1.0,
            tau in 0.0f64..1.0,
        ) {
            let p = compute_permanence_bounds(&inputs(
                (a1i, a1i + a1d), (a2i, a2i + a2d), (bi, bi + bd), c1,
                (c2i, c2i + c2d), k1, (k2i, k2i + k2d), tau,
            )).unwrap();
            prop_assert!(p.predator_min > 0.0);
            prop_assert!(p.prey_min >= 0.0 && p.prey_min < p.prey_max);
            prop_assert!(p.predator_min < p.predator_max);
            prop_assert!(p.c0_holds || p.prey_min == 0.0);
        }
    }
}
