//! The two worked coefficient sets, with the hand-tabulated coefficient extremes
//! that accompany them.

use crate::model::{Coefficient, ModelSpec};
use crate::permanence::CoefficientBounds;
use crate::scalar::{lit, Scalar};

use Coefficient::*;

/// Weak prey growth: the prey-floor condition fails.
pub const EXAMPLE_ONE: [(Coefficient, &str); 11] = [
    (A1, "0.04+0.125*abs(cos(sqrt(2)*t))+0.125*exp(-t)"),
    (A2, "0.01+0.25*abs(sin(sqrt(7)*t))"),
    (B, "2.6+0.5*cos(t)"),
    (C1, "3.2"),
    (C2, "3.5"),
    (K1, "17"),
    (K2, "3.4"),
    (Tau1, "0.75"),
    (Tau2, "0.75"),
    (Sigma1, "0.75"),
    (Sigma2, "0.75"),
];

/// Strong prey growth with a decaying rational self-limitation term; the
/// prey-floor condition holds.
pub const EXAMPLE_TWO: [(Coefficient, &str); 11] = [
    (A1, "4.8+0.125*(abs(cos(sqrt(2)*t))+abs(cos(sqrt(2)*t)))"),
    (A2, "0.03+0.125*(abs(sin(sqrt(2)*t))+abs(cos(sqrt(5)*t)))"),
    (B, "0.25*abs(cos(t))+(33.72+32.72*t^2)/(4+4*t^2)"),
    (C1, "0.32"),
    (C2, "3.6"),
    (K1, "16.7"),
    (K2, "5.7"),
    (Tau1, "0.92"),
    (Tau2, "0.92"),
    (Sigma1, "0.92"),
    (Sigma2, "0.92"),
];

/// All rates equal to one and every delay equal to `delay`.
pub fn unit_model(delay: f64) -> ModelSpec {
    ModelSpec::constant(Coefficient::ALL.map(|c| (c, if c.is_delay() { delay } else { 1.0 })))
}

pub fn example_one() -> ModelSpec {
    ModelSpec::parse(EXAMPLE_ONE).expect("built-in formulas parse")
}

pub fn example_two() -> ModelSpec {
    ModelSpec::parse(EXAMPLE_TWO).expect("built-in formulas parse")
}

/// One row entry of a hand-computed extremes table. Delays are tabulated by
/// their supremum only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tabulated {
    pub coefficient: Coefficient,
    pub inf: Option<f64>,
    pub sup: f64,
}

const fn both(coefficient: Coefficient, inf: f64, sup: f64) -> Tabulated {
    Tabulated {
        coefficient,
        inf: Some(inf),
        sup,
    }
}

const fn sup_only(coefficient: Coefficient, sup: f64) -> Tabulated {
    Tabulated {
        coefficient,
        inf: None,
        sup,
    }
}

pub const TABLE_ONE: [Tabulated; 11] = [
    both(A1, 0.04, 0.29),
    both(A2, 0.01, 0.26),
    both(B, 2.6, 3.1),
    both(C1, 3.2, 3.2),
    both(C2, 3.5, 3.5),
    both(K1, 17.0, 17.0),
    both(K2, 3.4, 3.4),
    sup_only(Tau1, 0.75),
    sup_only(Tau2, 0.75),
    sup_only(Sigma1, 0.75),
    sup_only(Sigma2, 0.75),
];

pub const TABLE_TWO: [Tabulated; 11] = [
    both(A1, 4.8, 5.05),
    both(A2, 0.03, 0.28),
    both(B, 8.1, 8.6),
    both(C1, 0.32, 0.32),
    both(C2, 3.6, 3.6),
    both(K1, 16.7, 16.7),
    both(K2, 5.7, 5.7),
    sup_only(Tau1, 0.92),
    sup_only(Tau2, 0.92),
    sup_only(Sigma1, 0.92),
    sup_only(Sigma2, 0.92),
];

/// Overrides `base` with every tabulated value; entries without an infimum keep the base one.
pub fn apply_table<T: Scalar>(
    base: &CoefficientBounds<T>,
    table: &[Tabulated],
) -> CoefficientBounds<T> {
    let mut out = *base;
    for row in table {
        let inf = row
            .inf
            .map(lit)
            .unwrap_or_else(|| base.inf(row.coefficient));
        out.set(row.coefficient, inf, lit(row.sup));
    }
    out
}
