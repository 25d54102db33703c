use super::{CoefficientExpr, ExprError};
use crate::scalar::{from_usize, lit, Scalar};

/// Number of local extrema per side that get a golden-section refinement.
const REFINED_EXTREMA: usize = 8;
const GOLDEN_ITERATIONS: usize = 60;

/// Numerical infimum and supremum of `|f|` over `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsEstimate<T> {
    pub inf_value: T,
    pub sup_value: T,
    pub horizon: T,
    pub samples: usize,
}

impl<T: Scalar> BoundsEstimate<T> {
    /// Bounds of a constant function.
    pub fn exact(value: T) -> Self {
        BoundsEstimate {
            inf_value: value.abs(),
            sup_value: value.abs(),
            horizon: T::zero(),
            samples: 1,
        }
    }
}

/// Keeps the `cap` best `(score, index)` pairs, ordered best first.
struct TopK<T> {
    cap: usize,
    items: Vec<(T, usize)>,
}

impl<T: Scalar> TopK<T> {
    fn new(cap: usize) -> Self {
        TopK {
            cap,
            items: Vec::with_capacity(cap + 1),
        }
    }

    fn offer(&mut self, score: T, index: usize) {
        if self.items.len() == self.cap && score <= self.items[self.cap - 1].0 {
            return;
        }
        let at = self.items.partition_point(|(s, _)| *s >= score);
        self.items.insert(at, (score, index));
        self.items.truncate(self.cap);
    }
}

/// Golden-section search for the minimum of `g` on `[lo, hi]`; returns the best value seen.
fn golden_min<T: Scalar, G>(mut lo: T, mut hi: T, g: G) -> Result<T, ExprError>
where
    G: Fn(T) -> Result<T, ExprError>,
{
    let inv_phi: T = lit(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    let mut best = f1.min(f2);
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1)?;
            best = best.min(f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2)?;
            best = best.min(f2);
        }
        if hi - lo <= T::epsilon() * (lo.abs() + hi.abs()) {
            break;
        }
    }
    Ok(best)
}

/// Min and max of `|expr|` over a uniform `samples`-point grid on `[0, horizon]`,
/// with the strongest grid extrema refined by golden-section search.
pub fn estimate_bounds<T: Scalar>(
    expr: &CoefficientExpr,
    horizon: T,
    samples: usize,
) -> Result<BoundsEstimate<T>, ExprError> {
    if let Some(c) = expr.as_constant() {
        let v: T = lit(c);
        return Ok(BoundsEstimate {
            inf_value: v.abs(),
            sup_value: v.abs(),
            horizon,
            samples,
        });
    }
    assert!(horizon > T::zero(), "horizon must be positive");
    assert!(samples >= 2, "at least two samples are required");

    let n = samples - 1;
    let step = horizon / from_usize(n);
    let at = |k: usize| -> T {
        if k == n {
            horizon
        } else {
            from_usize::<T>(k) * step
        }
    };
    let abs_at = |t: T| expr.evaluate(t).map(|v| v.abs());

    let mut values = Vec::with_capacity(samples);
    for k in 0..samples {
        values.push(abs_at(at(k))?);
    }

    let mut inf = values[0];
    let mut sup = values[0];
    let mut minima = TopK::new(REFINED_EXTREMA);
    let mut maxima = TopK::new(REFINED_EXTREMA);
    for k in 0..samples {
        let v = values[k];
        inf = inf.min(v);
        sup = sup.max(v);
        let left = if k > 0 { values[k - 1] } else { v };
        let right = if k < n { values[k + 1] } else { v };
        if v <= left && v <= right {
            minima.offer(-v, k);
        }
        if v >= left && v >= right {
            maxima.offer(v, k);
        }
    }

    let bracket = |k: usize| (at(k.saturating_sub(1)), at((k + 1).min(n)));
    for &(_, k) in &minima.items {
        let (lo, hi) = bracket(k);
        inf = inf.min(golden_min(lo, hi, abs_at)?);
    }
    for &(_, k) in &maxima.items {
        let (lo, hi) = bracket(k);
        let neg = golden_min(lo, hi, |t| abs_at(t).map(|v| -v))?;
        sup = sup.max(-neg);
    }

    Ok(BoundsEstimate {
        inf_value: inf,
        sup_value: sup,
        horizon,
        samples,
    })
}
