//! Composite Simpson rules shared by the diagnostics and the integral operator.

use crate::scalar::{from_usize, lit, Scalar};

/// Composite Simpson on `[a, b]` with `n` (even, >= 2) subintervals.
pub fn simpson<T, E, F>(f: F, a: T, b: T, n: usize) -> Result<T, E>
where
    T: Scalar,
    F: Fn(T) -> Result<T, E>,
{
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "Simpson needs an even number of subintervals"
    );
    let h = (b - a) / from_usize(n);
    let mut odd = T::zero();
    let mut even = T::zero();
    for k in 1..n {
        let v = f(a + from_usize::<T>(k) * h)?;
        if k % 2 == 1 {
            odd = odd + v;
        } else {
            even = even + v;
        }
    }
    let ends = f(a)? + f(b)?;
    Ok(h / lit(3.0) * (ends + lit::<T>(4.0) * odd + lit::<T>(2.0) * even))
}

/// Composite Simpson over equally spaced samples; `values.len()` must be odd.
pub fn simpson_samples<T: Scalar>(values: &[T], h: T) -> T {
    let n = values.len();
    assert!(
        n >= 3 && n % 2 == 1,
        "Simpson samples need an odd count >= 3"
    );
    let mut acc = values[0] + values[n - 1];
    for (k, &v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc = acc
            + if k % 2 == 1 {
                lit::<T>(4.0) * v
            } else {
                lit::<T>(2.0) * v
            };
    }
    acc * h / lit(3.0)
}

/// Running integrals `F[k] = int_{x_0}^{x_k} f` on a uniform mesh, Simpson on
/// even nodes and a one-panel quadratic rule on odd ones.
pub fn cumulative_simpson<T: Scalar>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let mut out = vec![T::zero(); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = (values[0] + values[1]) * h / lit(2.0);
        return out;
    }
    let three: T = lit(3.0);
    let twelve: T = lit(12.0);
    let mut k = 0;
    while k + 2 < n {
        let (f0, f1, f2) = (values[k], values[k + 1], values[k + 2]);
        out[k + 1] = out[k] + h / twelve * (lit::<T>(5.0) * f0 + lit::<T>(8.0) * f1 - f2);
        out[k + 2] = out[k] + h / three * (f0 + lit::<T>(4.0) * f1 + f2);
        k += 2;
    }
    if k + 1 < n {
        // trailing panel: quadratic through the last three nodes
        let (f0, f1, f2) = (values[k - 1], values[k], values[k + 1]);
        out[k + 1] = out[k] + h / twelve * (-f0 + lit::<T>(8.0) * f1 + lit::<T>(5.0) * f2);
    }
    out
}
