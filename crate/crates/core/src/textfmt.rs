//! Plain-text number formatting for CSV output.

use crate::scalar::{to_f64, Scalar};

/// Scientific notation with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt17<T: Scalar>(x: T) -> String {
    format!("{:.16e}", to_f64(x))
}
