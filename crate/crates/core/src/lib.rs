//! Preference-conditioned Pareto front learning.
//!
//! A small reverse-mode tape ([`autodiff`]) drives hypernetworks
//! ([`hypernet`]) that map a preference vector and an anchor to a decision
//! vector of a benchmark problem ([`problems`]). Training minimizes a
//! weighted Chebyshev loss ([`scalarize`]) and [`metrics`] scores the
//! learned front against the analytic one.

pub mod autodiff;
pub mod hypernet;
pub mod metrics;
pub mod problems;
pub mod scalarize;
pub mod train;

/// Formats `x` with `digits` significant digits in positional notation,
/// falling back to scientific notation for very large or small magnitudes.
/// Zero prints with `digits - 1` decimals.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits - 1, x);
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - exp;
    if (0..=20).contains(&decimals) {
        format!("{:.*}", decimals as usize, x)
    } else if decimals < 0 && exp < 16 {
        format!("{x:.0}")
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}
