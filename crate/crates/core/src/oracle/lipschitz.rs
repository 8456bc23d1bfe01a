use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Pointwise bounds on an `L`-Lipschitz function with integral `mass` over
/// `[a, b]`: every value lies in `mass/(b-a) ∓ L(b-a)/2`.
pub fn lipschitz_bound<T: Scalar>(a: T, b: T, lipschitz: T, mass: T) -> Result<(T, T)> {
    if !(b > a) {
        return invalid(format!("interval must satisfy b > a, got [{a}, {b}]"));
    }
    if !(lipschitz >= T::zero()) {
        return invalid(format!(
            "Lipschitz constant must be non-negative, got {lipschitz}"
        ));
    }
    let w = b - a;
    let mean = mass / w;
    let slack = lipschitz * w / T::of(2.0);
    Ok((mean - slack, mean + slack))
}
