//! Thin wrappers over `libm` so the rest of the crate reads like `std` code.

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// Exact `floor(log2 x)` for finite `x > 0`, read off the binary exponent.
#[inline]
pub(crate) fn floor_log2(x: f64) -> i32 {
    let (_, e) = libm::frexp(x);
    e - 1
}

#[inline]
pub(crate) fn exp2i(e: i32) -> f64 {
    libm::ldexp(1.0, e)
}
