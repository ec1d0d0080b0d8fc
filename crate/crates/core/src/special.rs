//! Special functions.

/// Complementary error function.
///
/// Delegates to `libm::erfc`, a port of the FreeBSD/fdlibm implementation
/// (piecewise rational minimax approximations on `|x| < 0.84375`,
/// `[0.84375, 1.25)`, `[1.25, 1/0.35)`, `[1/0.35, 28)`, with an
/// `exp(-x^2)` factor split to avoid cancellation). Its documented error is
/// below one ulp over the whole real line.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
