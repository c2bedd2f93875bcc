//! Float helpers backed by `libm` so the crate builds without `std`.

pub(crate) const LN_2: f64 = core::f64::consts::LN_2;
pub(crate) const LOG2_E: f64 = core::f64::consts::LOG2_E;

#[inline]
pub(crate) fn log2_1p(x: f64) -> f64 {
    libm::log1p(x) * LOG2_E
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn pow10(x: f64) -> f64 {
    libm::pow(10.0, x)
}
