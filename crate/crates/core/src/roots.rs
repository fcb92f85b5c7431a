use crate::error::{Error, Result};

/// Bisection on a bracket `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// Stops once `done(x, f(x))` holds or the bracket collapses to adjacent floats.
pub(crate) fn bisect<F, D>(mut f: F, mut lo: f64, mut hi: f64, mut done: D) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
    D: FnMut(f64, f64) -> bool,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!(
            "root not bracketed on [{lo:e}, {hi:e}]"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 || done(mid, f_mid) {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical("bisection did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, |_, fx| fx.abs() < 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unbracketed_is_an_error() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, |_, _| false).is_err());
    }
}
