use crate::error::{Error, Result};

/// One abscissa/ordinate pair with an optional one-sigma error on `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    pub error: Option<f64>,
}

impl FitPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, error: None }
    }

    pub fn with_error(x: f64, y: f64, error: f64) -> Self {
        Self {
            x,
            y,
            error: Some(error),
        }
    }
}

/// Straight line `y = slope x + intercept` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_error: f64,
    pub intercept_error: f64,
    /// Weighted (or plain) residual sum of squares.
    pub chi_squared: f64,
    pub points: usize,
    pub weighted: bool,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Least-squares line through `points`.
///
/// If every point carries an error the fit is weighted by `1/error^2` and the
/// reported errors are the absolute ones from the covariance. Without errors
/// the fit is unweighted and the errors are scaled by the residual variance
/// (zero for two points). Points are put in a canonical order before any
/// summation, so the result is bit-identical under permutation.
pub fn slope_fit(points: &[FitPoint]) -> Result<LineFit> {
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::validation("fit points must be finite"));
    }
    let with_errors = points.iter().filter(|p| p.error.is_some()).count();
    if with_errors != 0 && with_errors != points.len() {
        return Err(Error::validation(
            "either all fit points carry errors or none do",
        ));
    }
    let weighted = with_errors > 0 && !points.is_empty();
    if weighted && points.iter().any(|p| !(p.error.unwrap() > 0.0 && p.error.unwrap().is_finite())) {
        return Err(Error::validation("fit errors must be positive and finite"));
    }

    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.error.unwrap_or(0.0).total_cmp(&b.error.unwrap_or(0.0)))
    });
    let distinct = sorted.windows(2).filter(|w| w[1].x != w[0].x).count() + usize::from(!sorted.is_empty());
    if distinct < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least two distinct abscissae, got {distinct}"
        )));
    }

    let w: Vec<f64> = sorted
        .iter()
        .map(|p| p.error.map_or(1.0, |e| 1.0 / (e * e)))
        .collect();
    let sw: f64 = w.iter().sum();
    let xm = sorted.iter().zip(&w).map(|(p, w)| w * p.x).sum::<f64>() / sw;
    let ym = sorted.iter().zip(&w).map(|(p, w)| w * p.y).sum::<f64>() / sw;
    let sxx: f64 = sorted.iter().zip(&w).map(|(p, w)| w * (p.x - xm) * (p.x - xm)).sum();
    let sxy: f64 = sorted.iter().zip(&w).map(|(p, w)| w * (p.x - xm) * (p.y - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissae have no spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi_squared: f64 = sorted
        .iter()
        .zip(&w)
        .map(|(p, w)| {
            let r = p.y - (slope * p.x + intercept);
            w * r * r
        })
        .sum();

    let n = sorted.len();
    let scale = if weighted {
        1.0
    } else if n > 2 {
        chi_squared / (n - 2) as f64
    } else {
        0.0
    };
    let slope_var = scale / sxx;
    let intercept_var = scale * (1.0 / sw + xm * xm / sxx);
    Ok(LineFit {
        slope,
        intercept,
        slope_error: slope_var.sqrt(),
        intercept_error: intercept_var.sqrt(),
        chi_squared,
        points: n,
        weighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..6).map(|i| FitPoint::new(i as f64, 3.0 * i as f64)).collect();
        let fit = slope_fit(&pts).unwrap();
        assert_eq!(fit.slope, 3.0);
        assert_eq!(fit.slope_error, 0.0);
        assert_eq!(fit.intercept, 0.0);
    }

    #[test]
    fn weighted_errors_match_covariance() {
        // Two points with errors: slope error sqrt(e1^2 + e2^2) / dx.
        let fit = slope_fit(&[FitPoint::with_error(0.0, 1.0, 0.3), FitPoint::with_error(2.0, 5.0, 0.4)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-15);
        assert!((fit.slope_error - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unweighted_error_from_residuals() {
        let pts = [
            FitPoint::new(0.0, 0.0),
            FitPoint::new(1.0, 1.0),
            FitPoint::new(2.0, 1.0),
            FitPoint::new(3.0, 3.0),
        ];
        let fit = slope_fit(&pts).unwrap();
        // rss = 0.7, sxx = 5
        assert!((fit.slope - 0.9).abs() < 1e-15);
        assert!((fit.intercept + 0.1).abs() < 1e-15);
        assert!((fit.slope_error - (0.7f64 / 2.0 / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn degenerate() {
        assert!(matches!(slope_fit(&[FitPoint::new(1.0, 2.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            slope_fit(&[FitPoint::new(1.0, 2.0), FitPoint::new(1.0, 3.0)]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(slope_fit(&[]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn mixed_errors_rejected() {
        let pts = [FitPoint::new(0.0, 0.0), FitPoint::with_error(1.0, 1.0, 0.1)];
        assert!(matches!(slope_fit(&pts), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn permutation_is_bit_identical(
            pts in prop::collection::vec((-1e7f64..1e7, -1e-3f64..1e-3, 1e-6f64..1e-4), 3..12),
            seed in any::<u64>(),
        ) {
            let pts: Vec<_> = pts.iter().map(|&(x, y, e)| FitPoint::with_error(x, y, e)).collect();
            let mut shuffled = pts.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            match (slope_fit(&pts), slope_fit(&shuffled)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.slope.to_bits(), b.slope.to_bits());
                    prop_assert_eq!(a.slope_error.to_bits(), b.slope_error.to_bits());
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed fit outcome"),
            }
        }
    }
}
