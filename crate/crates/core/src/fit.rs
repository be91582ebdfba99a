//! Line fits and convex-envelope slopes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(LineFit { slope, intercept, residual: (ss / n).sqrt() })
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Vertices of the upper convex hull of points sorted by `x`.
pub fn upper_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], p) >= 0.0 {
            h.pop();
        }
        h.push(p);
    }
    h
}

/// Vertices of the lower convex hull of points sorted by `x`.
pub fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], p) <= 0.0 {
            h.pop();
        }
        h.push(p);
    }
    h
}

fn edge_slopes(h: &[(f64, f64)]) -> impl Iterator<Item = f64> + '_ {
    h.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
}

/// `(upper, lower)` envelope slopes: the steepest edge of the upper hull and
/// the shallowest edge of the lower hull. Both bracket the end-to-end chord.
pub fn envelope_slopes(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    let mut pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::DegenerateFit("abscissae must be distinct".into()));
    }
    let up = edge_slopes(&upper_hull(&pts)).fold(f64::NEG_INFINITY, f64::max);
    let lo = edge_slopes(&lower_hull(&pts)).fold(f64::INFINITY, f64::min);
    Ok((up, lo))
}

/// Start index of the trailing half of `n` samples.
pub fn trailing_half_start(n: usize) -> usize {
    n / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = least_squares(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);
        let (u, l) = envelope_slopes(&x, &y).unwrap();
        assert!((u - 3.0).abs() < 1e-14 && (l - 3.0).abs() < 1e-14);
    }

    #[test]
    fn envelopes_bracket_chord() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 2.0, 1.5, 4.0, 3.0];
        let (u, l) = envelope_slopes(&x, &y).unwrap();
        let chord = 3.0 / 4.0;
        assert!(l <= chord && chord <= u);
        assert_eq!(u, 2.0);
        assert_eq!(l, 0.75);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(least_squares(&[1.0], &[0.0]).is_err());
        assert!(envelope_slopes(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
