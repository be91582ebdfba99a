//! Orbit hit counts against balls and polynomial sublevel sets, the Fejér
//! kernel majorant, and the first-return bound for circle rotations.

use std::f64::consts::PI;

use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};
use crate::fit::{least_squares, LineFit};
use crate::poly::Polynomial;
use crate::torus::{dist_to_int, DiophantineClass, Dynamics, DynamicsKind, TorusPoint};

/// Constant used in the Fejér hit bound `C N (eps^nu + eps^{-A} / N)`.
pub const FEJER_CONSTANT: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Max,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    Ball { center: TorusPoint, radius: f64, metric: Metric },
    PolySublevel { poly: Polynomial, threshold: f64, sense: Sense },
    Union(Vec<TargetSet>),
}

impl TargetSet {
    pub fn ball(center: TorusPoint, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        Ok(TargetSet::Ball { center, radius, metric: Metric::Max })
    }

    pub fn euclidean_ball(center: TorusPoint, radius: f64) -> Result<Self> {
        let TargetSet::Ball { center, radius, .. } = Self::ball(center, radius)? else { unreachable!() };
        Ok(TargetSet::Ball { center, radius, metric: Metric::Euclidean })
    }

    /// Semialgebraic degree: 2 for balls, the total degree for sublevel
    /// sets, and the sum over the members of a union.
    pub fn degree(&self) -> u32 {
        match self {
            TargetSet::Ball { .. } => 2,
            TargetSet::PolySublevel { poly, .. } => poly.degree().max(1),
            TargetSet::Union(parts) => parts.iter().map(|p| p.degree()).sum::<u32>().max(1),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            TargetSet::Ball { center, .. } => Some(center.dim()),
            TargetSet::PolySublevel { poly, .. } => Some(poly.nvars()),
            TargetSet::Union(parts) => parts.first().and_then(|p| p.dim()),
        }
    }

    /// Membership of a point with coordinates in `[-1/2, 1/2)`. Ties count
    /// as hits for every sense.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            TargetSet::Ball { center, radius, metric } => {
                let gaps = center.coords().iter().zip(x).map(|(c, y)| dist_to_int(c - y));
                let dist = match metric {
                    Metric::Max => gaps.fold(0.0, f64::max),
                    Metric::Euclidean => gaps.map(|g| g * g).sum::<f64>().sqrt(),
                };
                dist <= *radius
            }
            TargetSet::PolySublevel { poly, threshold, sense } => {
                let v = poly.eval(x);
                match sense {
                    Sense::Le => v <= *threshold,
                    Sense::Ge => v >= *threshold,
                    Sense::Eq => v == *threshold,
                }
            }
            TargetSet::Union(parts) => parts.iter().any(|p| p.contains(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HitReport {
    pub n: usize,
    pub hits: usize,
    pub hit_indices: Vec<usize>,
    pub first_hit: Option<usize>,
}

/// Counts `1 <= k <= N` with `T^k x0` in `s`.
pub fn hit_count(d: &Dynamics, x0: &TorusPoint, s: &TargetSet, n: usize) -> Result<HitReport> {
    if n == 0 {
        return Err(Error::Precondition("N must be >= 1".into()));
    }
    if let Some(dim) = s.dim() {
        if dim != d.dim() {
            return Err(Error::DimensionMismatch { expected: d.dim(), got: dim });
        }
    }
    let mut traj = d.trajectory(x0)?;
    let mut hit_indices = Vec::new();
    for k in 1..=n {
        if s.contains(traj.advance()) {
            hit_indices.push(k);
        }
    }
    Ok(HitReport { n, hits: hit_indices.len(), first_hit: hit_indices.first().copied(), hit_indices })
}

/// `F_R(x) = (1/R) (sin(R x / 2) / sin(x / 2))^2`, with `F_R(0) = R`.
pub fn fejer_kernel(r: u32, x: f64) -> f64 {
    let rf = r as f64;
    let s = (x / 2.0).sin();
    if s.abs() < 1e-8 {
        // Taylor expansion about the removable singularity
        let x2 = x * x;
        return rf * (1.0 - (rf * rf - 1.0) * x2 / 12.0);
    }
    let q = (rf * x / 2.0).sin() / s;
    q * q / rf
}

/// `sum_{|m| < R} (1 - |m|/R) e^{i m x}`.
pub fn fejer_kernel_series(r: u32, x: f64) -> f64 {
    let rf = r as f64;
    let mut s = 1.0;
    for m in 1..r {
        s += 2.0 * (1.0 - m as f64 / rf) * (m as f64 * x).cos();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct FejerBound {
    pub lhs: usize,
    pub rhs: f64,
    pub n: usize,
    pub eps: f64,
    pub holds: bool,
    pub warning: Option<String>,
}

/// Hits of `T^k x0` (`1 <= k <= N`) in the max-norm ball `B(center, eps)`
/// against `C N (eps^nu + eps^{-A} / N)`.
pub fn fejer_hit_bound(
    d: &Dynamics,
    x0: &TorusPoint,
    center: &TorusPoint,
    eps: f64,
    n: usize,
    a: f64,
) -> Result<FejerBound> {
    if d.kind != DynamicsKind::Shift {
        return Err(Error::InvalidArgument("the Fejér bound applies to shifts".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let eps_c = eps.min(0.5);
    let report = hit_count(d, x0, &TargetSet::ball(center.clone(), eps_c)?, n)?;
    let nu = d.dim() as i32;
    let nf = n as f64;
    let rhs = FEJER_CONSTANT * nf * (eps_c.powi(nu) + eps_c.powf(-a) / nf);
    let holds = report.hits as f64 <= rhs;
    let mut warning = None;
    if matches!(d.frequency.class, DiophantineClass::Unclassified) {
        warning = Some("frequency has no Diophantine class; the bound is not guaranteed".into());
    }
    if !holds {
        warning = Some(format!("bound violated: {} hits > {rhs}", report.hits));
    }
    Ok(FejerBound { lhs: report.hits, rhs, n, eps: eps_c, holds, warning })
}

/// `eps = N^{-1/(nu + A)}`.
pub fn fejer_radius(n: usize, nu: usize, a: f64) -> f64 {
    (n as f64).powf(-1.0 / (nu as f64 + a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcHitReport {
    pub max_first_hit: usize,
    pub bound: i128,
    pub pass: bool,
}

/// For every phase `x = i / grid` the first `j >= 1` with `x + j omega` in
/// the arc `[start, start + length)` must satisfy `j <= q_n + q_{n-1} - 1`.
pub fn arc_hit_check(cf: &ContinuedFraction, n: usize, start: f64, length: f64, grid: usize) -> Result<ArcHitReport> {
    if n == 0 || n >= cf.convergents.len() {
        return Err(Error::InvalidArgument(format!(
            "convergent index {n} outside 1..{}",
            cf.convergents.len()
        )));
    }
    if grid == 0 {
        return Err(Error::Precondition("grid must be >= 1".into()));
    }
    let qn = cf.q(n);
    if !(length > 1.0 / qn as f64) {
        return Err(Error::Precondition(format!("arc length {length} must exceed 1/q_n = 1/{qn}")));
    }
    let bound = qn + cf.q(n - 1) - 1;
    let omega = cf.omega;
    let len = length.min(1.0);
    let limit = (10 * bound + 10) as usize;
    let mut worst = 0;
    for i in 0..grid {
        let x = i as f64 / grid as f64;
        let mut j = 1;
        loop {
            let y = x + j as f64 * omega - start;
            let y = y - y.floor();
            if y < len || j > limit {
                break;
            }
            j += 1;
        }
        worst = worst.max(j);
    }
    Ok(ArcHitReport { max_first_hit: worst, bound, pass: (worst as i128) <= bound })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaFit {
    /// Minus the slope of `ln(hits/N)` against `ln N`.
    pub delta_hat: f64,
    pub residual: f64,
    pub counts: Vec<(usize, usize)>,
}

/// Fits `hits/N ~ N^{-delta}` for balls of radius `N^{-delta_try}` around `center`.
pub fn delta_fit(
    d: &Dynamics,
    x0: &TorusPoint,
    center: &TorusPoint,
    delta_try: f64,
    n_grid: &[usize],
) -> Result<DeltaFit> {
    if n_grid.len() < 2 {
        return Err(Error::Precondition("need at least two N values".into()));
    }
    let lo = *n_grid.iter().min().unwrap() as f64;
    let hi = *n_grid.iter().max().unwrap() as f64;
    if lo < 1.0 || hi / lo < 100.0 - 1e-9 {
        return Err(Error::Precondition("N grid must span at least two decades".into()));
    }
    let mut counts = Vec::with_capacity(n_grid.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in n_grid {
        let eps = (n as f64).powf(-delta_try);
        let r = hit_count(d, x0, &TargetSet::ball(center.clone(), eps)?, n)?;
        counts.push((n, r.hits));
        if r.hits > 0 {
            xs.push((n as f64).ln());
            ys.push((r.hits as f64 / n as f64).ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two N values with hits".into()));
    }
    let LineFit { slope, residual, .. } = least_squares(&xs, &ys)?;
    Ok(DeltaFit { delta_hat: -slope, residual, counts })
}

/// `(1/2 pi) int_{-pi}^{pi} F_R` by the composite trapezoid rule, exact for
/// trigonometric polynomials of degree below the panel count.
pub fn fejer_mean(r: u32, panels: usize) -> f64 {
    let h = 2.0 * PI / panels as f64;
    (0..panels).map(|i| fejer_kernel(r, -PI + i as f64 * h)).sum::<f64>() / panels as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::{expand, DoubleDouble};
    use crate::torus::{Frequency, GOLDEN};

    fn golden() -> Dynamics {
        Dynamics::shift(Frequency::golden())
    }

    #[test]
    fn fejer_values() {
        assert_eq!(fejer_kernel(16, 0.0), 16.0);
        assert!((fejer_kernel(5, PI) - 0.2).abs() < 1e-15);
        for r in [1, 3, 16, 64] {
            assert!((fejer_mean(r, 512) - 1.0).abs() < 1e-12);
            for i in 0..200 {
                let x = -PI + 2.0 * PI * i as f64 / 199.0;
                assert!((fejer_kernel(r, x) - fejer_kernel_series(r, x)).abs() < 1e-10);
                assert!(fejer_kernel(r, x) >= 0.0);
            }
        }
        // continuity across the removable singularity
        assert!((fejer_kernel(7, 1e-9) - 7.0).abs() < 1e-12);
        assert!((fejer_kernel(7, 2e-8) - fejer_kernel_series(7, 2e-8)).abs() < 1e-10);
    }

    #[test]
    fn whole_torus_and_empty_ball() {
        let x0 = TorusPoint::origin(1);
        let all = hit_count(&golden(), &x0, &TargetSet::ball(x0.clone(), 0.5).unwrap(), 100).unwrap();
        assert_eq!(all.hits, 100);
        assert_eq!(all.first_hit, Some(1));
        let none = hit_count(&golden(), &x0, &TargetSet::ball(x0.clone(), 0.0).unwrap(), 100).unwrap();
        assert_eq!(none.hits, 0);
        assert_eq!(none.first_hit, None);
    }

    #[test]
    fn golden_ball_count_matches_enumeration() {
        let x0 = TorusPoint::origin(1);
        let r = hit_count(&golden(), &x0, &TargetSet::ball(x0.clone(), 0.1).unwrap(), 100).unwrap();
        let brute: Vec<usize> = (1..=100)
            .filter(|&k| {
                let y = k as f64 * GOLDEN;
                (y - y.round()).abs() <= 0.1
            })
            .collect();
        assert_eq!(r.hit_indices, brute);
        assert_eq!(r.hits, 20);
    }

    #[test]
    fn polynomial_sublevel_ties_are_hits() {
        // p(x) = x on [-1/2, 1/2): x <= 0 and x >= 0 both hit x = 0
        let p = Polynomial::from_terms(1, vec![(vec![1], 1.0)]);
        for sense in [Sense::Le, Sense::Ge, Sense::Eq] {
            let s = TargetSet::PolySublevel { poly: p.clone(), threshold: 0.0, sense };
            assert!(s.contains(&[0.0]));
        }
        let s = TargetSet::PolySublevel { poly: p, threshold: 0.0, sense: Sense::Le };
        assert!(s.contains(&[-0.2]) && !s.contains(&[0.2]));
        assert_eq!(s.degree(), 1);
    }

    #[test]
    fn union_counts_subadditive() {
        let x0 = TorusPoint::new(vec![0.1]);
        let a = TargetSet::ball(TorusPoint::new(vec![0.0]), 0.05).unwrap();
        let b = TargetSet::ball(TorusPoint::new(vec![0.3]), 0.05).unwrap();
        let u = TargetSet::Union(vec![a.clone(), b.clone()]);
        let ha = hit_count(&golden(), &x0, &a, 1000).unwrap().hits;
        let hb = hit_count(&golden(), &x0, &b, 1000).unwrap().hits;
        let hu = hit_count(&golden(), &x0, &u, 1000).unwrap().hits;
        assert_eq!(hu, ha + hb);
        assert_eq!(u.degree(), 4);
    }

    #[test]
    fn fejer_bound_golden() {
        let x0 = TorusPoint::origin(1);
        let r = fejer_hit_bound(&golden(), &x0, &x0, 0.01, 10_000, 1.0).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.warning.is_none());
    }

    #[test]
    fn fejer_bound_rational_warns() {
        let d = Dynamics::shift(Frequency::unclassified(vec![1.0 / 3.0]));
        let x0 = TorusPoint::origin(1);
        let r = fejer_hit_bound(&d, &x0, &x0, 0.01, 30_000, 1.0).unwrap();
        assert!((r.lhs as f64 - 10_000.0).abs() <= 1.0);
        assert!(!r.holds);
        assert!(r.warning.is_some());
        // clamp: eps >= 1/2 covers the torus
        let r = fejer_hit_bound(&golden(), &x0, &x0, 0.7, 1000, 1.0).unwrap();
        assert_eq!(r.lhs, 1000);
        assert!(r.holds);
    }

    #[test]
    fn arc_hit_golden_levels() {
        let cf = expand(DoubleDouble::golden(), DoubleDouble::EPS, 30).unwrap();
        let n = cf.index_of_q(8).unwrap();
        let r = arc_hit_check(&cf, n, 0.3, 0.15, 10_000).unwrap();
        assert_eq!(r.bound, 12);
        assert!(r.pass, "{r:?}");
        let full = arc_hit_check(&cf, n, 0.0, 1.0, 100).unwrap();
        assert_eq!(full.max_first_hit, 1);
        assert!(arc_hit_check(&cf, n, 0.0, 1.0 / 8.0, 100).is_err());
    }

    #[test]
    fn delta_fit_shift_and_periodic() {
        let x0 = TorusPoint::origin(1);
        let grid = [100, 1000, 10_000, 100_000];
        let f = delta_fit(&golden(), &x0, &TorusPoint::new(vec![0.25]), 0.5, &grid).unwrap();
        assert!((f.delta_hat - 0.5).abs() < 0.1, "{f:?}");
        let d = Dynamics::shift(Frequency::unclassified(vec![1.0 / 3.0]));
        let f = delta_fit(&d, &x0, &x0, 0.5, &grid).unwrap();
        assert!(f.delta_hat.abs() < 0.01, "{f:?}");
        assert!(delta_fit(&golden(), &x0, &x0, 0.5, &[100, 200]).is_err());
    }
}
