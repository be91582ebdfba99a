//! Transfer-matrix cocycles, Lyapunov exponents and large-deviation sets.
//!
//! Products are carried as a unit-norm matrix times `exp(log_mag)` and
//! renormalized after every factor, so `n` can run to `10^8` without overflow.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{CertifiedApprox, Potential, PotentialKind};
use crate::torus::{Dynamics, TorusPoint};

pub type C64 = Complex64;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest `|n|` accepted by [`transfer`].
pub const MAX_STEPS: u64 = 100_000_000;

/// A 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    /// `((v - z, -1), (1, 0))`.
    #[inline]
    pub fn step(v: f64, z: C64) -> Mat2 {
        Mat2([[C64::new(v, 0.0) - z, -ONE], [ONE, ZERO]])
    }

    /// Inverse of [`Mat2::step`]: `((0, 1), (-1, v - z))`.
    #[inline]
    pub fn step_inverse(v: f64, z: C64) -> Mat2 {
        Mat2([[ZERO, ONE], [-ONE, C64::new(v, 0.0) - z]])
    }

    #[inline]
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    /// Left-multiplication by a step matrix, written out.
    #[inline]
    fn step_times(v: f64, z: C64, m: &Mat2) -> Mat2 {
        let e = C64::new(v, 0.0) - z;
        let r = &m.0;
        Mat2([
            [e * r[0][0] - r[1][0], e * r[0][1] - r[1][1]],
            [r[0][0], r[0][1]],
        ])
    }

    #[inline]
    fn step_inverse_times(v: f64, z: C64, m: &Mat2) -> Mat2 {
        let e = C64::new(v, 0.0) - z;
        let r = &m.0;
        Mat2([
            [r[1][0], r[1][1]],
            [-r[0][0] + e * r[1][0], -r[0][1] + e * r[1][1]],
        ])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().flatten().map(|v| v.norm_sqr()).sum()
    }

    /// Largest singular value in closed form. The determinant phase is
    /// rotated out so that `F -+ 2|det|` are sums of squares, which avoids
    /// cancellation when the two singular values are close.
    pub fn spectral_norm(&self) -> f64 {
        let det = self.det();
        let dn = det.norm();
        let rot = if dn > 0.0 { (det / dn).sqrt().conj() } else { ONE };
        let [[a, b], [c, d]] = self.scale_c(rot).0;
        let plus = (a + d.conj()).norm_sqr() + (b - c.conj()).norm_sqr();
        let minus = (a - d.conj()).norm_sqr() + (b + c.conj()).norm_sqr();
        0.5 * (plus.sqrt() + minus.sqrt())
    }

    fn scale_c(&self, s: C64) -> Mat2 {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(o.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `exp(log_mag) * unit` with `||unit|| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaledMatrix {
    pub unit: Mat2,
    pub log_mag: f64,
    /// Phase of the determinant of the true product.
    pub det_phase: C64,
}

impl LogScaledMatrix {
    pub fn identity() -> Self {
        LogScaledMatrix { unit: Mat2::IDENTITY, log_mag: 0.0, det_phase: ONE }
    }

    #[inline]
    fn renormalize(&mut self) {
        let s = self.unit.spectral_norm();
        self.unit = self.unit.scale(1.0 / s);
        self.log_mag += s.ln();
    }

    /// The true matrix; overflows for large `log_mag`.
    pub fn reconstruct(&self) -> Mat2 {
        self.unit.scale(self.log_mag.exp())
    }

    /// Determinant of the true matrix, computed as `det(unit) e^{2 log_mag}`.
    /// `det(unit)` is of order `e^{-2 log_mag}`, so this is only accurate while
    /// `log_mag` is small; see [`log_abs_det`] for long products.
    pub fn det(&self) -> C64 {
        self.unit.det() * (2.0 * self.log_mag).exp()
    }

    /// `self * rhs`.
    pub fn compose(&self, rhs: &LogScaledMatrix) -> LogScaledMatrix {
        let mut out = LogScaledMatrix {
            unit: self.unit.mul(&rhs.unit),
            log_mag: self.log_mag + rhs.log_mag,
            det_phase: self.det_phase * rhs.det_phase,
        };
        out.renormalize();
        out
    }
}

/// Which orbit point the first factor samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// `A_n(x) = M(T^n x) ... M(T^1 x)`.
    #[default]
    FromFirstIterate,
    /// `A_n(x) = M(T^{n-1} x) ... M(T^0 x)`.
    FromZero,
}

/// Product of step matrices for the potential values in `values`, newest factor on the left.
pub fn forward_product(values: impl IntoIterator<Item = f64>, z: C64) -> LogScaledMatrix {
    let mut acc = LogScaledMatrix::identity();
    for v in values {
        acc.unit = Mat2::step_times(v, z, &acc.unit);
        acc.renormalize();
    }
    acc
}

/// Product of inverse step matrices, newest factor on the left.
pub fn backward_product(values: impl IntoIterator<Item = f64>, z: C64) -> LogScaledMatrix {
    let mut acc = LogScaledMatrix::identity();
    for v in values {
        acc.unit = Mat2::step_inverse_times(v, z, &acc.unit);
        acc.renormalize();
    }
    acc
}

/// Running `max_{1<=j<=n} log ||A_j||` for forward or backward products.
pub fn running_max_log_norm(values: impl IntoIterator<Item = f64>, z: C64, backward: bool) -> f64 {
    let mut acc = LogScaledMatrix::identity();
    let mut best = f64::NEG_INFINITY;
    for v in values {
        acc.unit = if backward {
            Mat2::step_inverse_times(v, z, &acc.unit)
        } else {
            Mat2::step_times(v, z, &acc.unit)
        };
        acc.renormalize();
        best = best.max(acc.log_mag);
    }
    best
}

/// Potential values along an orbit, `lambda f(T^k x)`.
pub struct OrbitValues<'a> {
    f: &'a Potential,
    traj: crate::torus::Trajectory<'a>,
    first: Option<f64>,
}

impl Iterator for OrbitValues<'_> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        if let Some(v) = self.first.take() {
            return Some(v);
        }
        Some(self.f.eval_coords(self.traj.advance()))
    }
}

/// `lambda f(T^1 x), lambda f(T^2 x), ...` (or starting at `T^0 x`).
pub fn forward_values<'a>(
    f: &'a Potential,
    d: &'a Dynamics,
    x: &TorusPoint,
    sampling: Sampling,
) -> Result<OrbitValues<'a>> {
    check_dims(f, d, x)?;
    let first = match sampling {
        Sampling::FromFirstIterate => None,
        Sampling::FromZero => Some(f.eval_coords(x.coords())),
    };
    Ok(OrbitValues { f, traj: d.trajectory(x)?, first })
}

/// `lambda f(T^0 x), lambda f(T^{-1} x), ...`: the factors of the left cocycle.
pub fn backward_values<'a>(f: &'a Potential, d: &'a Dynamics, x: &TorusPoint) -> Result<OrbitValues<'a>> {
    check_dims(f, d, x)?;
    Ok(OrbitValues { f, traj: d.back_trajectory(x)?, first: Some(f.eval_coords(x.coords())) })
}

fn check_dims(f: &Potential, d: &Dynamics, x: &TorusPoint) -> Result<()> {
    if f.nu() != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: f.nu() });
    }
    if x.dim() != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: x.dim() });
    }
    Ok(())
}

/// `A_n^{f,z}(x)` for signed `n`; negative `n` gives the left cocycle
/// `A_{-m}(x) = A_m(T^{-m} x)^{-1}`.
pub fn transfer(f: &Potential, d: &Dynamics, x: &TorusPoint, z: C64, n: i64) -> Result<LogScaledMatrix> {
    transfer_with(f, d, x, z, n, Sampling::FromFirstIterate)
}

pub fn transfer_with(
    f: &Potential,
    d: &Dynamics,
    x: &TorusPoint,
    z: C64,
    n: i64,
    sampling: Sampling,
) -> Result<LogScaledMatrix> {
    let m = n.unsigned_abs();
    if m > MAX_STEPS {
        return Err(Error::StepCap { requested: m, cap: MAX_STEPS });
    }
    let mut bad = None;
    let guard = |(i, v): (usize, f64)| {
        if !v.is_finite() && bad.is_none() {
            bad = Some(i as i64);
        }
        v
    };
    let out = if n >= 0 {
        let vals = forward_values(f, d, x, sampling)?.take(m as usize).enumerate().map(guard);
        forward_product(vals, z)
    } else {
        let vals = backward_values(f, d, x)?.take(m as usize).enumerate().map(guard);
        backward_product(vals, z)
    };
    if let Some(i) = bad {
        return Err(Error::NonFinite { index: if n >= 0 { i as i64 + 1 } else { -(i as i64) } });
    }
    Ok(out)
}

/// `ln |det A_n(x)|` for `n >= 1` without forming the product. For 2x2
/// matrices `||A^{-1}|| = ||A|| / |det A|`, and `A_n(x)^{-1} = A_{-n}(T^n x)`
/// is computed independently from inverse steps.
pub fn log_abs_det(f: &Potential, d: &Dynamics, x: &TorusPoint, z: C64, n: usize) -> Result<f64> {
    let fwd = transfer(f, d, x, z, n as i64)?;
    let y = d.iterate(x, n as i64)?;
    let inv = transfer(f, d, &y, z, -(n as i64))?;
    Ok(fwd.log_mag - inv.log_mag)
}

/// Monte Carlo estimate of `L_n(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub z: C64,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub num_phases: usize,
    pub seed: u64,
}

/// Uniform phase number `index` of the stream keyed by `seed`; independent
/// of how the indices are split across threads.
pub fn sample_phase(seed: u64, index: u64, dim: usize) -> TorusPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    TorusPoint::new((0..dim).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>())
}

/// `(1/k) log ||A_k^{f,z}(x)||` at each phase, in index order.
pub fn growth_rates(f: &Potential, d: &Dynamics, z: C64, k: usize, phases: &[TorusPoint]) -> Result<Vec<f64>> {
    phases
        .par_iter()
        .map(|x| transfer(f, d, x, z, k as i64).map(|m| m.log_mag / k as f64))
        .collect()
}

pub fn sample_phases(seed: u64, count: usize, dim: usize) -> Vec<TorusPoint> {
    (0..count as u64).into_par_iter().map(|i| sample_phase(seed, i, dim)).collect()
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn lyapunov(
    f: &Potential,
    d: &Dynamics,
    z: C64,
    n: usize,
    num_phases: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::Precondition("n must be >= 1".into()));
    }
    if num_phases < 2 {
        return Err(Error::Precondition("need at least 2 phases".into()));
    }
    let phases = sample_phases(seed, num_phases, d.dim());
    let rates = growth_rates(f, d, z, n, &phases)?;
    let (mean, stderr) = mean_and_stderr(&rates);
    Ok(LyapunovEstimate { z, n, mean, stderr, num_phases, seed })
}

/// Reference value for `L(z)`: three-point Richardson extrapolation of
/// `L_n` on `n = 125, 250, 500`, assuming `L_n = L + a/n + b/n^2`.
pub fn lyapunov_reference(f: &Potential, d: &Dynamics, z: C64, num_phases: usize, seed: u64) -> Result<f64> {
    let l1 = lyapunov(f, d, z, 125, num_phases, seed)?.mean;
    let l2 = lyapunov(f, d, z, 250, num_phases, seed)?.mean;
    let l4 = lyapunov(f, d, z, 500, num_phases, seed)?.mean;
    Ok((8.0 * l4 - 6.0 * l2 + l1) / 3.0)
}

/// Monte Carlo description of `V_k^f(z, a_frac * l_ref)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSet {
    pub z: C64,
    pub k: usize,
    pub a_frac: f64,
    pub l_ref: f64,
    /// `(1/k) log ||A_k||` per sample.
    pub rates: Vec<f64>,
}

impl DeviationSet {
    pub fn level(&self) -> f64 {
        self.a_frac * self.l_ref
    }

    pub fn members(&self) -> usize {
        let lv = self.level();
        self.rates.iter().filter(|&&r| r >= lv).count()
    }

    pub fn measure(&self) -> f64 {
        self.members() as f64 / self.rates.len() as f64
    }

    /// Binomial standard error of [`DeviationSet::measure`].
    pub fn stderr(&self) -> f64 {
        let p = self.measure();
        (p * (1.0 - p) / self.rates.len() as f64).sqrt()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn deviation_set(
    f: &Potential,
    d: &Dynamics,
    z: C64,
    k: usize,
    a_frac: f64,
    l_ref: f64,
    num_samples: usize,
    seed: u64,
) -> Result<DeviationSet> {
    if !(l_ref > 0.0) {
        return Err(Error::Precondition("Lyapunov reference must be positive".into()));
    }
    if k == 0 || num_samples == 0 {
        return Err(Error::Precondition("k and num_samples must be >= 1".into()));
    }
    let phases = sample_phases(seed, num_samples, d.dim());
    let rates = growth_rates(f, d, z, k, &phases)?;
    Ok(DeviationSet { z, k, a_frac, l_ref, rates })
}

/// `|V_k^f(z, a_frac * l_ref)|` with its binomial standard error.
#[allow(clippy::too_many_arguments)]
pub fn deviation_measure(
    f: &Potential,
    d: &Dynamics,
    z: C64,
    k: usize,
    a_frac: f64,
    l_ref: f64,
    num_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if a_frac <= 0.0 {
        if !(l_ref > 0.0) {
            return Err(Error::Precondition("Lyapunov reference must be positive".into()));
        }
        // norms of unimodular matrices are >= 1
        return Ok((1.0, 0.0));
    }
    let s = deviation_set(f, d, z, k, a_frac, l_ref, num_samples, seed)?;
    Ok((s.measure(), s.stderr()))
}

/// Exponent levels `1 - tau/16 > a > c > d > 1 - tau/8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionLevels {
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

impl InclusionLevels {
    /// `a = 1 - tau/15`, `c = 1 - tau/12`, `d = 1 - tau/9`.
    pub fn for_tau(tau: f64) -> Self {
        InclusionLevels { a: 1.0 - tau / 15.0, c: 1.0 - tau / 12.0, d: 1.0 - tau / 9.0 }
    }

    pub fn validate(&self, tau: f64) -> Result<()> {
        let ok = 1.0 - tau / 16.0 > self.a && self.a > self.c && self.c > self.d && self.d > 1.0 - tau / 8.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "levels must satisfy 1 - tau/16 > a > c > d > 1 - tau/8 (tau={tau}, {self:?})"
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct InclusionConfig {
    pub tau: f64,
    pub levels: InclusionLevels,
    pub l_ref: f64,
    /// Slack `eps` in `N0 = ceil(k^{sigma + eps})`.
    pub schedule_eps: f64,
    pub num_phases: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionReport {
    pub tested: usize,
    pub violations: usize,
    /// In `V^f(E, aL)` but not in `V^{f~}(E, cL)`.
    pub first_stage: usize,
    /// In `V^{f~}(E, cL)` but not in `V^f(z, dL)`.
    pub second_stage: usize,
    pub outer_members: usize,
    pub n0: u32,
    /// `N1(k)` from the degree schedule.
    pub n1_schedule: u32,
    /// Total degree actually used by the polynomial.
    pub n1_used: u32,
    pub approx_sup_error: f64,
    /// Upper edge `exp(-tau k L / ||f||)` for `|E - z|`.
    pub energy_radius: f64,
}

/// Gevrey exponent used in degree schedules (1 for trigonometric polynomials).
pub fn gevrey_sigma(f: &Potential) -> f64 {
    match f.kind() {
        PotentialKind::TrigPoly => 1.0,
        PotentialKind::Gevrey { sigma, .. } => sigma,
    }
}

/// Builds the polynomial approximant used by the inclusion chain at scale `k`.
pub fn good_set_approximant(f: &Potential, k: usize, eps: f64) -> Result<(CertifiedApprox, u32, u32)> {
    let sigma = gevrey_sigma(f);
    let n0 = crate::potential::taylor_degree_schedule(k, sigma, eps) as u32;
    let n0 = n0.min(f.degree().max(1));
    let trunc = f.truncate_fourier(n0);
    let schedule = crate::potential::taylor_degree_schedule(k, sigma, eps).max(1);
    // beyond machine precision a higher degree changes nothing, so the
    // schedule only caps the tolerance-driven degree
    let tol = 1e-15 * f.sup_norm_bound().max(1e-300);
    let poly = match trunc.polynomialize_with(crate::potential::DegreeRule::Tolerance(tol), schedule) {
        Ok(p) => p,
        Err(Error::DegreeCap { .. }) => trunc.polynomialize_degree(schedule)?,
        Err(e) => return Err(e),
    };
    let n1_sched = crate::potential::n1_schedule(k, sigma, f.nu(), eps);
    Ok((poly, n0, n1_sched))
}

/// Samples phases and checks
/// `V_k^f(E, aL) ⊂ V_k^{f~}(E, cL) ⊂ V_k^f(z, dL)` on each.
pub fn inclusion_check(
    f: &Potential,
    d: &Dynamics,
    e: f64,
    z: C64,
    k: usize,
    cfg: &InclusionConfig,
) -> Result<InclusionReport> {
    cfg.levels.validate(cfg.tau)?;
    if !(cfg.l_ref > 0.0) {
        return Err(Error::Precondition("Lyapunov reference must be positive".into()));
    }
    let fnorm = f.sup_norm_bound();
    let radius = (-cfg.tau * k as f64 * cfg.l_ref / fnorm).exp();
    let dist = (z - C64::new(e, 0.0)).norm();
    if !(dist < radius) && dist != 0.0 {
        return Err(Error::Precondition(format!("|E - z| = {dist:.3e} not below {radius:.3e}")));
    }
    let (approx, n0, n1_sched) = good_set_approximant(f, k, cfg.schedule_eps)?;
    let ez = C64::new(e, 0.0);
    let l = cfg.l_ref;
    let kf = k as f64;
    let phases = sample_phases(cfg.seed, cfg.num_phases, d.dim());
    let flags: Vec<(bool, bool, bool)> = phases
        .par_iter()
        .map(|x| {
            let r_f = transfer(f, d, x, ez, k as i64)?.log_mag / kf;
            let mut t = d.trajectory(x)?;
            let vals = (0..k).map(|_| approx.eval_coords(t.advance())).collect::<Vec<_>>();
            let r_approx = forward_product(vals, ez).log_mag / kf;
            let r_z = transfer(f, d, x, z, k as i64)?.log_mag / kf;
            let outer = r_f >= cfg.levels.a * l;
            let mid = r_approx >= cfg.levels.c * l;
            let inner = r_z >= cfg.levels.d * l;
            Ok((outer, outer && !mid, mid && !inner))
        })
        .collect::<Result<Vec<_>>>()?;
    let first_stage = flags.iter().filter(|f| f.1).count();
    let second_stage = flags.iter().filter(|f| f.2).count();
    Ok(InclusionReport {
        tested: phases.len(),
        violations: first_stage + second_stage,
        first_stage,
        second_stage,
        outer_members: flags.iter().filter(|f| f.0).count(),
        n0,
        n1_schedule: n1_sched,
        n1_used: approx.degree,
        approx_sup_error: approx.sup_error,
        energy_radius: radius,
    })
}

/// Smallest `1 <= j <= j_max` with `(2/k) log ||A_k^{f,z}(T^j x)|| >= d_frac * l_ref`.
#[allow(clippy::too_many_arguments)]
pub fn growth_first_hit(
    f: &Potential,
    d: &Dynamics,
    x: &TorusPoint,
    z: C64,
    k: usize,
    d_frac: f64,
    l_ref: f64,
    j_max: usize,
) -> Result<Option<usize>> {
    if j_max == 0 {
        return Err(Error::Precondition("j_max must be >= 1".into()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    let threshold = d_frac * l_ref;
    // window of values lambda f(T^{j+1} x) .. lambda f(T^{j+k} x)
    let mut values = forward_values(f, d, x, Sampling::FromFirstIterate)?;
    let mut window: std::collections::VecDeque<f64> = (&mut values).take(k + 1).collect();
    for j in 1..=j_max {
        window.pop_front();
        let m = forward_product(window.iter().copied(), z);
        if 2.0 * m.log_mag / k as f64 >= threshold {
            return Ok(Some(j));
        }
        window.push_back(values.next().expect("orbit iterator is infinite"));
    }
    Ok(None)
}

/// A potential sampled along one orbit, with optional local modifications.
#[derive(Debug, Clone)]
pub struct SampledPotential {
    pub f: Potential,
    /// Added to the value at the given orbit index.
    pub bumps: Vec<(i64, f64)>,
}

impl SampledPotential {
    pub fn new(f: Potential) -> Self {
        SampledPotential { f, bumps: Vec::new() }
    }

    pub fn with_bump(mut self, index: i64, size: f64) -> Self {
        self.bumps.push((index, size));
        self
    }

    fn bump_at(&self, k: i64) -> f64 {
        self.bumps.iter().filter(|(i, _)| *i == k).map(|(_, s)| s).sum()
    }

    /// `log ||A_n||` for every `1 <= |n| <= n_max`: (forward, backward).
    fn log_norms(&self, d: &Dynamics, x: &TorusPoint, z: C64, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let fw = forward_values(&self.f, d, x, Sampling::FromFirstIterate)?
            .take(n_max)
            .enumerate()
            .map(|(i, v)| v + self.bump_at(i as i64 + 1));
        let bw = backward_values(&self.f, d, x)?
            .take(n_max)
            .enumerate()
            .map(|(i, v)| v + self.bump_at(-(i as i64)));
        let mut out_f = Vec::with_capacity(n_max);
        let mut acc = LogScaledMatrix::identity();
        for v in fw {
            acc.unit = Mat2::step_times(v, z, &acc.unit);
            acc.renormalize();
            out_f.push(acc.log_mag);
        }
        let mut out_b = Vec::with_capacity(n_max);
        let mut acc = LogScaledMatrix::identity();
        for v in bw {
            acc.unit = Mat2::step_inverse_times(v, z, &acc.unit);
            acc.renormalize();
            out_b.push(acc.log_mag);
        }
        Ok((out_f, out_b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparabilityReport {
    /// `max |log||A^{v2}|| - log||A^{v1}||| / ln(1/eps)` over the grid.
    pub exponent: f64,
    pub pass: bool,
}

/// Empirical comparability exponent between two sampled potentials at
/// energies `E + i eps`, over `1 <= |n| <= ln(1/eps)`. The second operator
/// is evaluated at `E + energy_shift`.
#[allow(clippy::too_many_arguments)]
pub fn comparability_check(
    v1: &SampledPotential,
    v2: &SampledPotential,
    d: &Dynamics,
    x: &TorusPoint,
    energies: &[f64],
    eps_grid: &[f64],
    energy_shift: f64,
    a_fit: f64,
) -> Result<ComparabilityReport> {
    if energies.is_empty() || eps_grid.is_empty() {
        return Err(Error::Precondition("energy and epsilon grids must be nonempty".into()));
    }
    let mut worst: f64 = 0.0;
    for &eps in eps_grid {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1], got {eps}")));
        }
        let n_max = (1.0 / eps).ln().floor() as usize;
        if n_max == 0 {
            continue;
        }
        let scale = (1.0 / eps).ln();
        for &e in energies {
            let (f1, b1) = v1.log_norms(d, x, C64::new(e, eps), n_max)?;
            let (f2, b2) = v2.log_norms(d, x, C64::new(e + energy_shift, eps), n_max)?;
            for (a, b) in f1.iter().zip(&f2).chain(b1.iter().zip(&b2)) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    Ok(ComparabilityReport { exponent: worst, pass: worst <= a_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{Frequency, GOLDEN};

    fn golden_shift() -> Dynamics {
        Dynamics::shift(Frequency::golden())
    }

    #[test]
    fn zero_potential_four_steps_is_identity() {
        let d = golden_shift();
        let m = transfer(&Potential::zero(1), &d, &TorusPoint::origin(1), ZERO, 4).unwrap();
        assert!(m.reconstruct().max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!(m.log_mag.abs() < 1e-15);
    }

    #[test]
    fn single_factor_by_hand() {
        // f = 2 cos(2 pi x), omega = 0, x = 0, z = 1: ((1, -1), (1, 0))
        let d = Dynamics::shift(Frequency::unclassified(vec![0.0]));
        let f = Potential::cosine(2.0);
        let m = transfer(&f, &d, &TorusPoint::origin(1), C64::new(1.0, 0.0), 1).unwrap();
        let want = Mat2([[ONE, -ONE], [ONE, ZERO]]);
        assert!(m.reconstruct().max_abs_diff(&want) < 1e-14);
        // singular values of ((1,-1),(1,0)): sqrt((3 +- sqrt 5)/2)
        let s = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((m.log_mag - s.ln()).abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let m = Mat2([
            [C64::new(0.3, -1.2), C64::new(2.0, 0.5)],
            [C64::new(-0.7, 0.1), C64::new(1.1, 1.9)],
        ]);
        // power iteration on M^* M
        let mut v = [ONE, C64::new(0.3, 0.2)];
        for _ in 0..200 {
            let w = [m.0[0][0] * v[0] + m.0[0][1] * v[1], m.0[1][0] * v[0] + m.0[1][1] * v[1]];
            let u = [
                m.0[0][0].conj() * w[0] + m.0[1][0].conj() * w[1],
                m.0[0][1].conj() * w[0] + m.0[1][1].conj() * w[1],
            ];
            let nrm = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
            v = [u[0] / nrm, u[1] / nrm];
        }
        let w = [m.0[0][0] * v[0] + m.0[0][1] * v[1], m.0[1][0] * v[0] + m.0[1][1] * v[1]];
        let s = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        assert!((m.spectral_norm() - s).abs() < 1e-13 * s);
        assert!((Mat2::IDENTITY.spectral_norm() - 1.0).abs() < 1e-16);
    }

    #[test]
    fn left_cocycle_inverts_right() {
        let f = Potential::cosine(4.0);
        let d = golden_shift();
        let x = TorusPoint::new(vec![0.123]);
        let z = C64::new(0.4, 0.01);
        for m in [1i64, 7, 40] {
            let left = transfer(&f, &d, &x, z, -m).unwrap();
            let y = d.iterate(&x, -m).unwrap();
            let right = transfer(&f, &d, &y, z, m).unwrap();
            // the inverse of an SL(2) matrix is its adjugate
            let [[a, b], [c, dd]] = right.unit.0;
            let adj = Mat2([[dd, -b], [-c, a]]);
            assert!(left.unit.max_abs_diff(&adj) < 1e-10, "m={m}");
            assert!((left.log_mag - right.log_mag).abs() < 1e-10 * right.log_mag.max(1.0), "m={m}");
        }
    }

    #[test]
    fn from_zero_sampling_shifts_by_one() {
        let f = Potential::cosine(3.0);
        let d = golden_shift();
        let x = TorusPoint::new(vec![0.2]);
        let z = C64::new(0.1, 0.0);
        let a = transfer_with(&f, &d, &x, z, 10, Sampling::FromZero).unwrap();
        let b = transfer(&f, &d, &d.step_back(&x).unwrap(), z, 10).unwrap();
        assert!((a.log_mag - b.log_mag).abs() < 1e-12);
    }

    #[test]
    fn step_cap_enforced() {
        let f = Potential::cosine(1.0);
        let d = golden_shift();
        let r = transfer(&f, &d, &TorusPoint::origin(1), ZERO, (MAX_STEPS + 1) as i64);
        assert!(matches!(r, Err(Error::StepCap { .. })));
    }

    #[test]
    fn zero_potential_lyapunov_vanishes() {
        let est = lyapunov(&Potential::zero(1), &golden_shift(), ZERO, 64, 10, 1).unwrap();
        assert!(est.mean.abs() < 1e-14);
    }

    #[test]
    fn lyapunov_is_seed_deterministic() {
        let f = Potential::cosine(4.0);
        let a = lyapunov(&f, &golden_shift(), ZERO, 50, 100, 9).unwrap();
        let b = lyapunov(&f, &golden_shift(), ZERO, 50, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!(lyapunov(&f, &golden_shift(), ZERO, 0, 100, 9).is_err());
        assert!(lyapunov(&f, &golden_shift(), ZERO, 10, 1, 9).is_err());
    }

    #[test]
    fn seeds_agree_statistically() {
        let f = Potential::cosine(3.0);
        let a = lyapunov(&f, &golden_shift(), C64::new(0.5, 0.0), 80, 2000, 1).unwrap();
        let b = lyapunov(&f, &golden_shift(), C64::new(0.5, 0.0), 80, 2000, 2).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() <= 4.0 * se);
    }

    #[test]
    fn nonpositive_level_has_full_measure() {
        let f = Potential::cosine(4.0);
        let (m, s) = deviation_measure(&f, &golden_shift(), ZERO, 20, 0.0, 0.7, 100, 3).unwrap();
        assert_eq!((m, s), (1.0, 0.0));
    }

    #[test]
    fn level_above_growth_cap_is_empty() {
        let f = Potential::cosine(4.0);
        // (1/k) ln||A_k|| <= ln(2 + |z| + ||f||) = ln 6 < 10 * 0.69
        let (m, _) = deviation_measure(&f, &golden_shift(), ZERO, 50, 10.0, 0.69, 500, 3).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn first_hit_at_zero_threshold() {
        let f = Potential::cosine(4.0);
        let j = growth_first_hit(&f, &golden_shift(), &TorusPoint::new(vec![0.31]), ZERO, 10, 0.0, 0.69, 5);
        assert_eq!(j.unwrap(), Some(1));
        let e = growth_first_hit(&f, &golden_shift(), &TorusPoint::new(vec![0.31]), ZERO, 10, 0.0, 0.69, 0);
        assert!(e.is_err());
    }

    #[test]
    fn first_hit_window_matches_direct_transfer() {
        let f = Potential::cosine(1.5);
        let d = golden_shift();
        let x = TorusPoint::new(vec![-0.2]);
        let k = 12;
        let j = growth_first_hit(&f, &d, &x, ZERO, k, 0.5, 0.4, 400).unwrap().unwrap();
        for jj in 1..=j {
            let y = d.iterate(&x, jj as i64).unwrap();
            let r = 2.0 * transfer(&f, &d, &y, ZERO, k as i64).unwrap().log_mag / k as f64;
            assert_eq!(r >= 0.2, jj == j, "j={jj}");
        }
    }

    #[test]
    fn comparability_identical_and_gauge() {
        let f = Potential::cosine(4.0);
        let d = golden_shift();
        let x = TorusPoint::new(vec![0.05]);
        let v1 = SampledPotential::new(f.clone());
        let r = comparability_check(&v1, &v1, &d, &x, &[-1.0, 0.0, 1.5], &[1e-2, 1e-4], 0.0, 1e-9).unwrap();
        assert_eq!(r.exponent, 0.0);
        assert!(r.pass);
        // f + c at E + c has identical one-step matrices
        let shifted = Potential::new(
            1,
            PotentialKind::TrigPoly,
            4.0,
            f.modes().iter().cloned().chain(std::iter::once((vec![0], C64::new(0.25, 0.0)))),
        )
        .unwrap();
        let v2 = SampledPotential::new(shifted);
        let r = comparability_check(&v1, &v2, &d, &x, &[-1.0, 0.0, 1.5], &[1e-2, 1e-4], 1.0, 1e-9).unwrap();
        assert!(r.exponent < 1e-12, "{}", r.exponent);
    }

    #[test]
    fn comparability_local_bump_is_finite() {
        let f = Potential::cosine(4.0);
        let d = golden_shift();
        let x = TorusPoint::new(vec![0.05]);
        let v1 = SampledPotential::new(f.clone());
        let v2 = SampledPotential::new(f).with_bump(3, 1.0);
        let r = comparability_check(&v1, &v2, &d, &x, &[-2.0, 0.0, 2.0], &[1e-3, 1e-5], 0.0, 10.0).unwrap();
        assert!(r.exponent > 0.0 && r.exponent.is_finite());
    }

    #[test]
    fn inclusion_levels_default_ordering() {
        for tau in [0.1, 0.5, 0.9] {
            InclusionLevels::for_tau(tau).validate(tau).unwrap();
        }
        assert!(InclusionLevels { a: 0.9, c: 0.95, d: 0.8 }.validate(0.5).is_err());
    }

    #[test]
    fn inclusion_rejects_far_energy() {
        let f = Potential::cosine(4.0);
        let cfg = InclusionConfig {
            tau: 0.5,
            levels: InclusionLevels::for_tau(0.5),
            l_ref: 0.69,
            schedule_eps: 0.05,
            num_phases: 10,
            seed: 1,
        };
        let r = inclusion_check(&f, &golden_shift(), 0.0, C64::new(0.1, 0.0), 50, &cfg);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn inclusion_reports_schedule_degrees() {
        let f = Potential::cosine(4.0);
        let cfg = InclusionConfig {
            tau: 0.5,
            levels: InclusionLevels::for_tau(0.5),
            l_ref: 0.69,
            schedule_eps: 0.05,
            num_phases: 50,
            seed: 5,
        };
        let d = golden_shift();
        // k = 5: the schedule caps the Taylor degree at ceil(5^1.05) = 6
        let r = inclusion_check(&f, &d, 0.0, ZERO, 5, &cfg).unwrap();
        assert_eq!(r.tested, 50);
        assert!(r.violations <= r.tested);
        assert_eq!(r.n1_used, 6);
        assert_eq!(r.n0, 1);
        // k = 50: the schedule allows enough degree to reach rounding level
        let r = inclusion_check(&f, &d, 0.0, ZERO, 50, &cfg).unwrap();
        assert!(r.approx_sup_error < 1e-10, "{}", r.approx_sup_error);
        assert!(r.n1_used < 62);
    }

    #[test]
    fn golden_constant_consistent() {
        assert!((GOLDEN - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-16);
    }
}
