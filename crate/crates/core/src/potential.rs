//! Sampling functions on the torus: trigonometric polynomials and Gevrey
//! models, with certified Fourier truncation and Taylor polynomialization.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::torus::TorusPoint;

/// Default cap on the per-axis Taylor degree.
pub const DEFAULT_DEGREE_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    TrigPoly,
    /// `|f^(n)| <= exp(-|n|_inf^{1/sigma})` for every stored mode; modes
    /// beyond `cutoff` are zero.
    Gevrey { sigma: f64, cutoff: u32 },
}

/// A real-valued function `lambda * f` on `T^nu` given by Fourier modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    nu: usize,
    kind: PotentialKind,
    lambda: f64,
    /// Every stored mode, sorted by frequency vector.
    modes: Vec<(Vec<i32>, Complex64)>,
    /// Mean `f^(0)` (real part).
    mean: f64,
    /// One representative of each `{n, -n}` pair with `n != 0`.
    half: Vec<(Vec<i32>, Complex64)>,
    sup_norm_bound: f64,
}

fn linf(n: &[i32]) -> u32 {
    n.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

fn is_positive_rep(n: &[i32]) -> bool {
    n.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

impl Potential {
    /// Builds a potential from its full list of modes. The list must be
    /// hermitian: `f^(-n) = conj(f^(n))`.
    pub fn new(
        nu: usize,
        kind: PotentialKind,
        lambda: f64,
        modes: impl IntoIterator<Item = (Vec<i32>, Complex64)>,
    ) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidArgument("potential dimension must be >= 1".into()));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument("coupling must be finite".into()));
        }
        let mut modes: Vec<(Vec<i32>, Complex64)> =
            modes.into_iter().filter(|(_, c)| *c != Complex64::new(0.0, 0.0)).collect();
        modes.sort_by(|a, b| a.0.cmp(&b.0));
        for w in modes.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!("duplicate mode {:?}", w[0].0)));
            }
        }
        let find = |n: &[i32]| modes.binary_search_by(|m| m.0.as_slice().cmp(n)).ok();
        let mut mean = 0.0;
        let mut half = Vec::new();
        for (n, c) in &modes {
            if n.len() != nu {
                return Err(Error::DimensionMismatch { expected: nu, got: n.len() });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite coefficient at {n:?}")));
            }
            let neg: Vec<i32> = n.iter().map(|v| -v).collect();
            let tol = 1e-14 * c.norm().max(1e-300);
            if n.iter().all(|&v| v == 0) {
                if c.im.abs() > tol {
                    return Err(Error::NotHermitian(n.clone()));
                }
                mean = c.re;
                continue;
            }
            match find(&neg) {
                Some(j) if (modes[j].1 - c.conj()).norm() <= tol => {}
                _ => return Err(Error::NotHermitian(n.clone())),
            }
            if is_positive_rep(n) {
                half.push((n.clone(), *c));
            }
            if let PotentialKind::Gevrey { sigma, cutoff } = kind {
                let l = linf(n);
                if l > cutoff {
                    return Err(Error::InvalidArgument(format!("mode {n:?} beyond cutoff {cutoff}")));
                }
                let bound = (-(l as f64).powf(1.0 / sigma)).exp();
                if c.norm() > bound * (1.0 + 1e-12) {
                    return Err(Error::InvalidArgument(format!(
                        "mode {n:?} violates the Gevrey decay bound"
                    )));
                }
            }
        }
        if let PotentialKind::Gevrey { sigma, .. } = kind {
            if !(sigma >= 1.0) {
                return Err(Error::InvalidArgument(format!("Gevrey exponent must be >= 1, got {sigma}")));
            }
        }
        let sup_norm_bound =
            lambda.abs() * (mean.abs() + 2.0 * half.iter().map(|(_, c)| c.norm()).sum::<f64>());
        Ok(Potential { nu, kind, lambda, modes, mean, half, sup_norm_bound })
    }

    /// The zero potential on `T^nu`.
    pub fn zero(nu: usize) -> Self {
        Potential::new(nu, PotentialKind::TrigPoly, 0.0, Vec::new()).expect("zero potential")
    }

    /// `lambda * cos(2 pi x)` on `T^1`.
    pub fn cosine(lambda: f64) -> Self {
        Potential::cos_sum(1, lambda)
    }

    /// `lambda * sum_j cos(2 pi x_j)` on `T^nu`.
    pub fn cos_sum(nu: usize, lambda: f64) -> Self {
        let mut modes = Vec::new();
        for j in 0..nu {
            for s in [-1, 1] {
                let mut n = vec![0; nu];
                n[j] = s;
                modes.push((n, Complex64::new(0.5, 0.0)));
            }
        }
        Potential::new(nu, PotentialKind::TrigPoly, lambda, modes).expect("cosine potential")
    }

    /// Gevrey model whose coefficients saturate the decay bound:
    /// `f^(n) = exp(-|n|_inf^{1/sigma})` for `0 < |n|_inf <= cutoff`.
    pub fn gevrey_saturated(nu: usize, sigma: f64, cutoff: u32, lambda: f64) -> Result<Self> {
        let c = cutoff as i32;
        let mut modes = Vec::new();
        let mut n = vec![-c; nu];
        loop {
            let l = linf(&n);
            if l > 0 {
                modes.push((n.clone(), Complex64::new((-(l as f64).powf(1.0 / sigma)).exp(), 0.0)));
            }
            let mut i = 0;
            loop {
                if i == nu {
                    return Potential::new(nu, PotentialKind::Gevrey { sigma, cutoff }, lambda, modes);
                }
                if n[i] < c {
                    n[i] += 1;
                    break;
                }
                n[i] = -c;
                i += 1;
            }
        }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn modes(&self) -> &[(Vec<i32>, Complex64)] {
        &self.modes
    }

    /// Rigorous bound on `sup |lambda f|`.
    pub fn sup_norm_bound(&self) -> f64 {
        self.sup_norm_bound
    }

    /// Largest `|n|_inf` among stored modes.
    pub fn degree(&self) -> u32 {
        self.modes.iter().map(|(n, _)| linf(n)).max().unwrap_or(0)
    }

    /// Same function class with a different coupling.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut p = self.clone();
        p.lambda = lambda;
        p.sup_norm_bound = if self.lambda != 0.0 {
            self.sup_norm_bound * (lambda / self.lambda).abs()
        } else {
            lambda.abs() * (self.mean.abs() + 2.0 * self.half.iter().map(|(_, c)| c.norm()).sum::<f64>())
        };
        p
    }

    /// `lambda * f(x)` on raw coordinates (no dimension check).
    #[inline]
    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        let mut s = self.mean;
        for (n, c) in &self.half {
            let mut phase = 0.0;
            for (k, xi) in n.iter().zip(x) {
                phase += *k as f64 * xi;
            }
            let (sn, cs) = (TAU * phase).sin_cos();
            s += 2.0 * (c.re * cs - c.im * sn);
        }
        self.lambda * s
    }

    pub fn eval(&self, x: &TorusPoint) -> Result<f64> {
        if x.dim() != self.nu {
            return Err(Error::DimensionMismatch { expected: self.nu, got: x.dim() });
        }
        Ok(self.eval_coords(x.coords()))
    }

    /// Keeps the modes with `|n|_inf <= n0`.
    pub fn truncate_fourier(&self, n0: u32) -> CertifiedApprox {
        let kept: Vec<_> = self.modes.iter().filter(|(n, _)| linf(n) <= n0).cloned().collect();
        let sup_error = match self.kind {
            PotentialKind::TrigPoly => {
                2.0 * self.lambda.abs()
                    * self.half.iter().filter(|(n, _)| linf(n) > n0).map(|(_, c)| c.norm()).sum::<f64>()
            }
            PotentialKind::Gevrey { sigma, .. } => {
                self.lambda.abs() * gevrey_tail_bound(self.nu, sigma, n0)
            }
        };
        let approx = Potential::new(self.nu, self.kind, self.lambda, kept).expect("sub-list stays hermitian");
        CertifiedApprox {
            approximant: Approximant::Trig(approx),
            sup_error,
            source: SourceTag::FourierTruncation { n0 },
            degree: n0,
            rounding_bound: 0.0,
        }
    }
}

/// `sum_{|n|_inf > n0} exp(-|n|_inf^{1/sigma})` over `Z^nu`, bounded above:
/// exact summation over shells while terms matter, then the closed-form
/// incomplete-gamma bound `2 nu sigma 3^{nu-1} Gamma(sigma nu, M^{1/sigma})`
/// with `Gamma(s, U) <= U^{s-1} e^{-U} / (1 - (s-1)/U)`.
pub fn gevrey_tail_bound(nu: usize, sigma: f64, n0: u32) -> f64 {
    let nuf = nu as f64;
    let shell = |m: f64| (2.0 * m + 1.0).powi(nu as i32) - (2.0 * m - 1.0).powi(nu as i32);
    let s = sigma * nuf;
    // h(t) = 2 nu (2t+1)^{nu-1} e^{-t^{1/sigma}} is decreasing once t^{1/sigma} > sigma (nu - 1)
    let u_min = 2.0 * s + 2.0;
    let m_dec = u_min.powf(sigma).ceil().max(1.0);
    let mut sum = 0.0;
    let mut m = n0 as f64 + 1.0;
    let limit = n0 as f64 + 2.0e6;
    loop {
        let term = shell(m) * (-m.powf(1.0 / sigma)).exp();
        sum += term;
        if m >= m_dec && (term <= 1e-20 * sum || term == 0.0 || m >= limit) {
            break;
        }
        m += 1.0;
    }
    // remainder m' > m bounded by the integral from m
    let u = m.powf(1.0 / sigma);
    let log_rem = (2.0 * nuf * sigma).ln() + (nuf - 1.0) * 3f64.ln() + (s - 1.0) * u.ln() - u
        - (1.0 - (s - 1.0) / u).ln();
    sum + log_rem.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Approximant {
    Trig(Potential),
    /// Algebraic polynomial in the fundamental-domain coordinates.
    Algebraic(Polynomial),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceTag {
    FourierTruncation { n0: u32 },
    Polynomialization { n0: u32, n1: u32 },
}

/// An approximant of `lambda f` with a rigorous sup-distance bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedApprox {
    pub approximant: Approximant,
    /// Upper bound on `sup_x |lambda f(x) - approximant(x)|`, including the
    /// floating-point evaluation error of the approximant.
    pub sup_error: f64,
    pub source: SourceTag,
    /// `N0` for truncations, total degree `N1` for polynomials.
    pub degree: u32,
    /// The part of `sup_error` that accounts for f64 evaluation.
    pub rounding_bound: f64,
}

impl CertifiedApprox {
    #[inline]
    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        match &self.approximant {
            Approximant::Trig(p) => p.eval_coords(x),
            Approximant::Algebraic(p) => p.eval(x),
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        self.eval_coords(x.coords())
    }

    pub fn nu(&self) -> usize {
        match &self.approximant {
            Approximant::Trig(p) => p.nu(),
            Approximant::Algebraic(p) => p.nvars(),
        }
    }

    /// Replaces each `exp(2 pi i n_j x_j)` by its Taylor polynomial about 0,
    /// choosing the smallest degree whose remainder bound meets
    /// `tol / (#modes * max|lambda f^(n)| * nu)`.
    pub fn polynomialize(&self, tol: f64) -> Result<CertifiedApprox> {
        self.polynomialize_with(DegreeRule::Tolerance(tol), DEFAULT_DEGREE_CAP)
    }

    /// Taylor polynomialization with a fixed per-axis degree.
    pub fn polynomialize_degree(&self, per_axis: usize) -> Result<CertifiedApprox> {
        self.polynomialize_with(DegreeRule::Fixed(per_axis), DEFAULT_DEGREE_CAP.max(per_axis))
    }

    pub fn polynomialize_with(&self, rule: DegreeRule, cap: usize) -> Result<CertifiedApprox> {
        let (pot, n0) = match (&self.approximant, self.source) {
            (Approximant::Trig(p), SourceTag::FourierTruncation { n0 }) => (p, n0),
            _ => {
                return Err(Error::InvalidArgument(
                    "polynomialize expects a Fourier truncation".into(),
                ))
            }
        };
        if let DegreeRule::Tolerance(tol) = rule {
            if !(tol > 0.0) {
                return Err(Error::InvalidArgument("tolerance must be positive".into()));
            }
        }
        let nu = pot.nu;
        let lam = pot.lambda;
        let n_modes = pot.modes.len().max(1) as f64;
        let max_coef = pot.modes.iter().map(|(_, c)| c.norm() * lam.abs()).fold(0.0, f64::max);
        let per_factor = match rule {
            DegreeRule::Tolerance(tol) if max_coef > 0.0 => tol / (n_modes * max_coef * nu as f64),
            _ => f64::INFINITY,
        };

        let mut poly = Polynomial::zero(nu);
        if pot.mean != 0.0 {
            poly.add_term(vec![0; nu], lam * pot.mean);
        }
        let mut taylor_err = 0.0;
        let mut n1 = 0u32;
        for (n, c) in &pot.half {
            // per-axis degree and remainder
            let mut degs = Vec::with_capacity(nu);
            let mut prod = 1.0;
            for &nj in n {
                if nj == 0 {
                    degs.push(0usize);
                    continue;
                }
                let theta = PI * nj.unsigned_abs() as f64;
                let m = match rule {
                    DegreeRule::Fixed(m) => m,
                    DegreeRule::Tolerance(_) => {
                        let mut m = 0;
                        while taylor_remainder(theta, m) > per_factor {
                            m += 1;
                            if m > cap {
                                return Err(Error::DegreeCap { needed: m, cap });
                            }
                        }
                        m
                    }
                };
                if m > cap {
                    return Err(Error::DegreeCap { needed: m, cap });
                }
                prod *= 1.0 + taylor_remainder(theta, m);
                degs.push(m);
            }
            taylor_err += 2.0 * (lam * c.norm()) * (prod - 1.0);
            n1 = n1.max(degs.iter().sum::<usize>() as u32);

            // expand prod_j sum_a (2 pi i n_j)^a x_j^a / a!
            let axis_coefs: Vec<Vec<f64>> = n
                .iter()
                .zip(&degs)
                .map(|(&nj, &m)| {
                    let w = TAU * nj as f64;
                    let mut v = Vec::with_capacity(m + 1);
                    let mut t = 1.0;
                    for a in 0..=m {
                        if a > 0 {
                            t *= w / a as f64;
                        }
                        v.push(t);
                    }
                    v
                })
                .collect();
            let mut idx = vec![0usize; nu];
            loop {
                let total: usize = idx.iter().sum();
                let mut r = 1.0;
                for (j, &a) in idx.iter().enumerate() {
                    r *= axis_coefs[j][a];
                }
                // Re(c * i^total) * r
                let re = match total % 4 {
                    0 => c.re,
                    1 => -c.im,
                    2 => -c.re,
                    _ => c.im,
                };
                let coef = 2.0 * lam * re * r;
                if coef != 0.0 {
                    poly.add_term(idx.iter().map(|&a| a as u32).collect(), coef);
                }
                let mut j = 0;
                loop {
                    if j == nu {
                        break;
                    }
                    if idx[j] < degs[j] {
                        idx[j] += 1;
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == nu {
                    break;
                }
            }
        }
        let depth = (poly.num_terms() + poly.degree() as usize + 2) as f64;
        let rounding_bound = 4.0 * f64::EPSILON * depth * poly.abs_sum_on_ball(0.5);
        Ok(CertifiedApprox {
            approximant: Approximant::Algebraic(poly),
            sup_error: self.sup_error + taylor_err + rounding_bound,
            source: SourceTag::Polynomialization { n0, n1 },
            degree: n1,
            rounding_bound,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegreeRule {
    Tolerance(f64),
    Fixed(usize),
}

/// Bound on `|e^{i t} - sum_{a<=m} (i t)^a / a!|` for `|t| <= theta`.
pub fn taylor_remainder(theta: f64, m: usize) -> f64 {
    let mut term = 1.0;
    let mut partial = 1.0;
    for a in 1..=m {
        term *= theta / a as f64;
        partial += term;
    }
    let lagrange = term * theta / (m + 1) as f64;
    lagrange.min(1.0 + partial)
}

/// Per-axis Taylor degree `ceil(k^{sigma + eps})` used by the good-set schedule.
pub fn taylor_degree_schedule(k: usize, sigma: f64, eps: f64) -> usize {
    (k as f64).powf(sigma + eps).ceil() as usize
}

/// Total-degree schedule `N1(k) = ceil(k^{sigma nu + eps})`.
pub fn n1_schedule(k: usize, sigma: f64, nu: usize, eps: f64) -> u32 {
    (k as f64).powf(sigma * nu as f64 + eps).ceil() as u32
}

// ---- serialization ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub n: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

/// On-disk form of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub nu: usize,
    pub lambda: f64,
    #[serde(flatten)]
    pub kind: PotentialKind,
    pub coefficients: Vec<CoefficientRecord>,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        Potential::new(
            self.nu,
            self.kind,
            self.lambda,
            self.coefficients.iter().map(|c| (c.n.clone(), Complex64::new(c.re, c.im))),
        )
    }
}

impl From<&Potential> for PotentialSpec {
    fn from(p: &Potential) -> Self {
        PotentialSpec {
            nu: p.nu,
            lambda: p.lambda,
            kind: p.kind,
            coefficients: p
                .modes
                .iter()
                .map(|(n, c)| CoefficientRecord { n: n.clone(), re: c.re, im: c.im })
                .collect(),
        }
    }
}

impl Potential {
    pub fn to_toml(&self) -> String {
        toml::to_string(&PotentialSpec::from(self)).expect("potential serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: PotentialSpec =
            toml::from_str(s).map_err(|e| Error::config("potential", e.to_string()))?;
        spec.build()
    }
}
