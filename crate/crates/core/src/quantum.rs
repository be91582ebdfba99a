//! Time-averaged quantum evolution on a finite window `-L..=L`.
//!
//! With the Abelian weight `(2/T) e^{-2t/T}` the average of
//! `|<e^{itH} delta_s, delta_n>|^2` is a Lorentzian double sum over the
//! spectrum, evaluated exactly from the eigen-decomposition.

use ndarray::Array2;
use std::fmt::Write as _;

use crate::csvfmt::Num;
use crate::error::{Error, Result};
use crate::poly::CompensatedSum;
use crate::potential::Potential;
use crate::spectral::{tridiagonal_eigen, TridiagonalEigen};
use crate::torus::{Dynamics, TorusPoint};

/// Default window cap for [`adaptive_profile`].
pub const DEFAULT_WINDOW_CAP: usize = 1 << 14;
pub const INITIAL_WINDOW: usize = 64;

/// `H = Delta + v` restricted to `-L..=L` with Dirichlet edges.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub half_width: usize,
    /// `v_n = lambda f(T^n x)` at index `n + L`.
    pub diagonal: Vec<f64>,
    pub phase: TorusPoint,
    pub dynamics: Dynamics,
    pub potential: Potential,
}

impl TruncatedOperator {
    pub fn build(f: &Potential, d: &Dynamics, x: &TorusPoint, half_width: usize) -> Result<Self> {
        if half_width < 4 {
            return Err(Error::Precondition(format!("window half-width must be >= 4, got {half_width}")));
        }
        if f.nu() != d.dim() || x.dim() != d.dim() {
            return Err(Error::DimensionMismatch { expected: d.dim(), got: f.nu().min(x.dim()) });
        }
        let l = half_width;
        let mut diagonal = vec![0.0; 2 * l + 1];
        diagonal[l] = f.eval_coords(x.coords());
        let mut fw = d.trajectory(x)?;
        for n in 1..=l {
            diagonal[l + n] = f.eval_coords(fw.advance());
        }
        let mut bw = d.back_trajectory(x)?;
        for n in 1..=l {
            diagonal[l - n] = f.eval_coords(bw.advance());
        }
        if let Some(i) = diagonal.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i as i64 - l as i64 });
        }
        Ok(TruncatedOperator {
            half_width,
            diagonal,
            phase: x.clone(),
            dynamics: d.clone(),
            potential: f.clone(),
        })
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn sup_diagonal(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Potential value at site `n`.
    pub fn v(&self, n: i64) -> f64 {
        self.diagonal[(n + self.half_width as i64) as usize]
    }

    pub fn diagonalize(&self) -> Result<SpectralData> {
        let off = vec![1.0; self.size() - 1];
        let eig = tridiagonal_eigen(&self.diagonal, &off)?;
        Ok(SpectralData { eig, half_width: self.half_width, sup_v: self.sup_diagonal(), diagonal: self.diagonal.clone() })
    }
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eig: TridiagonalEigen,
    pub half_width: usize,
    pub sup_v: f64,
    diagonal: Vec<f64>,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.eigenvalues
    }

    /// Component of eigenvector `j` at site `n`.
    pub fn phi(&self, j: usize, n: i64) -> f64 {
        self.eig.vectors[[j, (n + self.half_width as i64) as usize]]
    }

    /// `K = max(4, ceil(||v||) + 3)`; the spectrum lies in `[-K + 1, K - 1]`.
    pub fn energy_bound(&self) -> f64 {
        energy_bound(self.sup_v)
    }

    pub fn max_residual(&self) -> f64 {
        let off = vec![1.0; self.diagonal.len() - 1];
        self.eig.max_residual(&self.diagonal, &off)
    }

    pub fn orthonormality_defect(&self) -> f64 {
        self.eig.orthonormality_defect()
    }
}

pub fn energy_bound(sup_v: f64) -> f64 {
    (sup_v.ceil() + 3.0).max(4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeProfile {
    pub t: f64,
    pub half_width: usize,
    /// `a(n, T)` at index `n + L`.
    pub a: Vec<f64>,
    /// Mass on sites with `|n| > 0.9 L`.
    pub truncation_leak: f64,
    pub leak_tol: f64,
    /// Total of the negative rounding noise clipped to zero.
    pub clip_mass: f64,
}

impl AmplitudeProfile {
    pub fn is_valid(&self) -> bool {
        self.truncation_leak < self.leak_tol
    }

    pub fn at(&self, n: i64) -> f64 {
        let l = self.half_width as i64;
        if n.abs() > l {
            0.0
        } else {
            self.a[(n + l) as usize]
        }
    }

    pub fn total(&self) -> f64 {
        let mut s = CompensatedSum::default();
        self.a.iter().for_each(|&v| s.add(v));
        s.value()
    }

    fn require_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidProfile { leak: self.truncation_leak, tol: self.leak_tol })
        }
    }

    /// CSV with columns `n,a,cumulative` where `cumulative` is the mass on `|m| <= |n|`.
    pub fn to_csv(&self) -> String {
        let l = self.half_width as i64;
        let mut cum = vec![0.0; self.half_width + 1];
        let mut acc = CompensatedSum::default();
        for r in 0..=l {
            acc.add(self.at(r));
            if r > 0 {
                acc.add(self.at(-r));
            }
            cum[r as usize] = acc.value();
        }
        let mut out = String::from("n,a,cumulative\n");
        for n in -l..=l {
            let _ = writeln!(out, "{},{},{}", n, Num(self.at(n)), Num(cum[n.unsigned_abs() as usize]));
        }
        out
    }
}

/// Buffer width used for the truncation leak.
pub fn buffer_sites(half_width: usize) -> usize {
    (half_width as f64 * 0.1).ceil().max(1.0) as usize
}

/// `a(n, T) = (1/2) sum_{s=0,1} sum_{j,k} phi_j(s) phi_j(n) phi_k(s) phi_k(n) W_jk`
/// with `W_jk = g^2 / (g^2 + (E_j - E_k)^2)`, `g = 2/T`.
pub fn amplitudes(spec: &SpectralData, t: f64, leak_tol: f64) -> Result<AmplitudeProfile> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("T must be positive, got {t}")));
    }
    if !(leak_tol > 0.0 && leak_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("leak tolerance must lie in (0,1), got {leak_tol}")));
    }
    let m = spec.eig.len();
    let l = spec.half_width;
    let e = &spec.eig.eigenvalues;
    let g2 = (2.0 / t) * (2.0 / t);
    let w = Array2::from_shape_fn((m, m), |(j, k)| {
        let de = e[j] - e[k];
        g2 / (g2 + de * de)
    });
    let phi = &spec.eig.vectors;
    let mut a = vec![0.0; m];
    for s in [l, l + 1] {
        // G[j, n] = phi_j(s) phi_j(n)
        let mut g = phi.clone();
        for (j, mut row) in g.rows_mut().into_iter().enumerate() {
            let c = phi[[j, s]];
            row.mapv_inplace(|v| v * c);
        }
        let c = w.dot(&g);
        for n in 0..m {
            let mut acc = CompensatedSum::default();
            for j in 0..m {
                acc.add(g[[j, n]] * c[[j, n]]);
            }
            a[n] += 0.5 * acc.value();
        }
    }
    let mut clip_mass = 0.0;
    for v in a.iter_mut() {
        if *v < 0.0 {
            clip_mass += -*v;
            *v = 0.0;
        }
    }
    let buf = buffer_sites(l);
    let mut leak = CompensatedSum::default();
    for i in (0..buf).chain(m - buf..m) {
        leak.add(a[i]);
    }
    Ok(AmplitudeProfile { t, half_width: l, a, truncation_leak: leak.value(), leak_tol, clip_mass })
}

/// `<|X|^p(T)> = sum_n (1 + |n|)^p a(n, T)` over the window.
pub fn moments(prof: &AmplitudeProfile, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!("moment order must be >= 0, got {p}")));
    }
    prof.require_valid()?;
    let l = prof.half_width as i64;
    let mut acc = CompensatedSum::default();
    // outermost sites first so the tiny tail terms are not absorbed
    for r in (0..=l).rev() {
        let w = (1.0 + r as f64).powf(p);
        acc.add(w * prof.at(r));
        if r > 0 {
            acc.add(w * prof.at(-r));
        }
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutsideProbability {
    pub p: f64,
    pub p_left: f64,
    pub p_right: f64,
}

/// Mass strictly beyond `N` on each side.
pub fn outside_probability(prof: &AmplitudeProfile, n: usize) -> Result<OutsideProbability> {
    if n > prof.half_width {
        return Err(Error::Precondition(format!("N = {n} exceeds window half-width {}", prof.half_width)));
    }
    prof.require_valid()?;
    let l = prof.half_width as i64;
    let mut left = CompensatedSum::default();
    let mut right = CompensatedSum::default();
    for r in (n as i64 + 1..=l).rev() {
        left.add(prof.at(-r));
        right.add(prof.at(r));
    }
    let (pl, pr) = (left.value().min(1.0), right.value().min(1.0));
    Ok(OutsideProbability { p: (pl + pr).min(1.0), p_left: pl, p_right: pr })
}

/// Doubles the window from [`INITIAL_WINDOW`] until the truncation leak is
/// below `leak_tol`.
pub fn adaptive_profile(
    f: &Potential,
    d: &Dynamics,
    x: &TorusPoint,
    t: f64,
    leak_tol: f64,
    cap: usize,
) -> Result<AmplitudeProfile> {
    if !(leak_tol > 0.0 && leak_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("leak tolerance must lie in (0,1), got {leak_tol}")));
    }
    let mut l = INITIAL_WINDOW;
    let mut last_leak = f64::NAN;
    while l <= cap {
        let op = TruncatedOperator::build(f, d, x, l)?;
        let prof = amplitudes(&op.diagonalize()?, t, leak_tol)?;
        if prof.is_valid() {
            return Ok(prof);
        }
        last_leak = prof.truncation_leak;
        l *= 2;
    }
    Err(Error::WindowCap { cap, leak: last_leak })
}

/// Profile on a fixed window, flagged invalid if it leaks.
pub fn fixed_profile(
    f: &Potential,
    d: &Dynamics,
    x: &TorusPoint,
    t: f64,
    half_width: usize,
    leak_tol: f64,
) -> Result<AmplitudeProfile> {
    let op = TruncatedOperator::build(f, d, x, half_width)?;
    amplitudes(&op.diagonalize()?, t, leak_tol)
}

/// Profiles for several times from one diagonalization.
pub fn profiles_for_times(spec: &SpectralData, times: &[f64], leak_tol: f64) -> Result<Vec<AmplitudeProfile>> {
    times.iter().map(|&t| amplitudes(spec, t, leak_tol)).collect()
}
