// Brute-force oracles shared by the integration tests. Nothing here calls
// into the library's numerical code.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `lambda cos(2 pi (x + n omega))`, with `n omega` split exactly by fma and
/// reduced mod 1 before scaling, so the phase error stays near one ulp.
pub fn cosine_value(lambda: f64, x: f64, omega: f64, n: i64) -> f64 {
    let nf = n as f64;
    let p = nf * omega;
    let lo = nf.mul_add(omega, -p);
    let y = (p - p.round()) + x + lo;
    lambda * (2.0 * PI * (y - y.round())).cos()
}

/// `M(v_n) ... M(v_1)` in plain complex arithmetic, no rescaling.
pub fn naive_transfer(lambda: f64, omega: f64, x: f64, z: Complex64, n: usize) -> Matrix2<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = Matrix2::identity();
    for k in 1..=n {
        let v = cosine_value(lambda, x, omega, k as i64);
        let m = Matrix2::new(Complex64::new(v, 0.0) - z, -one, one, zero);
        acc = m * acc;
    }
    acc
}

pub fn max_abs(m: &Matrix2<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Diagonal `lambda cos(2 pi (x + n omega))` for `n = -L..=L`.
pub fn cosine_diagonal(lambda: f64, omega: f64, x: f64, half_width: usize) -> Vec<f64> {
    let l = half_width as i64;
    (-l..=l).map(|n| cosine_value(lambda, x, omega, n)).collect()
}

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `a(n, T)` by quadrature of the time average: with `u = 2t/T`,
/// `a = int_0^inf e^{-u} (1/2) sum_{s=0,1} |<delta_n, e^{-i u T H / 2} delta_s>|^2 du`.
/// `H` has unit hopping and Dirichlet edges; eigenvectors come from nalgebra.
pub fn time_domain_amplitudes(diag: &[f64], t: f64) -> Vec<f64> {
    let m = diag.len();
    let l = (m - 1) / 2;
    let h = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            diag[i]
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let e = &eig.eigenvalues;
    let phi = &eig.eigenvectors; // column j is the j-th eigenvector
    let spread = e.max() - e.min();
    let freq = spread * t / 2.0;
    let u_max = 45.0;
    let panels = ((u_max * freq / 3.0).ceil() as usize).max(64);
    let width = u_max / panels as f64;
    let rule = gauss_legendre(20);

    let mut a = vec![0.0; m];
    let mut psi = vec![Complex64::new(0.0, 0.0); m];
    for s in [l, l + 1] {
        // c[j][n] = phi_j(s) phi_j(n)
        let c: Vec<Vec<f64>> = (0..m).map(|j| (0..m).map(|n| phi[(s, j)] * phi[(n, j)]).collect()).collect();
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for &(node, w) in &rule {
                let u = mid + 0.5 * width * node;
                let weight = 0.5 * width * w * (-u).exp();
                let time = u * t / 2.0;
                psi.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for j in 0..m {
                    let ph = Complex64::from_polar(1.0, -e[j] * time);
                    for n in 0..m {
                        psi[n] += ph * c[j][n];
                    }
                }
                for n in 0..m {
                    a[n] += 0.5 * weight * psi[n].norm_sqr();
                }
            }
        }
    }
    a
}

/// Eigenvalues of a symmetric tridiagonal matrix via nalgebra, ascending.
pub fn dense_eigenvalues(diag: &[f64], off: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = diag.len();
    let h = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            diag[i]
        } else if j == i + 1 {
            off[i]
        } else if i == j + 1 {
            off[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
