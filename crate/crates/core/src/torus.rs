//! Points, frequencies and orbits of the shift and skew-shift on the torus.
//!
//! Coordinates live in the fundamental domain `[-1/2, 1/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(sqrt(5) - 1) / 2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Reduce a real number modulo 1 into `[-1/2, 1/2)`.
#[inline]
pub fn wrap(y: f64) -> f64 {
    let r = y - (y + 0.5).floor();
    // (y + 0.5).floor() can round so that r lands exactly on 1/2.
    if r >= 0.5 {
        r - 1.0
    } else if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Distance from `y` to the nearest integer.
#[inline]
pub fn dist_to_int(y: f64) -> f64 {
    wrap(y).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Builds a point, reducing every coordinate into the fundamental domain.
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        for c in coords.iter_mut() {
            *c = wrap(*c);
        }
        assert!(!coords.is_empty(), "torus point needs at least one coordinate");
        TorusPoint { coords }
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Componentwise torus distance in the max norm.
    pub fn dist_max(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| dist_to_int(a - b))
            .fold(0.0, f64::max)
    }

    /// Torus distance in the euclidean norm (nearest lattice translate).
    pub fn dist_euclid(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| dist_to_int(a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Diophantine class attached to a frequency vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiophantineClass {
    /// `||k.w|| > c |k|^{-A}`.
    Dc { a: f64, c: f64 },
    /// `||k.w|| > c / (|k| (ln|k|)^A)`, only used with `A <= 2`.
    Sdc { a: f64, c: f64 },
    Unclassified,
}

impl DiophantineClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiophantineClass::Dc { a, c } if !(a > 0.0 && c > 0.0) => {
                Err(Error::InvalidArgument(format!("DC needs A > 0 and c > 0, got A={a}, c={c}")))
            }
            DiophantineClass::Sdc { a, c } if !(a > 0.0 && a <= 2.0 && c > 0.0) => Err(
                Error::InvalidArgument(format!("SDC needs 0 < A <= 2 and c > 0, got A={a}, c={c}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub omega: Vec<f64>,
    pub class: DiophantineClass,
}

impl Frequency {
    pub fn new(omega: impl Into<Vec<f64>>, class: DiophantineClass) -> Result<Self> {
        let omega = omega.into();
        if omega.is_empty() {
            return Err(Error::InvalidArgument("frequency vector is empty".into()));
        }
        class.validate()?;
        Ok(Frequency { omega, class })
    }

    pub fn unclassified(omega: impl Into<Vec<f64>>) -> Self {
        Frequency { omega: omega.into(), class: DiophantineClass::Unclassified }
    }

    /// The golden mean, which lies in DC(1, c) for every `c < 1/sqrt(5)`.
    pub fn golden() -> Self {
        Frequency { omega: vec![GOLDEN], class: DiophantineClass::Dc { a: 1.0, c: 0.38 } }
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    Shift,
    SkewShift,
}

/// A shift or skew-shift on `T^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub kind: DynamicsKind,
    pub frequency: Frequency,
    dim: usize,
}

impl Dynamics {
    pub fn shift(frequency: Frequency) -> Self {
        let dim = frequency.dim();
        Dynamics { kind: DynamicsKind::Shift, frequency, dim }
    }

    /// Skew-shift on `T^dim`; only `omega[0]` is used.
    pub fn skew_shift(frequency: Frequency, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("skew-shift needs dimension >= 2".into()));
        }
        Ok(Dynamics { kind: DynamicsKind::SkewShift, frequency, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, x: &TorusPoint) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.dim() });
        }
        Ok(())
    }

    /// One forward step `T x`.
    pub fn step(&self, x: &TorusPoint) -> Result<TorusPoint> {
        self.check(x)?;
        let mut y = x.coords.clone();
        self.step_in_place(&mut y);
        Ok(TorusPoint { coords: y })
    }

    /// One backward step `T^{-1} x`.
    pub fn step_back(&self, x: &TorusPoint) -> Result<TorusPoint> {
        self.check(x)?;
        let mut y = x.coords.clone();
        self.step_back_in_place(&mut y);
        Ok(TorusPoint { coords: y })
    }

    /// Forward step on raw coordinates; the caller guarantees the length.
    #[inline]
    pub(crate) fn step_in_place(&self, y: &mut [f64]) {
        match self.kind {
            DynamicsKind::Shift => {
                for (c, w) in y.iter_mut().zip(&self.frequency.omega) {
                    *c = wrap(*c + w);
                }
            }
            DynamicsKind::SkewShift => {
                for j in (1..y.len()).rev() {
                    y[j] = wrap(y[j] + y[j - 1]);
                }
                y[0] = wrap(y[0] + self.frequency.omega[0]);
            }
        }
    }

    #[inline]
    pub(crate) fn step_back_in_place(&self, y: &mut [f64]) {
        match self.kind {
            DynamicsKind::Shift => {
                for (c, w) in y.iter_mut().zip(&self.frequency.omega) {
                    *c = wrap(*c - w);
                }
            }
            DynamicsKind::SkewShift => {
                y[0] = wrap(y[0] - self.frequency.omega[0]);
                for j in 1..y.len() {
                    y[j] = wrap(y[j] - y[j - 1]);
                }
            }
        }
    }

    /// `T^k x` for a signed `k`, by repeated stepping.
    pub fn iterate(&self, x: &TorusPoint, k: i64) -> Result<TorusPoint> {
        self.check(x)?;
        let mut y = x.coords.clone();
        if k >= 0 {
            for _ in 0..k {
                self.step_in_place(&mut y);
            }
        } else {
            for _ in 0..(-k) {
                self.step_back_in_place(&mut y);
            }
        }
        Ok(TorusPoint { coords: y })
    }

    /// Lazily generated forward trajectory `T^1 x, T^2 x, ...`.
    pub fn trajectory(&self, x: &TorusPoint) -> Result<Trajectory<'_>> {
        self.check(x)?;
        Ok(Trajectory { dynamics: self, state: x.coords.clone(), backward: false })
    }

    /// Lazily generated backward trajectory `T^{-1} x, T^{-2} x, ...`.
    pub fn back_trajectory(&self, x: &TorusPoint) -> Result<Trajectory<'_>> {
        self.check(x)?;
        Ok(Trajectory { dynamics: self, state: x.coords.clone(), backward: true })
    }
}

/// Iterator over successive images; yields owned points.
pub struct Trajectory<'a> {
    dynamics: &'a Dynamics,
    state: Vec<f64>,
    backward: bool,
}

impl Trajectory<'_> {
    /// Advances and returns a borrow of the new coordinates without allocating.
    #[inline]
    pub fn advance(&mut self) -> &[f64] {
        if self.backward {
            self.dynamics.step_back_in_place(&mut self.state);
        } else {
            self.dynamics.step_in_place(&mut self.state);
        }
        &self.state
    }
}

impl Iterator for Trajectory<'_> {
    type Item = TorusPoint;

    fn next(&mut self) -> Option<TorusPoint> {
        Some(TorusPoint { coords: self.advance().to_vec() })
    }
}

/// `(T^1 x0, ..., T^N x0)`.
pub fn orbit(d: &Dynamics, x0: &TorusPoint, n: usize) -> Result<Vec<TorusPoint>> {
    if n == 0 {
        return Err(Error::Precondition("orbit length must be >= 1".into()));
    }
    Ok(d.trajectory(x0)?.take(n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiophantineMargin {
    /// `min ||k.w|| |k|_inf^A` over the scanned box.
    pub margin: f64,
    pub argmin: Vec<i64>,
}

/// Largest number of lattice points `diophantine_margin` will enumerate.
pub const MAX_LATTICE_POINTS: f64 = 2.0e8;

/// Exhaustive scan of `0 < |k|_inf <= k_max` for the empirical Diophantine
/// constant. A certificate for the scanned box only.
pub fn diophantine_margin(f: &Frequency, k_max: u32, a: f64) -> Result<DiophantineMargin> {
    if k_max == 0 {
        return Err(Error::Precondition("K_max must be >= 1".into()));
    }
    let nu = f.dim();
    let side = 2.0 * k_max as f64 + 1.0;
    let count = side.powi(nu as i32);
    if count > MAX_LATTICE_POINTS {
        return Err(Error::LatticeOverflow(count));
    }
    let k_max = k_max as i64;
    let mut k = vec![-k_max; nu];
    let mut best = DiophantineMargin { margin: f64::INFINITY, argmin: vec![0; nu] };
    loop {
        let norm = k.iter().map(|v| v.abs()).max().unwrap_or(0);
        if norm > 0 {
            let dot: f64 = k.iter().zip(&f.omega).map(|(&ki, w)| ki as f64 * w).sum();
            let m = dist_to_int(dot) * (norm as f64).powf(a);
            if m < best.margin {
                best.margin = m;
                best.argmin = k.clone();
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == nu {
                return Ok(best);
            }
            if k[i] < k_max {
                k[i] += 1;
                break;
            }
            k[i] = -k_max;
            i += 1;
        }
    }
}
