//! Continued-fraction expansion in double-double arithmetic (~106 bits).

use crate::error::{Error, Result};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    /// Unit roundoff of the format.
    pub const EPS: f64 = 4.93e-32;

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }

    pub fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(DoubleDouble::from_f64(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(DoubleDouble::from_f64(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo }.add(DoubleDouble::from_f64(q3))
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from_f64(0.0);
        }
        // one Newton step on the f64 root doubles the precision
        let x = DoubleDouble::from_f64(self.hi.sqrt());
        let corr = self.sub(x.mul(x)).div(DoubleDouble::from_f64(2.0 * x.hi));
        x.add(corr)
    }

    pub fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.floor());
            DoubleDouble { hi, lo }
        } else {
            DoubleDouble { hi, lo: 0.0 }
        }
    }

    /// `(sqrt(5) - 1) / 2` to double-double precision.
    pub fn golden() -> Self {
        DoubleDouble::from_f64(5.0).sqrt().sub(DoubleDouble::from_f64(1.0)).div(DoubleDouble::from_f64(2.0))
    }

    /// `sqrt(n) - floor(sqrt(n))`.
    pub fn frac_sqrt(n: u32) -> Self {
        let s = DoubleDouble::from_f64(n as f64).sqrt();
        s.sub(s.floor())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Convergent {
    pub p: i128,
    pub q: i128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub omega: f64,
    /// `a_1, a_2, ...` of `omega = [0; a_1, a_2, ...]`.
    pub partial_quotients: Vec<u64>,
    /// `(p_0, q_0) = (0, 1)`, then `(p_n, q_n)` for `n = 1..`.
    pub convergents: Vec<Convergent>,
    /// Set when the expansion stopped before `n_max` because the remainder
    /// was no longer resolved by the working precision (or was exactly zero).
    pub exhausted: bool,
}

impl ContinuedFraction {
    pub fn q(&self, n: usize) -> i128 {
        self.convergents[n].q
    }

    pub fn len(&self) -> usize {
        self.partial_quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partial_quotients.is_empty()
    }

    /// Index of the first convergent with denominator `q`.
    pub fn index_of_q(&self, q: i128) -> Option<usize> {
        self.convergents.iter().position(|c| c.q == q)
    }
}

/// Expands `omega` in `(0, 1)` given as an `f64`; its value is taken as exact.
pub fn continued_fraction(omega: f64, n_max: usize) -> Result<ContinuedFraction> {
    expand(DoubleDouble::from_f64(omega), f64::EPSILON / 2.0, n_max)
}

/// Expands a double-double value. `input_eps` is the relative uncertainty of
/// the input itself; the expansion stops once it is no longer resolved.
pub fn expand(omega: DoubleDouble, input_eps: f64, n_max: usize) -> Result<ContinuedFraction> {
    let w = omega.to_f64();
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::InvalidArgument(format!("omega must lie in (0,1), got {w}")));
    }
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be >= 1".into()));
    }
    let one = DoubleDouble::from_f64(1.0);
    let mut cf = ContinuedFraction {
        omega: w,
        partial_quotients: Vec::new(),
        convergents: vec![Convergent { p: 0, q: 1 }],
        exhausted: false,
    };
    let (mut p_prev, mut q_prev) = (1i128, 0i128);
    let (mut p_cur, mut q_cur) = (0i128, 1i128);
    let mut x = omega;
    // absolute uncertainty carried by the current remainder x
    let mut err = input_eps.max(DoubleDouble::EPS) * w;
    while cf.partial_quotients.len() < n_max {
        if x.hi <= 0.0 {
            cf.exhausted = true;
            break;
        }
        let inv = one.div(x);
        let err_inv = err / (x.hi * x.hi) + DoubleDouble::EPS * inv.hi;
        let a = inv.floor();
        let frac = inv.sub(a);
        // floor(inv) is trustworthy only if inv is not within err of an integer
        let margin = frac.hi.min(1.0 - frac.hi);
        if err_inv >= margin && frac.hi != 0.0 {
            cf.exhausted = true;
            break;
        }
        let a_int = a.to_f64();
        if !(1.0..9.0e15).contains(&a_int) {
            cf.exhausted = true;
            break;
        }
        let a_int = a_int as u64;
        let (p_next, q_next) = match (
            (a_int as i128).checked_mul(p_cur).and_then(|v| v.checked_add(p_prev)),
            (a_int as i128).checked_mul(q_cur).and_then(|v| v.checked_add(q_prev)),
        ) {
            (Some(p), Some(q)) => (p, q),
            _ => {
                cf.exhausted = true;
                break;
            }
        };
        cf.partial_quotients.push(a_int);
        cf.convergents.push(Convergent { p: p_next, q: q_next });
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
        if frac.hi == 0.0 && frac.lo == 0.0 {
            cf.exhausted = true;
            break;
        }
        x = frac;
        err = err_inv;
    }
    Ok(cf)
}
