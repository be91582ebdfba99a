//! Real multivariate polynomials with compensated evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    /// Monomial exponent vector -> coefficient; zero coefficients are dropped.
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Self {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, exps: Vec<u32>, coef: f64) {
        assert_eq!(exps.len(), self.nvars, "exponent vector length");
        if coef == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps.clone()).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.remove(&exps);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    fn max_var_degree(&self) -> usize {
        self.terms.keys().flat_map(|e| e.iter().copied()).max().unwrap_or(0) as usize
    }

    /// Evaluates with a compensated sum over monomials.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars);
        let deg = self.max_var_degree();
        let mut powers = vec![vec![1.0; deg + 1]; self.nvars];
        for (v, pw) in powers.iter_mut().enumerate() {
            for d in 1..=deg {
                pw[d] = pw[d - 1] * x[v];
            }
        }
        let mut acc = CompensatedSum::default();
        for (e, c) in &self.terms {
            let mut m = *c;
            for (v, &k) in e.iter().enumerate() {
                m *= powers[v][k as usize];
            }
            acc.add(m);
        }
        acc.value()
    }

    /// `sum |c_a| r^{|a|}`: bounds `|p|` on the max-norm ball of radius `r`.
    pub fn abs_sum_on_ball(&self, r: f64) -> f64 {
        self.terms.iter().map(|(e, c)| c.abs() * r.powi(e.iter().sum::<u32>() as i32)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_small_polynomial() {
        // 1 + 2x - 3xy^2
        let p = Polynomial::from_terms(2, vec![(vec![0, 0], 1.0), (vec![1, 0], 2.0), (vec![1, 2], -3.0)]);
        assert_eq!(p.degree(), 3);
        let v = p.eval(&[0.5, -2.0]);
        assert!((v - (1.0 + 1.0 - 3.0 * 0.5 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn cancelled_terms_are_dropped() {
        let mut p = Polynomial::zero(1);
        p.add_term(vec![2], 1.5);
        p.add_term(vec![2], -1.5);
        assert_eq!(p.num_terms(), 0);
        assert_eq!(p.eval(&[3.0]), 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}
