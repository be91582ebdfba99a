//! Transport-exponent estimators and the integral criterion bounding outside
//! probabilities by transfer-matrix growth off the real axis.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{backward_values, forward_values, running_max_log_norm, Sampling, C64};
use crate::csvfmt::Num;
use crate::error::{Error, Result};
use crate::fit::{envelope_slopes, least_squares, trailing_half_start};
use crate::potential::Potential;
use crate::quantum::{energy_bound, outside_probability, AmplitudeProfile};
use crate::torus::{Dynamics, TorusPoint};

/// Time scaling of a transport fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// Abscissa `p ln ln T`.
    LogLog,
    /// Abscissa `p ln T`.
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub p: f64,
    /// `(T, <|X|^p(T)>)` with `T` strictly increasing.
    pub entries: Vec<(f64, f64)>,
    pub provenance: String,
}

impl MomentSeries {
    pub fn new(p: f64, entries: Vec<(f64, f64)>, provenance: impl Into<String>) -> Result<Self> {
        if entries.iter().any(|&(t, m)| !(t > 0.0) || !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("times and moments must be positive and finite".into()));
        }
        if entries.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(MomentSeries { p, entries, provenance: provenance.into() })
    }

    pub fn subsample(&self, step: usize) -> MomentSeries {
        MomentSeries {
            p: self.p,
            entries: self.entries.iter().step_by(step.max(1)).copied().collect(),
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportEstimate {
    /// Least-squares slope over the whole series.
    pub beta: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub scaling: Scaling,
}

/// `ln <|X|^p>` against `p ln ln T`.
pub fn fit_beta_log(series: &MomentSeries) -> Result<TransportEstimate> {
    fit_beta(series, Scaling::LogLog)
}

/// `ln <|X|^p>` against `p ln T`.
pub fn fit_beta_power(series: &MomentSeries) -> Result<TransportEstimate> {
    fit_beta(series, Scaling::Log)
}

pub fn fit_beta(series: &MomentSeries, scaling: Scaling) -> Result<TransportEstimate> {
    let e = &series.entries;
    if e.len() < 6 {
        return Err(Error::Precondition(format!("need at least 6 samples, got {}", e.len())));
    }
    if scaling == Scaling::LogLog && e[0].0 < 10.0 {
        return Err(Error::Precondition("T_min must be >= 10".into()));
    }
    if !(series.p > 0.0) {
        return Err(Error::InvalidArgument("moment order must be positive".into()));
    }
    let x: Vec<f64> = e
        .iter()
        .map(|&(t, _)| {
            series.p
                * match scaling {
                    Scaling::LogLog => t.ln().ln(),
                    Scaling::Log => t.ln(),
                }
        })
        .collect();
    let y: Vec<f64> = e.iter().map(|&(_, m)| m.ln()).collect();
    let lf = least_squares(&x, &y)?;
    let h = trailing_half_start(e.len());
    let (up, lo) = envelope_slopes(&x[h..], &y[h..])?;
    Ok(TransportEstimate {
        beta: lf.slope,
        beta_plus: up,
        beta_minus: lo,
        residual: lf.residual,
        window: (e[0].0, e[e.len() - 1].0),
        scaling,
    })
}

/// Outside probabilities this small are treated as zero.
pub const P_FLOOR: f64 = 1e-300;

/// Trailing-half growth rate of `ln S` against `ln ln T` above which the
/// finite-data estimate is reported as divergent.
pub const DIVERGENCE_SLOPE: f64 = 0.25;

/// Step of the alpha scan behind `alpha_log_bound`.
pub const ALPHA_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SLogEstimate {
    pub alpha: f64,
    /// `-limsup ln P / ln ln T`: smallest trailing-half sample.
    pub s_plus: f64,
    /// `-liminf ln P / ln ln T`: largest trailing-half sample.
    pub s_minus: f64,
    /// Largest scanned alpha below which every `s_plus` is finite.
    pub alpha_log_bound: f64,
    /// Largest scanned alpha below which every `s_minus` is finite.
    pub alpha_log_minus_bound: f64,
    /// `(T, -ln P / ln ln T)`, `+inf` where `P` vanished.
    pub samples: Vec<(f64, f64)>,
}

/// `N(T) = ln(T)^alpha - 2`.
pub fn outside_radius(t: f64, alpha: f64) -> f64 {
    t.ln().powf(alpha) - 2.0
}

fn s_samples(times: &[f64], alpha: f64, p_at: &dyn Fn(usize, f64) -> Result<f64>) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let n = outside_radius(t, alpha);
            let p = if n < 0.0 { 1.0 } else { p_at(i, n)? };
            let s = if p <= P_FLOOR { f64::INFINITY } else { -p.ln() / t.ln().ln() };
            Ok((t, s.max(0.0)))
        })
        .collect()
}

/// `(s_plus, s_minus)` from samples; `+inf` when divergent.
fn s_envelope(samples: &[(f64, f64)]) -> (f64, f64) {
    let tail = &samples[trailing_half_start(samples.len())..];
    let finite: Vec<(f64, f64)> = tail.iter().copied().filter(|s| s.1.is_finite()).collect();
    let any_inf = finite.len() < tail.len();
    if finite.is_empty() {
        return (f64::INFINITY, f64::INFINITY);
    }
    // growth of ln S against ln ln T on the finite, positive samples
    let pos: Vec<(f64, f64)> = finite.iter().copied().filter(|s| s.1 > 0.0).collect();
    if pos.len() >= 2 {
        let x: Vec<f64> = pos.iter().map(|s| s.0.ln().ln()).collect();
        let y: Vec<f64> = pos.iter().map(|s| s.1.ln()).collect();
        if let Ok(lf) = least_squares(&x, &y) {
            if lf.slope > DIVERGENCE_SLOPE {
                return (f64::INFINITY, f64::INFINITY);
            }
        }
    }
    let lo = finite.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = if any_inf { f64::INFINITY } else { finite.iter().map(|s| s.1).fold(0.0, f64::max) };
    (lo, hi)
}

/// Estimates `S^+_ln(alpha)`, `S^-_ln(alpha)` and scans `alpha' = 0, 0.25, ..., alpha`
/// for the exponent bounds. `p_at(i, N)` returns `P(N, T_i)`.
pub fn s_log_estimate(times: &[f64], alpha: f64, p_at: &dyn Fn(usize, f64) -> Result<f64>) -> Result<SLogEstimate> {
    if times.len() < 2 {
        return Err(Error::Precondition("need at least two times".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if times.iter().any(|&t| !(t > std::f64::consts::E)) {
        return Err(Error::Precondition("times must exceed e so that ln ln T > 0".into()));
    }
    let samples = s_samples(times, alpha, p_at)?;
    let (mut s_plus, mut s_minus) = s_envelope(&samples);
    // S is non-decreasing in alpha, so the scan stops at the first divergence
    let mut bound_plus = f64::NAN;
    let mut bound_minus = f64::NAN;
    let (mut run_plus, mut run_minus) = (true, true);
    let steps = (alpha / ALPHA_STEP).floor() as usize;
    for k in 0..=steps {
        let a = k as f64 * ALPHA_STEP;
        let (sp, sm) = s_envelope(&s_samples(times, a, p_at)?);
        run_plus &= sp.is_finite();
        run_minus &= sm.is_finite();
        if run_plus {
            bound_plus = a;
        }
        if run_minus {
            bound_minus = a;
        }
    }
    if !run_plus {
        s_plus = f64::INFINITY;
    }
    if !run_minus {
        s_minus = f64::INFINITY;
    }
    Ok(SLogEstimate {
        alpha,
        s_plus,
        s_minus,
        alpha_log_bound: bound_plus,
        alpha_log_minus_bound: bound_minus,
        samples,
    })
}

/// [`s_log_estimate`] on amplitude profiles; radii beyond the window count as `P = 0`.
pub fn fit_s_log(profiles: &[AmplitudeProfile], alpha: f64) -> Result<SLogEstimate> {
    if let Some(p) = profiles.iter().find(|p| !p.is_valid()) {
        return Err(Error::InvalidProfile { leak: p.truncation_leak, tol: p.leak_tol });
    }
    let times: Vec<f64> = profiles.iter().map(|p| p.t).collect();
    let p_at = |i: usize, n: f64| -> Result<f64> {
        let prof = &profiles[i];
        let k = n.floor() as usize;
        if k >= prof.half_width {
            return Ok(0.0);
        }
        Ok(outside_probability(prof, k)?.p)
    };
    s_log_estimate(&times, alpha, &p_at)
}

/// Energy-grid quadrature controls for [`dt_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtQuadrature {
    pub panels: usize,
    pub refine_factor: f64,
    pub subpanels: usize,
}

impl Default for DtQuadrature {
    fn default() -> Self {
        DtQuadrature { panels: 1024, refine_factor: 10.0, subpanels: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtIntegral {
    pub value: f64,
    /// `ln value`; finite even when `value` underflows.
    pub log_value: f64,
    pub n_used: usize,
    pub k: f64,
    pub refined_panels: usize,
    /// Largest `|ln max_j ||A_j|| - ln max_j ||A_{-j}|||` over the grid.
    pub direction_asymmetry: f64,
}

/// `N = ceil(ln(T)^gamma)`.
pub fn dt_radius(t: f64, gamma: f64) -> usize {
    t.ln().powf(gamma).ceil().max(1.0) as usize
}

/// `(ln max_{1<=j<=N} ||A_j||, ln max_{1<=j<=N} ||A_{-j}||)` at `E + i/T`.
pub fn dt_log_growth(f: &Potential, d: &Dynamics, x: &TorusPoint, e: f64, t: f64, n: usize) -> Result<(f64, f64)> {
    let z = C64::new(e, 1.0 / t);
    let fw = running_max_log_norm(forward_values(f, d, x, Sampling::FromFirstIterate)?.take(n), z, false);
    let bw = running_max_log_norm(backward_values(f, d, x)?.take(n), z, true);
    Ok((fw, bw))
}

/// `ln` of the integrand `1 / min_l max_{1<=lj<=N} ||A_j^{E+i/T}(x)||^2`.
pub fn dt_log_integrand(f: &Potential, d: &Dynamics, x: &TorusPoint, e: f64, t: f64, n: usize) -> Result<f64> {
    let (fw, bw) = dt_log_growth(f, d, x, e, t, n)?;
    Ok(-2.0 * fw.min(bw))
}

fn log_sum_exp(terms: &[(f64, f64)]) -> f64 {
    // (weight, log value)
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = terms.iter().map(|&(w, l)| w * (l - m).exp()).sum();
    m + s.ln()
}

/// Composite Simpson quadrature of the integrand over `[-K, K]`. Panels whose
/// reference integrand (at `N_ref = ceil(ln T)`) exceeds `refine_factor` times
/// its median are subdivided; the panel set therefore does not depend on
/// `gamma`, which keeps the result monotone in `gamma`.
pub fn dt_integral(f: &Potential, d: &Dynamics, x: &TorusPoint, t: f64, gamma: f64) -> Result<DtIntegral> {
    dt_integral_with(f, d, x, t, gamma, DtQuadrature::default())
}

pub fn dt_integral_with(
    f: &Potential,
    d: &Dynamics,
    x: &TorusPoint,
    t: f64,
    gamma: f64,
    quad: DtQuadrature,
) -> Result<DtIntegral> {
    if !(t >= 10.0) {
        return Err(Error::Precondition(format!("T must be >= 10, got {t}")));
    }
    if !(gamma > 1.0) {
        return Err(Error::Precondition(format!("gamma must exceed 1, got {gamma}")));
    }
    if quad.panels == 0 || quad.subpanels == 0 {
        return Err(Error::InvalidArgument("panel counts must be positive".into()));
    }
    let n = dt_radius(t, gamma);
    dt_integral_radius(f, d, x, t, n, quad)
}

/// [`dt_integral_with`] for an explicit radius `N`.
pub fn dt_integral_radius(
    f: &Potential,
    d: &Dynamics,
    x: &TorusPoint,
    t: f64,
    n: usize,
    quad: DtQuadrature,
) -> Result<DtIntegral> {
    let k = energy_bound(f.sup_norm_bound());
    let n_ref = (t.ln().ceil() as usize).clamp(1, n.max(1));
    let panels = quad.panels;
    let h = 2.0 * k / panels as f64;
    let coarse: Vec<f64> = (0..=2 * panels).map(|i| -k + i as f64 * h / 2.0).collect();

    let reference: Vec<f64> =
        coarse.par_iter().map(|&e| dt_log_integrand(f, d, x, e, t, n_ref)).collect::<Result<_>>()?;
    let mut sorted = reference.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let cut = median + quad.refine_factor.ln();
    let refine: Vec<bool> =
        (0..panels).map(|p| reference[2 * p..=2 * p + 2].iter().any(|&v| v > cut)).collect();

    // every node of the final rule, with its Simpson weight
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    for p in 0..panels {
        let a = -k + p as f64 * h;
        let m = if refine[p] { quad.subpanels } else { 1 };
        let hs = h / m as f64;
        for s in 0..m {
            let a0 = a + s as f64 * hs;
            for (off, w) in [(0.0, 1.0), (0.5, 4.0), (1.0, 1.0)] {
                nodes.push((a0 + off * hs, w * hs / 6.0));
            }
        }
    }
    let growth: Vec<(f64, f64)> =
        nodes.par_iter().map(|&(e, _)| dt_log_growth(f, d, x, e, t, n)).collect::<Result<_>>()?;
    let terms: Vec<(f64, f64)> = nodes.iter().zip(&growth).map(|(&(_, w), g)| (w, -2.0 * g.0.min(g.1))).collect();
    let asym = growth.iter().map(|g| (g.0 - g.1).abs()).fold(0.0, f64::max);
    let log_value = log_sum_exp(&terms);
    Ok(DtIntegral {
        value: log_value.exp(),
        log_value,
        n_used: n,
        k,
        refined_panels: refine.iter().filter(|&&r| r).count(),
        direction_asymmetry: asym,
    })
}

/// Smallest [`dt_integral`] over a sample of phases.
pub fn dt_integral_phase_min(
    f: &Potential,
    d: &Dynamics,
    phases: &[TorusPoint],
    t: f64,
    gamma: f64,
) -> Result<DtIntegral> {
    let mut best: Option<DtIntegral> = None;
    for x in phases {
        let r = dt_integral(f, d, x, t, gamma)?;
        if best.as_ref().is_none_or(|b| r.log_value < b.log_value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Precondition("need at least one phase".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtOutsideBound {
    pub n: usize,
    /// `e^{-N} + T^3 * integral`, absolute constants set to 1.
    pub bound: f64,
    pub log_bound: f64,
    pub log_exp_term: f64,
    pub log_integral_term: f64,
}

pub fn dt_outside_bound_from(t: f64, integral: &DtIntegral) -> DtOutsideBound {
    let a = -(integral.n_used as f64);
    let b = 3.0 * t.ln() + integral.log_value;
    let m = a.max(b);
    let log_bound = m + ((a - m).exp() + (b - m).exp()).ln();
    DtOutsideBound {
        n: integral.n_used,
        bound: log_bound.exp(),
        log_bound,
        log_exp_term: a,
        log_integral_term: b,
    }
}

pub fn dt_outside_bound(f: &Potential, d: &Dynamics, x: &TorusPoint, t: f64, gamma: f64) -> Result<DtOutsideBound> {
    Ok(dt_outside_bound_from(t, &dt_integral(f, d, x, t, gamma)?))
}

/// One row of an estimates CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub experiment: String,
    pub parameter: String,
    pub value: f64,
    pub quantity: String,
    pub estimate: f64,
    pub residual: f64,
    pub t_min: f64,
    pub t_max: f64,
}

pub const ESTIMATE_HEADER: &str = "experiment,parameter,value,quantity,estimate,residual,t_min,t_max";

pub fn estimates_csv(rows: &[EstimateRow]) -> String {
    let mut out = String::from(ESTIMATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.parameter,
            Num(r.value),
            r.quantity,
            Num(r.estimate),
            Num(r.residual),
            Num(r.t_min),
            Num(r.t_max)
        );
    }
    out
}

impl TransportEstimate {
    pub fn rows(&self, experiment: &str, p: f64) -> Vec<EstimateRow> {
        let tag = match self.scaling {
            Scaling::LogLog => "beta_log",
            Scaling::Log => "beta",
        };
        [("", self.beta), ("_plus", self.beta_plus), ("_minus", self.beta_minus)]
            .iter()
            .map(|(suffix, v)| EstimateRow {
                experiment: experiment.into(),
                parameter: "p".into(),
                value: p,
                quantity: format!("{tag}{suffix}"),
                estimate: *v,
                residual: self.residual,
                t_min: self.window.0,
                t_max: self.window.1,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Frequency;

    fn series(f: impl Fn(f64) -> f64) -> MomentSeries {
        let ts: Vec<f64> = (0..9).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect();
        MomentSeries::new(2.0, ts.iter().map(|&t| (t, f(t))).collect(), "synthetic").unwrap()
    }

    #[test]
    fn synthetic_power_log_slope() {
        let s = series(|t| t.ln().powf(4.0));
        let e = fit_beta_log(&s).unwrap();
        assert!((e.beta - 2.0).abs() < 1e-6);
        assert!(e.beta_minus <= e.beta_plus);
        assert!((e.beta_plus - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_series_and_scale_invariance() {
        let e = fit_beta_log(&series(|_| 3.0)).unwrap();
        assert!(e.beta.abs() < 1e-12);
        let a = fit_beta_log(&series(|t| t.ln().powf(3.0) * (1.0 + 0.1 * t.ln().sin()))).unwrap();
        let b = fit_beta_log(&series(|t| 7.0 * t.ln().powf(3.0) * (1.0 + 0.1 * t.ln().sin()))).unwrap();
        assert!((a.beta - b.beta).abs() < 1e-12);
    }

    #[test]
    fn ballistic_series_in_power_scaling() {
        let e = fit_beta_power(&series(|t| t * t)).unwrap();
        assert!((e.beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn series_preconditions() {
        assert!(MomentSeries::new(2.0, vec![(10.0, 1.0), (10.0, 2.0)], "x").is_err());
        let short = MomentSeries::new(2.0, vec![(10.0, 1.0), (20.0, 2.0)], "x").unwrap();
        assert!(fit_beta_log(&short).is_err());
        let early = MomentSeries::new(2.0, (1..8).map(|i| (i as f64, 1.0)).collect(), "x").unwrap();
        assert!(fit_beta_log(&early).is_err());
    }

    fn times() -> Vec<f64> {
        (0..9).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect()
    }

    #[test]
    fn s_log_zero_alpha_vanishes() {
        let ts = times();
        let est = s_log_estimate(&ts, 0.0, &|_, _| panic!("N < 0 never queries P")).unwrap();
        assert_eq!(est.s_plus, 0.0);
        assert_eq!(est.s_minus, 0.0);
        assert_eq!(est.alpha_log_bound, 0.0);
    }

    #[test]
    fn s_log_exponential_decay_diverges() {
        let ts = times();
        let est = s_log_estimate(&ts, 2.0, &|_, n| Ok((-n).exp())).unwrap();
        assert!(est.s_plus.is_infinite());
        assert!(est.alpha_log_bound < 2.0);
        assert!(est.s_plus <= est.s_minus);
    }

    #[test]
    fn s_log_power_law_is_finite() {
        // P(N, T) = (1 + N)^{-1}: S stays bounded in ln ln T
        let ts = times();
        let est = s_log_estimate(&ts, 1.0, &|_, n| Ok(1.0 / (2.0 + n))).unwrap();
        assert!(est.s_plus.is_finite());
        assert!(est.s_plus <= est.s_minus);
        assert_eq!(est.alpha_log_bound, 1.0);
    }

    #[test]
    fn dt_one_step_closed_form() {
        // f = 0, N = 1, E = 0: both directions give the norm of ((-z, -1), (1, 0))
        let f = Potential::zero(1);
        let d = Dynamics::shift(Frequency::golden());
        let t = 10.0;
        let li = dt_log_integrand(&f, &d, &TorusPoint::origin(1), 0.0, t, 1).unwrap();
        let fr = 2.0 + 1.0 / (t * t);
        let s2 = (fr + (fr * fr - 4.0).sqrt()) / 2.0;
        assert!((li - (-s2.ln())).abs() < 1e-14);
    }

    #[test]
    fn dt_monotone_in_gamma_and_bounds() {
        let f = Potential::cosine(4.0);
        let d = Dynamics::shift(Frequency::golden());
        let x = TorusPoint::origin(1);
        let q = DtQuadrature { panels: 64, ..Default::default() };
        let a = dt_integral_with(&f, &d, &x, 100.0, 1.5, q).unwrap();
        let b = dt_integral_with(&f, &d, &x, 100.0, 2.0, q).unwrap();
        assert!(b.log_value <= a.log_value);
        assert_eq!(a.k, 7.0);
        let bound = dt_outside_bound_from(100.0, &b);
        assert!(bound.bound >= 0.0);
        assert!(bound.log_bound >= bound.log_exp_term && bound.log_bound >= bound.log_integral_term);
        assert!(dt_integral(&f, &d, &x, 5.0, 2.0).is_err());
        assert!(dt_integral(&f, &d, &x, 50.0, 1.0).is_err());
    }

    #[test]
    fn dt_free_integral_does_not_decay() {
        let f = Potential::zero(1);
        let d = Dynamics::shift(Frequency::golden());
        let x = TorusPoint::origin(1);
        let q = DtQuadrature { panels: 128, ..Default::default() };
        let a = dt_integral_with(&f, &d, &x, 1e2, 2.5, q).unwrap();
        let b = dt_integral_with(&f, &d, &x, 1e3, 2.5, q).unwrap();
        // polynomial growth of the free cocycle: integral shrinks at most polynomially in N
        assert!(b.log_value > a.log_value - 6.0, "{} {}", a.log_value, b.log_value);
    }

    #[test]
    fn estimate_rows_csv() {
        let e = fit_beta_log(&series(|t| t.ln().powf(4.0))).unwrap();
        let csv = estimates_csv(&e.rows("demo", 2.0));
        assert!(csv.starts_with(ESTIMATE_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }
}
