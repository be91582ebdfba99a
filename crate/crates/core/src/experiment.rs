//! Experiment configuration, presets and the artifact-writing runner.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{deviation_measure, lyapunov, lyapunov_reference, InclusionLevels, C64};
use crate::equidistribution::{fejer_hit_bound, fejer_radius, hit_count, TargetSet};
use crate::csvfmt::Num;
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::potential::{CoefficientRecord, Potential, PotentialKind};
use crate::quantum::{
    adaptive_profile, moments, outside_probability, profiles_for_times, AmplitudeProfile, TruncatedOperator,
    INITIAL_WINDOW,
};
use crate::torus::{DiophantineClass, Dynamics, DynamicsKind, Frequency, TorusPoint, GOLDEN};
use crate::transport::{
    dt_integral, dt_outside_bound_from, estimates_csv, fit_beta_log, fit_beta_power, fit_s_log, EstimateRow,
    MomentSeries,
};

/// Environment variable read by the CLI when `--threads` is absent.
pub const THREADS_ENV: &str = "POWERLOG_THREADS";

/// Tolerance on `sum_n a(n, T) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Free,
    OneFreqAnalytic,
    MultiFreqAnalytic,
    MultiFreqGevrey,
    SkewShiftGevrey,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Free,
        Preset::OneFreqAnalytic,
        Preset::MultiFreqAnalytic,
        Preset::MultiFreqGevrey,
        Preset::SkewShiftGevrey,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Free => "free",
            Preset::OneFreqAnalytic => "one-freq-analytic",
            Preset::MultiFreqAnalytic => "multi-freq-analytic",
            Preset::MultiFreqGevrey => "multi-freq-gevrey",
            Preset::SkewShiftGevrey => "skew-shift-gevrey",
            Preset::Custom => "custom",
        }
    }

    pub fn from_name(s: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("experiment.preset", format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub preset: Preset,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero {
        nu: usize,
    },
    /// `lambda * sum_j cos(2 pi x_j)`.
    Cosine {
        nu: usize,
        lambda: f64,
    },
    /// Coefficients `exp(-|n|^{1/sigma})` up to `cutoff`.
    Gevrey {
        nu: usize,
        sigma: f64,
        cutoff: u32,
        lambda: f64,
    },
    /// Explicit hermitian coefficient list; `sigma` marks it as Gevrey.
    Modes {
        nu: usize,
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        coefficients: Vec<CoefficientRecord>,
    },
}

impl PotentialConfig {
    pub fn nu(&self) -> usize {
        match *self {
            PotentialConfig::Zero { nu }
            | PotentialConfig::Cosine { nu, .. }
            | PotentialConfig::Gevrey { nu, .. }
            | PotentialConfig::Modes { nu, .. } => nu,
        }
    }

    /// Gevrey exponent, 1 for trigonometric polynomials.
    pub fn sigma(&self) -> f64 {
        match *self {
            PotentialConfig::Gevrey { sigma, .. } => sigma,
            PotentialConfig::Modes { sigma: Some(s), .. } => s,
            _ => 1.0,
        }
    }

    pub fn build(&self) -> Result<Potential> {
        let p = match self {
            PotentialConfig::Zero { nu } => Ok(Potential::zero(*nu)),
            PotentialConfig::Cosine { nu, lambda } => Ok(Potential::cos_sum(*nu, *lambda)),
            PotentialConfig::Gevrey { nu, sigma, cutoff, lambda } => {
                Potential::gevrey_saturated(*nu, *sigma, *cutoff, *lambda)
            }
            PotentialConfig::Modes { nu, lambda, sigma, coefficients } => {
                let cutoff = coefficients.iter().flat_map(|c| c.n.iter().map(|v| v.unsigned_abs())).max().unwrap_or(0);
                let kind = match sigma {
                    Some(sigma) => PotentialKind::Gevrey { sigma: *sigma, cutoff },
                    None => PotentialKind::TrigPoly,
                };
                Potential::new(
                    *nu,
                    kind,
                    *lambda,
                    coefficients.iter().map(|c| (c.n.clone(), Complex64::new(c.re, c.im))),
                )
            }
        };
        p.map_err(|e| Error::config("potential", e.to_string()))
    }
}

fn unclassified() -> DiophantineClass {
    DiophantineClass::Unclassified
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub kind: DynamicsKind,
    pub omega: Vec<f64>,
    /// Torus dimension of a skew-shift; a shift uses `omega.len()`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "unclassified")]
    pub diophantine: DiophantineClass,
}

impl DynamicsConfig {
    pub fn dim(&self) -> usize {
        match self.kind {
            DynamicsKind::Shift => self.omega.len(),
            DynamicsKind::SkewShift => self.dim.unwrap_or(0),
        }
    }

    pub fn build(&self) -> Result<Dynamics> {
        let freq = Frequency::new(self.omega.clone(), self.diophantine)
            .map_err(|e| Error::config("dynamics", e.to_string()))?;
        match self.kind {
            DynamicsKind::Shift => Ok(Dynamics::shift(freq)),
            DynamicsKind::SkewShift => Dynamics::skew_shift(freq, self.dim())
                .map_err(|e| Error::config("dynamics.dim", e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    /// Empty means the origin.
    #[serde(default)]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    pub t_grid: Vec<f64>,
    pub p_list: Vec<f64>,
    pub leak_tol: f64,
    /// Fixed window half-width; adaptive doubling when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<usize>,
    pub window_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    /// Exponent of `N = ceil(ln(T)^gamma)`; defaults to `zeta (1 + sigma)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub zeta: f64,
    /// Required decay rate of the integral: slope against `ln T` at most `-xi`.
    pub xi: f64,
    /// Slack added to the target exponent in the moment envelope.
    pub eps: f64,
    pub alpha_list: Vec<f64>,
    pub dt: bool,
    pub dt_t_max: f64,
    pub dt_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleSection {
    pub energy: f64,
    pub lyapunov_n: Vec<usize>,
    pub num_phases: usize,
    pub k_list: Vec<usize>,
    pub a_frac: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

impl CocycleSection {
    pub fn levels(&self) -> InclusionLevels {
        let def = InclusionLevels::for_tau(self.tau);
        InclusionLevels { a: self.a.unwrap_or(def.a), c: self.c.unwrap_or(def.c), d: self.d.unwrap_or(def.d) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistributionSection {
    pub n_list: Vec<usize>,
    /// Ball center; the origin when empty.
    #[serde(default)]
    pub center: Vec<f64>,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub potential: PotentialConfig,
    pub dynamics: DynamicsConfig,
    pub phase: PhaseSection,
    pub quantum: QuantumSection,
    pub transport: TransportSection,
    pub cocycle: CocycleSection,
    pub equidistribution: EquidistributionSection,
}

/// Values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<String>,
}

const SECTIONS: [&str; 8] =
    ["experiment", "potential", "dynamics", "phase", "quantum", "transport", "cocycle", "equidistribution"];

fn half_decades(lo: i32, hi: i32) -> Vec<f64> {
    (2 * lo..=2 * hi).map(|k| 10f64.powf(k as f64 / 2.0)).collect()
}

fn golden_dynamics() -> DynamicsConfig {
    DynamicsConfig {
        kind: DynamicsKind::Shift,
        omega: vec![GOLDEN],
        dim: None,
        diophantine: DiophantineClass::Dc { a: 1.0, c: 0.38 },
    }
}

/// `(2^{1/3} - 1, 4^{1/3} - 1)`, a badly approximable pair: DC(2, 0.07).
fn cubic_pair_dynamics() -> DynamicsConfig {
    DynamicsConfig {
        kind: DynamicsKind::Shift,
        omega: vec![2f64.cbrt() - 1.0, 4f64.cbrt() - 1.0],
        dim: None,
        diophantine: DiophantineClass::Dc { a: 2.0, c: 0.07 },
    }
}

impl ExperimentConfig {
    /// Preset defaults with the given seed. `custom` starts from the
    /// one-frequency model.
    pub fn preset(preset: Preset, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            experiment: ExperimentSection { preset, seed, threads: None, output_dir: format!("runs/{}", preset.name()) },
            potential: PotentialConfig::Cosine { nu: 1, lambda: 4.0 },
            dynamics: golden_dynamics(),
            phase: PhaseSection { x: vec![0.0] },
            quantum: QuantumSection {
                t_grid: half_decades(2, 6),
                p_list: vec![2.0],
                leak_tol: 1e-4,
                half_width: Some(512),
                window_cap: 2048,
            },
            transport: TransportSection {
                gamma: None,
                zeta: 1.25,
                xi: 1.0,
                eps: 0.5,
                alpha_list: vec![1.0, 2.0, 3.0],
                dt: true,
                dt_t_max: 1e5,
                dt_safety: 1e3,
            },
            cocycle: CocycleSection {
                energy: 0.0,
                lyapunov_n: vec![50, 100, 200],
                num_phases: 10_000,
                k_list: vec![100, 200],
                a_frac: 0.9,
                tau: 0.5,
                a: None,
                c: None,
                d: None,
            },
            equidistribution: EquidistributionSection { n_list: vec![1_000, 10_000, 100_000], center: Vec::new() },
        };
        match preset {
            Preset::Free => {
                cfg.potential = PotentialConfig::Zero { nu: 1 };
                cfg.quantum.t_grid = vec![10.0, 20.0, 40.0, 80.0];
                cfg.quantum.half_width = None;
                cfg.transport.dt = false;
                cfg.transport.alpha_list = vec![1.0];
            }
            Preset::OneFreqAnalytic | Preset::Custom => {}
            Preset::MultiFreqAnalytic | Preset::MultiFreqGevrey => {
                cfg.potential = if preset == Preset::MultiFreqAnalytic {
                    PotentialConfig::Cosine { nu: 2, lambda: 4.0 }
                } else {
                    PotentialConfig::Gevrey { nu: 2, sigma: 2.0, cutoff: 3, lambda: 4.0 }
                };
                cfg.dynamics = cubic_pair_dynamics();
                cfg.phase.x = vec![0.0, 0.0];
                cfg.quantum.t_grid = half_decades(2, 5);
                cfg.quantum.half_width = Some(384);
                cfg.transport.dt_t_max = 1e4;
                cfg.cocycle.num_phases = 2_000;
                if preset == Preset::MultiFreqGevrey {
                    // gamma = 3.75 here, so N outgrows the window quickly
                    cfg.quantum.half_width = Some(768);
                    cfg.transport.dt_t_max = 400.0;
                }
            }
            Preset::SkewShiftGevrey => {
                cfg.potential = PotentialConfig::Gevrey { nu: 2, sigma: 2.0, cutoff: 3, lambda: 4.0 };
                cfg.dynamics = DynamicsConfig {
                    kind: DynamicsKind::SkewShift,
                    omega: vec![GOLDEN],
                    dim: Some(2),
                    diophantine: DiophantineClass::Sdc { a: 1.0, c: 0.38 },
                };
                cfg.phase.x = vec![0.0, 0.0];
                cfg.quantum.t_grid = half_decades(2, 5);
                cfg.quantum.half_width = Some(768);
                cfg.transport.dt_t_max = 400.0;
                cfg.cocycle.num_phases = 2_000;
            }
        }
        cfg.resolve_defaults();
        cfg
    }

    /// Parses a TOML config. Sections absent from the file come from the
    /// preset; a `potential` or `dynamics` section that names its `kind`
    /// replaces the preset's wholesale, otherwise keys are merged.
    pub fn from_toml_str(text: &str, ov: &Overrides) -> Result<ExperimentConfig> {
        let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.to_string()))?;
        for key in user.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                return Err(Error::config(key, format!("unknown section; expected one of {}", SECTIONS.join(", "))));
            }
        }
        let exp = match user.get_mut("experiment") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config("experiment", "must be a table")),
            None => return Err(Error::config("experiment", "missing section")),
        };
        let preset = match exp.get("preset") {
            Some(toml::Value::String(s)) => Preset::from_name(s)?,
            Some(_) => return Err(Error::config("experiment.preset", "must be a string")),
            None => return Err(Error::config("experiment.preset", "missing field")),
        };
        if let Some(seed) = ov.seed {
            exp.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        if let Some(th) = ov.threads {
            exp.insert("threads".into(), toml::Value::Integer(th as i64));
        }
        if let Some(dir) = &ov.output_dir {
            exp.insert("output_dir".into(), toml::Value::String(dir.clone()));
        }
        if preset == Preset::Custom {
            for s in ["potential", "dynamics"] {
                if !user.contains_key(s) {
                    return Err(Error::config(s, "required for the custom preset"));
                }
            }
        }

        let base = ExperimentConfig::preset(preset, 0);
        let mut merged = toml::Table::try_from(&base).expect("config serializes");
        if let Some(toml::Value::Table(e)) = merged.get_mut("experiment") {
            e.remove("seed");
        }
        // derived defaults are recomputed after the merge
        if let Some(toml::Value::Table(t)) = merged.get_mut("transport") {
            t.remove("gamma");
        }
        if base.phase.x.iter().all(|&v| v == 0.0) {
            if let Some(toml::Value::Table(t)) = merged.get_mut("phase") {
                t.remove("x");
            }
        }
        for (key, val) in user {
            let replace = matches!(key.as_str(), "potential" | "dynamics")
                && matches!(&val, toml::Value::Table(t) if t.contains_key("kind"));
            match (merged.get_mut(&key), val) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) if !replace => {
                    for (k, v) in src {
                        dst.insert(k, v);
                    }
                }
                (_, v) => {
                    merged.insert(key, v);
                }
            }
        }

        fn section<T: serde::de::DeserializeOwned>(t: &toml::Table, name: &str) -> Result<T> {
            let v = t.get(name).cloned().unwrap_or(toml::Value::Table(toml::Table::new()));
            v.try_into().map_err(|e: toml::de::Error| Error::config(name, e.message().trim().to_string()))
        }
        let mut cfg = ExperimentConfig {
            experiment: section(&merged, "experiment")?,
            potential: section(&merged, "potential")?,
            dynamics: section(&merged, "dynamics")?,
            phase: section(&merged, "phase")?,
            quantum: section(&merged, "quantum")?,
            transport: section(&merged, "transport")?,
            cocycle: section(&merged, "cocycle")?,
            equidistribution: section(&merged, "equidistribution")?,
        };
        cfg.resolve_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, ov: &Overrides) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text, ov)
    }

    fn resolve_defaults(&mut self) {
        let dim = self.dynamics.dim();
        if self.phase.x.is_empty() {
            self.phase.x = vec![0.0; dim];
        }
        if self.equidistribution.center.is_empty() {
            self.equidistribution.center = vec![0.0; dim];
        }
        if self.transport.gamma.is_none() {
            self.transport.gamma = Some(self.transport.zeta * (1.0 + self.potential.sigma()));
        }
        let lv = self.cocycle.levels();
        self.cocycle.a = Some(lv.a);
        self.cocycle.c = Some(lv.c);
        self.cocycle.d = Some(lv.d);
    }

    pub fn gamma(&self) -> f64 {
        self.transport.gamma.unwrap_or(self.transport.zeta * (1.0 + self.potential.sigma()))
    }

    /// Resolved config as TOML, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Schema and consistency checks; runs no numerics.
    pub fn validate(&self) -> Result<()> {
        let q = &self.quantum;
        let tr = &self.transport;
        let co = &self.cocycle;
        let dim = self.dynamics.dim();

        if self.dynamics.kind == DynamicsKind::SkewShift && dim < 2 {
            return Err(Error::config("dynamics.dim", format!("skew-shift needs dimension >= 2, got {dim}")));
        }
        if self.dynamics.omega.is_empty() || self.dynamics.omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("dynamics.omega", "must be a non-empty list of finite numbers"));
        }
        self.dynamics.diophantine.validate().map_err(|e| Error::config("dynamics.diophantine", e.to_string()))?;
        if self.potential.nu() != dim {
            return Err(Error::config(
                "potential.nu",
                format!("potential lives on T^{} but the dynamics on T^{dim}", self.potential.nu()),
            ));
        }
        if self.phase.x.len() != dim || self.phase.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("phase.x", format!("need {dim} finite coordinates")));
        }
        if self.equidistribution.center.len() != dim {
            return Err(Error::config("equidistribution.center", format!("need {dim} coordinates")));
        }
        self.potential.build()?;

        if q.t_grid.is_empty() || q.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::config("quantum.t_grid", "must be a non-empty list of positive times"));
        }
        if q.t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("quantum.t_grid", "must be strictly increasing"));
        }
        if self.experiment.preset == Preset::Free {
            if q.t_grid.len() < 2 {
                return Err(Error::config("quantum.t_grid", "the ballistic fit needs at least 2 times"));
            }
        } else {
            let (lo, hi) = (q.t_grid[0], q.t_grid[q.t_grid.len() - 1]);
            if q.t_grid.len() < 6 {
                return Err(Error::config("quantum.t_grid", "transport fits need at least 6 times"));
            }
            if lo < 10.0 {
                return Err(Error::config("quantum.t_grid", "transport fits need T >= 10"));
            }
            if hi / lo < 1e3 * (1.0 - 1e-12) {
                return Err(Error::config("quantum.t_grid", "transport fits need at least 3 decades"));
            }
        }
        if q.p_list.is_empty() || q.p_list.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::config("quantum.p_list", "moment orders must be positive"));
        }
        if !(q.leak_tol > 0.0 && q.leak_tol < 1.0) {
            return Err(Error::config("quantum.leak_tol", "must lie in (0, 1)"));
        }
        if let Some(l) = q.half_width {
            if l < 4 {
                return Err(Error::config("quantum.half_width", "must be >= 4"));
            }
        }
        if q.window_cap < INITIAL_WINDOW {
            return Err(Error::config("quantum.window_cap", format!("must be >= {INITIAL_WINDOW}")));
        }

        if !(self.gamma() > 1.0) {
            return Err(Error::config("transport.gamma", "must exceed 1"));
        }
        if !(tr.zeta > 1.0) {
            return Err(Error::config("transport.zeta", "must exceed 1"));
        }
        if !(tr.xi > 0.0) {
            return Err(Error::config("transport.xi", "must be positive"));
        }
        if !(tr.eps >= 0.0) {
            return Err(Error::config("transport.eps", "must be >= 0"));
        }
        if tr.alpha_list.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::config("transport.alpha_list", "exponents must be >= 0"));
        }
        if !(tr.dt_safety > 0.0) {
            return Err(Error::config("transport.dt_safety", "must be positive"));
        }
        if tr.dt && !(tr.dt_t_max >= 10.0) {
            return Err(Error::config("transport.dt_t_max", "must be >= 10"));
        }

        if co.lyapunov_n.iter().any(|&n| n == 0) {
            return Err(Error::config("cocycle.lyapunov_n", "lengths must be >= 1"));
        }
        if co.num_phases < 2 {
            return Err(Error::config("cocycle.num_phases", "must be >= 2"));
        }
        if co.k_list.iter().any(|&k| k == 0) {
            return Err(Error::config("cocycle.k_list", "scales must be >= 1"));
        }
        if !co.energy.is_finite() {
            return Err(Error::config("cocycle.energy", "must be finite"));
        }
        if !(co.tau > 0.0 && co.tau < 1.0) {
            return Err(Error::config("cocycle.tau", "must lie in (0, 1)"));
        }
        co.levels().validate(co.tau).map_err(|e| Error::config("cocycle.a", e.to_string()))?;
        if self.equidistribution.n_list.iter().any(|&n| n == 0) {
            return Err(Error::config("equidistribution.n_list", "lengths must be >= 1"));
        }
        if self.experiment.threads == Some(0) {
            return Err(Error::config("experiment.threads", "must be >= 1"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<(Potential, Dynamics, TorusPoint)> {
        Ok((self.potential.build()?, self.dynamics.build()?, TorusPoint::new(self.phase.x.clone())))
    }
}

// ---- pipelines -------------------------------------------------------------

/// Target exponent of the moment bound `<|X|^p> <= C ln(T)^{p e}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub sigma: f64,
    pub scaling: String,
    /// Expected transport exponent.
    pub exponent: f64,
    /// Exponent used by the envelope check: `exponent + eps`.
    pub envelope_exponent: f64,
    /// Discrepancy exponent entering the multi-frequency bound, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub statement: String,
}

impl Target {
    pub fn for_config(cfg: &ExperimentConfig) -> Target {
        let sigma = cfg.potential.sigma();
        let nu = cfg.dynamics.dim() as f64;
        let eps = cfg.transport.eps;
        let a = match cfg.dynamics.diophantine {
            DiophantineClass::Dc { a, .. } | DiophantineClass::Sdc { a, .. } => a,
            DiophantineClass::Unclassified => 1.0,
        };
        let scale = |delta: f64, statement: String| {
            let e = (sigma * nu + 1.0) / delta;
            Target {
                sigma,
                scaling: "loglog".into(),
                exponent: e,
                envelope_exponent: e + eps,
                delta: Some(delta),
                statement,
            }
        };
        match cfg.experiment.preset {
            Preset::Free => Target {
                sigma,
                scaling: "log".into(),
                exponent: 1.0,
                envelope_exponent: 1.0,
                delta: None,
                statement: "ballistic: <|X|^p> ~ T^p".into(),
            },
            Preset::OneFreqAnalytic | Preset::Custom if cfg.dynamics.dim() == 1 => Target {
                sigma,
                scaling: "loglog".into(),
                exponent: 1.0 + sigma,
                envelope_exponent: 1.0 + sigma + eps,
                delta: None,
                statement: format!("<|X|^m> <= C ln(T)^(m (sigma + 1 + eps)), sigma = {sigma}, eps = {eps}"),
            },
            _ if cfg.dynamics.kind == DynamicsKind::SkewShift => {
                let delta = 1.0 / (a * nu * 2f64.powf(nu - 1.0));
                scale(delta, format!("<|X|^m> <= C ln(T)^(m gamma), gamma ~ (sigma nu + 1)/delta, delta = 1/(A nu 2^(nu-1)) = {delta}"))
            }
            _ => {
                let delta = 1.0 / (a + nu);
                scale(delta, format!("<|X|^m> <= C ln(T)^(m gamma), gamma ~ (sigma nu + 1)/delta, delta = 1/(A + nu) = {delta}"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub preset: Preset,
    pub seed: u64,
    pub target: Target,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// One `(T, p)` moment sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub p: f64,
    pub moment: f64,
    pub half_width: usize,
    pub leak: f64,
    pub total: f64,
}

pub const MOMENTS_HEADER: &str = "t,p,moment,half_width,leak,total";

pub fn moments_csv(rows: &[MomentRow]) -> String {
    let mut out = format!("{MOMENTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", Num(r.t), Num(r.p), Num(r.moment), r.half_width, Num(r.leak), Num(r.total));
    }
    out
}

/// DT criterion at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DtRow {
    pub t: f64,
    pub gamma: f64,
    pub n: usize,
    pub log_integral: f64,
    pub log_bound: f64,
    /// `ln P(N, T)`; `None` when `N` lies outside the window.
    pub log_p: Option<f64>,
    pub k: f64,
    pub refined_panels: usize,
    pub direction_asymmetry: f64,
}

pub const DT_HEADER: &str = "t,gamma,n,log_integral,log_bound,log_p,k,refined_panels,direction_asymmetry";

pub fn dt_csv(rows: &[DtRow]) -> String {
    let mut out = format!("{DT_HEADER}\n");
    for r in rows {
        let lp = r.log_p.map(|v| Num(v).to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            Num(r.t),
            Num(r.gamma),
            r.n,
            Num(r.log_integral),
            Num(r.log_bound),
            lp,
            Num(r.k),
            r.refined_panels,
            Num(r.direction_asymmetry)
        );
    }
    out
}

/// Amplitude profiles on the configured time grid, in grid order.
pub fn compute_profiles(cfg: &ExperimentConfig) -> Result<Vec<AmplitudeProfile>> {
    let (f, d, x) = cfg.model()?;
    let q = &cfg.quantum;
    let profiles = match q.half_width {
        Some(l) => {
            let spec = TruncatedOperator::build(&f, &d, &x, l)?.diagonalize()?;
            let profiles = profiles_for_times(&spec, &q.t_grid, q.leak_tol)?;
            if let Some(p) = profiles.iter().find(|p| !p.is_valid()) {
                return Err(Error::InvalidProfile { leak: p.truncation_leak, tol: p.leak_tol });
            }
            profiles
        }
        None => q
            .t_grid
            .par_iter()
            .map(|&t| adaptive_profile(&f, &d, &x, t, q.leak_tol, q.window_cap))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(profiles)
}

pub fn moment_rows(cfg: &ExperimentConfig, profiles: &[AmplitudeProfile]) -> Result<Vec<MomentRow>> {
    let mut rows = Vec::new();
    for prof in profiles {
        let total = prof.total();
        for &p in &cfg.quantum.p_list {
            rows.push(MomentRow {
                t: prof.t,
                p,
                moment: moments(prof, p)?,
                half_width: prof.half_width,
                leak: prof.truncation_leak,
                total,
            });
        }
    }
    Ok(rows)
}

fn series_for(rows: &[MomentRow], p: f64, experiment: &str) -> Result<MomentSeries> {
    MomentSeries::new(p, rows.iter().filter(|r| r.p == p).map(|r| (r.t, r.moment)).collect(), experiment)
}

/// Slope of `ln <|X|^p>` against `ln T`, divided by `p`.
pub fn power_slope(series: &MomentSeries) -> Result<f64> {
    let x: Vec<f64> = series.entries.iter().map(|e| series.p * e.0.ln()).collect();
    let y: Vec<f64> = series.entries.iter().map(|e| e.1.ln()).collect();
    Ok(least_squares(&x, &y)?.slope)
}

/// Transport estimate rows for the moment table and profiles.
pub fn transport_rows(cfg: &ExperimentConfig, rows: &[MomentRow], profiles: &[AmplitudeProfile]) -> Result<Vec<EstimateRow>> {
    let name = cfg.experiment.preset.name();
    let mut out = Vec::new();
    let (t_min, t_max) = (cfg.quantum.t_grid[0], cfg.quantum.t_grid[cfg.quantum.t_grid.len() - 1]);
    for &p in &cfg.quantum.p_list {
        let s = series_for(rows, p, name)?;
        if s.entries.len() >= 6 && s.entries[0].0 >= 10.0 {
            out.extend(fit_beta_log(&s)?.rows(name, p));
            out.extend(fit_beta_power(&s)?.rows(name, p));
        } else {
            out.push(EstimateRow {
                experiment: name.into(),
                parameter: "p".into(),
                value: p,
                quantity: "power_slope".into(),
                estimate: power_slope(&s)?,
                residual: f64::NAN,
                t_min,
                t_max,
            });
        }
    }
    for &alpha in &cfg.transport.alpha_list {
        let est = fit_s_log(profiles, alpha)?;
        for (q, v) in [
            ("s_log_plus", est.s_plus),
            ("s_log_minus", est.s_minus),
            ("alpha_log_plus_bound", est.alpha_log_bound),
            ("alpha_log_minus_bound", est.alpha_log_minus_bound),
        ] {
            out.push(EstimateRow {
                experiment: name.into(),
                parameter: "alpha".into(),
                value: alpha,
                quantity: q.into(),
                estimate: v,
                residual: f64::NAN,
                t_min,
                t_max,
            });
        }
    }
    Ok(out)
}

/// DT integral, bound and computed outside probability for `T <= dt_t_max`.
/// `profiles` must belong to the same grid; pass `None` to skip `P`.
pub fn dt_rows(cfg: &ExperimentConfig, profiles: Option<&[AmplitudeProfile]>) -> Result<Vec<DtRow>> {
    let (f, d, x) = cfg.model()?;
    let gamma = cfg.gamma();
    let mut out = Vec::new();
    for (i, &t) in cfg.quantum.t_grid.iter().enumerate() {
        if t > cfg.transport.dt_t_max || t < 10.0 {
            continue;
        }
        let integral = dt_integral(&f, &d, &x, t, gamma)?;
        let bound = dt_outside_bound_from(t, &integral);
        let log_p = match profiles.map(|p| &p[i]) {
            Some(prof) if integral.n_used < prof.half_width => {
                Some(outside_probability(prof, integral.n_used)?.p.ln())
            }
            _ => None,
        };
        out.push(DtRow {
            t,
            gamma,
            n: integral.n_used,
            log_integral: integral.log_value,
            log_bound: bound.log_bound,
            log_p,
            k: integral.k,
            refined_panels: integral.refined_panels,
            direction_asymmetry: integral.direction_asymmetry,
        });
    }
    Ok(out)
}

fn dt_estimate_rows(name: &str, gamma: f64, dt: &[DtRow]) -> Result<Vec<EstimateRow>> {
    let mut out: Vec<EstimateRow> = dt
        .iter()
        .map(|r| EstimateRow {
            experiment: name.into(),
            parameter: "gamma".into(),
            value: gamma,
            quantity: "dt_log_integral".into(),
            estimate: r.log_integral,
            residual: f64::NAN,
            t_min: r.t,
            t_max: r.t,
        })
        .collect();
    if dt.len() >= 2 {
        let x: Vec<f64> = dt.iter().map(|r| r.t.ln()).collect();
        let y: Vec<f64> = dt.iter().map(|r| r.log_integral).collect();
        let lf = least_squares(&x, &y)?;
        out.push(EstimateRow {
            experiment: name.into(),
            parameter: "gamma".into(),
            value: gamma,
            quantity: "dt_slope".into(),
            estimate: lf.slope,
            residual: lf.residual,
            t_min: dt[0].t,
            t_max: dt[dt.len() - 1].t,
        });
    }
    Ok(out)
}

/// Largest ratio `<|X|^p> / ln(T)^{p e}` on the first half of the grid and
/// the largest ratio on the rest.
pub fn envelope_constants(series: &MomentSeries, exponent: f64) -> (f64, f64) {
    let ratios: Vec<f64> = series
        .entries
        .iter()
        .map(|&(t, m)| m / t.ln().powf(series.p * exponent))
        .collect();
    let h = ratios.len().div_ceil(2);
    let fit = ratios[..h].iter().copied().fold(0.0, f64::max);
    let rest = ratios[h..].iter().copied().fold(0.0, f64::max);
    (fit, rest)
}

fn summary_checks(
    cfg: &ExperimentConfig,
    target: &Target,
    rows: &[MomentRow],
    profiles: &[AmplitudeProfile],
    dt: &[DtRow],
) -> Result<Vec<Check>> {
    let name = cfg.experiment.preset.name();
    let mut checks = Vec::new();
    let worst = profiles.iter().map(|p| (p.total() - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check {
        name: "normalization".into(),
        pass: worst <= NORMALIZATION_TOL,
        value: worst,
        threshold: NORMALIZATION_TOL,
        detail: "max |sum_n a(n,T) - 1| over the grid".into(),
    });
    for &p in &cfg.quantum.p_list {
        let s = series_for(rows, p, name)?;
        if cfg.experiment.preset == Preset::Free {
            let slope = power_slope(&s)? * p;
            let tol = 0.05 * p;
            checks.push(Check {
                name: format!("ballistic_slope_p{p}"),
                pass: (slope - p).abs() <= tol,
                value: slope,
                threshold: tol,
                detail: format!("log-log slope of <|X|^{p}> against T, expected {p}"),
            });
            continue;
        }
        let est = fit_beta_log(&s)?;
        checks.push(Check {
            name: format!("beta_log_fit_p{p}"),
            pass: est.beta.is_finite() && est.residual < 0.2,
            value: est.residual,
            threshold: 0.2,
            detail: format!("fitted beta_ln({p}) = {:.4}; target {}", est.beta, target.exponent),
        });
        let (c, rest) = envelope_constants(&s, target.envelope_exponent);
        checks.push(Check {
            name: format!("moment_envelope_p{p}"),
            pass: rest <= c,
            value: rest / c,
            threshold: 1.0,
            detail: format!(
                "C = {c:e} fitted on the first half of the grid, exponent {} (ln T)^{}",
                target.envelope_exponent,
                p * target.envelope_exponent
            ),
        });
    }
    if dt.len() >= 2 {
        let x: Vec<f64> = dt.iter().map(|r| r.t.ln()).collect();
        let y: Vec<f64> = dt.iter().map(|r| r.log_integral).collect();
        let slope = least_squares(&x, &y)?.slope;
        checks.push(Check {
            name: "dt_decay".into(),
            pass: slope <= -cfg.transport.xi,
            value: slope,
            threshold: -cfg.transport.xi,
            detail: format!("slope of ln integral against ln T, gamma = {}", cfg.gamma()),
        });
    }
    if !dt.is_empty() {
        let ln_safety = cfg.transport.dt_safety.ln();
        let margins: Vec<f64> = dt.iter().filter_map(|r| r.log_p.map(|lp| lp - r.log_bound)).collect();
        let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check {
            name: "dt_consistency".into(),
            pass: !margins.is_empty() && worst <= ln_safety,
            value: worst,
            threshold: ln_safety,
            detail: format!(
                "max ln(P / bound) over {} of {} grid points (the rest have N beyond the window)",
                margins.len(),
                dt.len()
            ),
        });
    }
    Ok(checks)
}

/// Everything `run` computes, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub profiles: Vec<AmplitudeProfile>,
    pub moments: Vec<MomentRow>,
    pub estimates: Vec<EstimateRow>,
    pub dt: Vec<DtRow>,
    pub summary: Summary,
}

impl RunOutput {
    /// `(relative path, contents)` of every deterministic artifact.
    pub fn artifacts(&self) -> Result<Vec<(PathBuf, String)>> {
        let mut files = Vec::new();
        for (i, p) in self.profiles.iter().enumerate() {
            files.push((PathBuf::from(format!("amplitudes/t{i:02}.csv")), p.to_csv()));
        }
        files.push(("moments.csv".into(), moments_csv(&self.moments)));
        files.push(("transport.csv".into(), estimates_csv(&self.estimates)));
        if !self.dt.is_empty() {
            files.push(("dt.csv".into(), dt_csv(&self.dt)));
        }
        let summary = serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Io(e.to_string()))?;
        files.push(("summary.json".into(), summary + "\n"));
        Ok(files)
    }
}

/// Runs the full pipeline inside a pool of `threads` workers (rayon's
/// default when `None`).
pub fn compute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    with_pool(cfg.experiment.threads, || {
        let profiles = compute_profiles(cfg)?;
        let moments = moment_rows(cfg, &profiles)?;
        let mut estimates = transport_rows(cfg, &moments, &profiles)?;
        let dt = if cfg.transport.dt { dt_rows(cfg, Some(&profiles))? } else { Vec::new() };
        estimates.extend(dt_estimate_rows(cfg.experiment.preset.name(), cfg.gamma(), &dt)?);
        let target = Target::for_config(cfg);
        let checks = summary_checks(cfg, &target, &moments, &profiles, &dt)?;
        let summary = Summary { preset: cfg.experiment.preset, seed: cfg.experiment.seed, target, checks };
        Ok(RunOutput { profiles, moments, estimates, dt, summary })
    })
}

pub fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(job),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'static str,
    version: &'static str,
    created_unix: u64,
    seed: u64,
    threads: Option<usize>,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Computes and writes `manifest.json` plus the artifacts under the
/// configured output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary> {
    let out = compute(cfg)?;
    let dir = PathBuf::from(&cfg.experiment.output_dir);
    let files = out.artifacts()?;
    fs::create_dir_all(dir.join("amplitudes"))?;
    for (path, body) in &files {
        fs::write(dir.join(path), body)?;
    }
    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = Manifest {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        created_unix,
        seed: cfg.experiment.seed,
        threads: cfg.experiment.threads,
        files: files.iter().map(|(p, _)| p.display().to_string()).collect(),
        config: cfg,
    };
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), body + "\n")?;
    Ok(out.summary)
}

// ---- single-module tables ---------------------------------------------------

pub fn lyapunov_csv(cfg: &ExperimentConfig) -> Result<String> {
    let (f, d, _) = cfg.model()?;
    let co = &cfg.cocycle;
    let z = C64::new(co.energy, 0.0);
    let mut out = String::from("n,energy,mean,stderr,num_phases\n");
    for &n in &co.lyapunov_n {
        let est = lyapunov(&f, &d, z, n, co.num_phases, cfg.experiment.seed)?;
        let _ = writeln!(out, "{},{},{},{},{}", n, Num(co.energy), Num(est.mean), Num(est.stderr), est.num_phases);
    }
    Ok(out)
}

pub fn moments_table(cfg: &ExperimentConfig) -> Result<String> {
    let profiles = compute_profiles(cfg)?;
    Ok(moments_csv(&moment_rows(cfg, &profiles)?))
}

pub fn transport_table(cfg: &ExperimentConfig) -> Result<String> {
    let profiles = compute_profiles(cfg)?;
    let rows = moment_rows(cfg, &profiles)?;
    Ok(estimates_csv(&transport_rows(cfg, &rows, &profiles)?))
}

/// Hit counts of balls of radius `N^{-1/(nu + A)}`, with the Fejér bound on shifts.
pub fn discrepancy_csv(cfg: &ExperimentConfig) -> Result<String> {
    let (_, d, x) = cfg.model()?;
    let center = TorusPoint::new(cfg.equidistribution.center.clone());
    let a = match cfg.dynamics.diophantine {
        DiophantineClass::Dc { a, .. } | DiophantineClass::Sdc { a, .. } => a,
        DiophantineClass::Unclassified => 1.0,
    };
    let mut out = String::from("n,eps,hits,bound,holds\n");
    for &n in &cfg.equidistribution.n_list {
        let eps = fejer_radius(n, d.dim(), a);
        if d.kind == DynamicsKind::Shift {
            let b = fejer_hit_bound(&d, &x, &center, eps, n, a)?;
            let _ = writeln!(out, "{},{},{},{},{}", n, Num(b.eps), b.lhs, Num(b.rhs), b.holds);
        } else {
            let r = hit_count(&d, &x, &TargetSet::ball(center.clone(), eps.min(0.5))?, n)?;
            let _ = writeln!(out, "{},{},{},,", n, Num(eps.min(0.5)), r.hits);
        }
    }
    Ok(out)
}

/// Monte Carlo measure of the deviation set at each configured `k`.
pub fn ldt_csv(cfg: &ExperimentConfig) -> Result<String> {
    let (f, d, _) = cfg.model()?;
    let co = &cfg.cocycle;
    let z = C64::new(co.energy, 0.0);
    let seed = cfg.experiment.seed;
    let l_ref = lyapunov_reference(&f, &d, z, co.num_phases.min(2_000), seed)?;
    let mut out = String::from("k,energy,a_frac,l_ref,measure,stderr\n");
    for &k in &co.k_list {
        let (m, se) = deviation_measure(&f, &d, z, k, co.a_frac, l_ref, co.num_phases, seed.wrapping_add(k as u64))?;
        let _ = writeln!(out, "{},{},{},{},{},{}", k, Num(co.energy), Num(co.a_frac), Num(l_ref), Num(m), Num(se));
    }
    Ok(out)
}

pub fn dt_table(cfg: &ExperimentConfig) -> Result<String> {
    Ok(dt_csv(&dt_rows(cfg, None)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for p in Preset::ALL {
            let cfg = ExperimentConfig::preset(p, 7);
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name()));
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml(), &Overrides::default()).unwrap();
            assert_eq!(back, cfg, "{}", p.name());
        }
    }

    #[test]
    fn missing_seed_is_an_error() {
        let e = ExperimentConfig::from_toml_str("[experiment]\npreset = \"free\"\n", &Overrides::default()).unwrap_err();
        assert!(matches!(&e, Error::Config { field, message } if field == "experiment" && message.contains("seed")), "{e}");
        let ok = ExperimentConfig::from_toml_str(
            "[experiment]\npreset = \"free\"\n",
            &Overrides { seed: Some(3), ..Default::default() },
        )
        .unwrap();
        assert_eq!(ok.experiment.seed, 3);
    }

    #[test]
    fn decreasing_grid_names_the_field() {
        let text = "[experiment]\npreset = \"free\"\nseed = 1\n[quantum]\nt_grid = [40.0, 20.0, 10.0]\n";
        let e = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "quantum.t_grid"), "{e}");
    }

    #[test]
    fn skew_shift_needs_two_dimensions() {
        let text = "[experiment]\npreset = \"skew-shift-gevrey\"\nseed = 1\n[dynamics]\ndim = 1\n";
        let e = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "dynamics.dim"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[experiment]\npreset = \"free\"\nseed = 1\n[quantum]\ntgrid = [1.0]\n";
        let e = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap_err();
        assert!(matches!(&e, Error::Config { field, message } if field == "quantum" && message.contains("tgrid")), "{e}");
        let e = ExperimentConfig::from_toml_str("[experiment]\npreset=\"free\"\nseed=1\n[extra]\n", &Overrides::default())
            .unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "extra"));
    }

    #[test]
    fn potential_section_with_kind_replaces_preset() {
        let text = "[experiment]\npreset = \"one-freq-analytic\"\nseed = 1\n[potential]\nkind = \"zero\"\nnu = 1\n";
        let cfg = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap();
        assert_eq!(cfg.potential, PotentialConfig::Zero { nu: 1 });
        let text = "[experiment]\npreset = \"one-freq-analytic\"\nseed = 1\n[potential]\nlambda = 2.0\n";
        let cfg = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap();
        assert_eq!(cfg.potential, PotentialConfig::Cosine { nu: 1, lambda: 2.0 });
    }

    #[test]
    fn custom_needs_model_sections() {
        let e = ExperimentConfig::from_toml_str("[experiment]\npreset=\"custom\"\nseed=1\n", &Overrides::default())
            .unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "potential"));
    }

    #[test]
    fn gamma_follows_zeta_and_sigma() {
        let cfg = ExperimentConfig::preset(Preset::OneFreqAnalytic, 1);
        assert_eq!(cfg.gamma(), 2.5);
        let cfg = ExperimentConfig::preset(Preset::MultiFreqGevrey, 1);
        assert_eq!(cfg.gamma(), 3.75);
    }

    #[test]
    fn targets() {
        let t = Target::for_config(&ExperimentConfig::preset(Preset::OneFreqAnalytic, 1));
        assert_eq!((t.exponent, t.envelope_exponent), (2.0, 2.5));
        let t = Target::for_config(&ExperimentConfig::preset(Preset::MultiFreqAnalytic, 1));
        // delta = 1/(A + nu) = 1/4, gamma = (sigma nu + 1)/delta = 12
        assert_eq!(t.delta, Some(0.25));
        assert_eq!(t.exponent, 12.0);
        let t = Target::for_config(&ExperimentConfig::preset(Preset::SkewShiftGevrey, 1));
        assert_eq!(t.delta, Some(0.25));
        assert_eq!(t.exponent, 20.0);
    }

    #[test]
    fn envelope_on_constant_series() {
        let s = MomentSeries::new(2.0, half_decades(2, 6).into_iter().map(|t| (t, 3.0)).collect(), "c").unwrap();
        let (c, rest) = envelope_constants(&s, 2.5);
        assert!(rest < c);
    }
}
