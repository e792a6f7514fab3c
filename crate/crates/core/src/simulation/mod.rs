//! Simulation design with correctly or incorrectly specified working models.
//!
//! Covariates `X₁..X₄ ~ N(0.25, 1)` and `X₅ ~ Bernoulli(0.5)` enter through
//! linear predictors `C_j = X_j - 0.25` or quadratic ones
//! `C̃_j = (X_j² - 1)/√2`. A "yes" label uses `C` in the generating model, so
//! the linear-in-`X` working model is correct; "no" uses `C̃`.

mod oracle;
mod study;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub use oracle::{formula_oracle, latent_truth, true_pce, Formula, OracleTruth};
pub use study::{
    export_violin_data, fitting_spec, run_scenario, run_study, EstimatorSeries, ScenarioResult, StudyConfig, Summary,
};

use crate::data::{Dataset, Unit};
use crate::error::{Error, Result};
use crate::glm::{logistic, FitOptions, NuisanceFit};

/// Number of covariates in the design.
pub const K: usize = 5;

/// Which of the treatment-probability, principal-score and outcome models
/// use linear predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Scenario {
    pub tp: bool,
    pub ps: bool,
    pub om: bool,
}

impl Scenario {
    pub const ALL_YES: Scenario = Scenario { tp: true, ps: true, om: true };

    /// The eight scenarios, starting from all-yes.
    pub fn all() -> [Scenario; 8] {
        let mut out = [Scenario::ALL_YES; 8];
        for (i, s) in out.iter_mut().enumerate() {
            *s = Scenario { tp: i & 4 == 0, ps: i & 2 == 0, om: i & 1 == 0 };
        }
        out
    }

    pub fn index(self) -> usize {
        (usize::from(!self.tp) << 2) | (usize::from(!self.ps) << 1) | usize::from(!self.om)
    }

    /// Number of correctly specified models.
    pub fn n_correct(self) -> usize {
        usize::from(self.tp) + usize::from(self.ps) + usize::from(self.om)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        write!(f, "tp:{}/ps:{}/om:{}", yn(self.tp), yn(self.ps), yn(self.om))
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Accepts `yes,no,yes` or `tp:yes/ps:no/om:yes`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split([',', '/']).map(str::trim).collect();
        let bad = || Error::InvalidConfig(format!("cannot parse scenario '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut flags = [false; 3];
        for (i, (part, prefix)) in parts.iter().zip(["tp:", "ps:", "om:"]).enumerate() {
            let v = part.strip_prefix(prefix).unwrap_or(part);
            flags[i] = match v {
                "yes" | "y" | "1" | "true" => true,
                "no" | "n" | "0" | "false" => false,
                _ => return Err(bad()),
            };
        }
        Ok(Scenario { tp: flags[0], ps: flags[1], om: flags[2] })
    }
}

/// Variants of the generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    /// `logit p_z = (2z - 1)(δ + L)`, `L = 0.4 Σ_{j≤4} (-1)^j P_j`.
    Standard,
    /// Monotone scores `logit p_z = (2z - 1)δ + L` with latent strata whose
    /// outcome means follow the tilting model with constants `ε₁`, `ε₀`.
    Tilted { eps1: f64, eps0: f64 },
    /// One-sided noncompliance: `p₀ ≡ 0`, `logit p₁ = δ + L`.
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DgpSpec {
    pub scenario: Scenario,
    pub kind: DgpKind,
    pub n: usize,
    pub seed: u64,
    /// Intercept `δ` added to the principal-score index.
    pub ps_shift: f64,
}

pub const DEFAULT_PS_SHIFT: f64 = 1.0;

impl DgpSpec {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        DgpSpec { scenario, kind: DgpKind::Standard, n, seed, ps_shift: DEFAULT_PS_SHIFT }
    }

    pub fn with_kind(mut self, kind: DgpKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::InvalidConfig(format!("sample size {} below 50", self.n)));
        }
        if let DgpKind::Tilted { eps1, eps0 } = self.kind {
            if !(eps1 > 0.0 && eps0 > 0.0) {
                return Err(Error::InvalidConfig("tilting constants must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Covariates and both predictor sets for one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariates {
    pub x: [f64; K],
    pub c: [f64; K],
    pub ct: [f64; K],
}

impl Covariates {
    pub fn from_x(x: [f64; K]) -> Self {
        Covariates { x, c: x.map(|v| v - 0.25), ct: x.map(|v| (v * v - 1.0) / std::f64::consts::SQRT_2) }
    }

    fn pick(&self, linear: bool) -> &[f64; K] {
        if linear {
            &self.c
        } else {
            &self.ct
        }
    }
}

pub(crate) fn draw_covariates<R: Rng>(rng: &mut R) -> Covariates {
    let mut x = [0.0; K];
    for v in x.iter_mut().take(4) {
        let e: f64 = StandardNormal.sample(rng);
        *v = 0.25 + e;
    }
    x[4] = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
    Covariates::from_x(x)
}

/// True nuisance functions at one covariate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueNuisance {
    pub pi: f64,
    pub p1: f64,
    pub p0: f64,
    /// Observed-cell outcome means `[z][s]`.
    pub mu: [[f64; 2]; 2],
}

impl TrueNuisance {
    pub fn e(&self) -> [f64; 3] {
        [self.p1 - self.p0, 1.0 - self.p1, self.p0]
    }
}

pub fn true_nuisance(spec: &DgpSpec, cov: &Covariates) -> TrueNuisance {
    let sc = spec.scenario;
    let pi = if sc.tp { 0.5 } else { logistic(0.4 * cov.ct[..4].iter().sum::<f64>()) };
    let p = cov.pick(sc.ps);
    let l = 0.4 * (-p[0] + p[1] - p[2] + p[3]);
    let d = spec.ps_shift;
    let (p1, p0) = match spec.kind {
        DgpKind::Standard => (logistic(d + l), logistic(-(d + l))),
        DgpKind::Tilted { .. } => (logistic(d + l), logistic(-d + l)),
        DgpKind::OneSided => (logistic(d + l), 0.0),
    };
    let base: f64 = cov.pick(sc.om).iter().sum();
    let m = |z: f64, s: f64| (1.0 + z + s) / 4.0 * base;
    TrueNuisance { pi, p1, p0, mu: [[m(0.0, 0.0), m(0.0, 1.0)], [m(1.0, 0.0), m(1.0, 1.0)]] }
}

/// Tilting weights `(ω₁,₁₀, ω₀,₁₀, ω₀,₀₀, ω₁,₁₁)` at one unit.
pub(crate) fn omega_at(t: &TrueNuisance, eps1: f64, eps0: f64) -> [f64; 4] {
    let [e10, e00, e11] = t.e();
    [
        (eps1 * e10 + eps1 * e11) / (eps1 * e10 + e11),
        (eps0 * e10 + eps0 * e00) / (eps0 * e10 + e00),
        (e10 + e00) / (eps0 * e10 + e00),
        (e10 + e11) / (eps1 * e10 + e11),
    ]
}

/// Potential-outcome means `(E[Y₁ | U, X], E[Y₀ | U, X])` for `U = 10, 00, 11`.
pub(crate) fn latent_means(spec: &DgpSpec, t: &TrueNuisance) -> [[f64; 2]; 3] {
    let mu = t.mu;
    match spec.kind {
        DgpKind::Tilted { eps1, eps0 } => {
            let [w110, w010, w000, w111] = omega_at(t, eps1, eps0);
            [[w110 * mu[1][1], w010 * mu[0][0]], [mu[1][0], w000 * mu[0][0]], [w111 * mu[1][1], mu[0][1]]]
        }
        _ => [[mu[1][1], mu[0][0]], [mu[1][0], mu[0][0]], [mu[1][1], mu[0][1]]],
    }
}

/// Per-replicate RNG keyed by `(seed, scenario, rep)`.
pub(crate) fn rep_rng(seed: u64, scenario: Scenario, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((scenario.index() as u64) << 48) | rep);
    rng
}

fn draw_unit<R: Rng>(spec: &DgpSpec, rng: &mut R) -> (Unit, TrueNuisance) {
    let cov = draw_covariates(rng);
    let t = true_nuisance(spec, &cov);
    let z = u8::from(rng.random::<f64>() < t.pi);
    let noise: f64 = StandardNormal.sample(rng);
    let (s, mean) = match spec.kind {
        DgpKind::Tilted { .. } => {
            let [e10, e00, _] = t.e();
            let v = rng.random::<f64>();
            let u = if v < e10 {
                0
            } else if v < e10 + e00 {
                1
            } else {
                2
            };
            // Principal strata 10, 00, 11 have (S₁, S₀) = (1, 0), (0, 0), (1, 1).
            let s = match (u, z) {
                (0, 1) | (2, _) => 1,
                _ => 0,
            };
            let arm = if z == 1 { 0 } else { 1 };
            (s, latent_means(spec, &t)[u][arm])
        }
        _ => {
            let p = if z == 1 { t.p1 } else { t.p0 };
            let s = u8::from(rng.random::<f64>() < p);
            (s, t.mu[z as usize][s as usize])
        }
    };
    (Unit::new(z, s, mean + noise, cov.x.to_vec()), t)
}

/// Draws replicate `rep` of the design. Deterministic in `(seed, scenario, rep)`.
pub fn generate(spec: &DgpSpec, rep: u64) -> Result<Dataset> {
    generate_with_truth(spec, rep).map(|(d, _)| d)
}

/// Like [`generate`], also returning the true nuisance values of every unit.
pub fn generate_with_truth(spec: &DgpSpec, rep: u64) -> Result<(Dataset, NuisanceFit)> {
    spec.check()?;
    let mut rng = rep_rng(spec.seed, spec.scenario, rep);
    let mut units = Vec::with_capacity(spec.n);
    let (mut pi, mut p1, mut p0) = (Vec::new(), Vec::new(), Vec::new());
    let mut mu: [[Vec<f64>; 2]; 2] = Default::default();
    for _ in 0..spec.n {
        let (u, t) = draw_unit(spec, &mut rng);
        units.push(u);
        pi.push(t.pi);
        p1.push(t.p1);
        p0.push(t.p0);
        for z in 0..2 {
            for s in 0..2 {
                mu[z][s].push(t.mu[z][s]);
            }
        }
    }
    let one_sided = spec.kind == DgpKind::OneSided;
    let [[m00, m01], [m10, m11]] = mu;
    let options = FitOptions { randomized: false, strong_monotonicity: one_sided };
    let nuis = NuisanceFit::from_values(
        pi,
        p1,
        p0,
        [[Some(m00), (!one_sided).then_some(m01)], [Some(m10), Some(m11)]],
        options,
    )?;
    let names = (1..=K).map(|j| format!("x{j}")).collect();
    Ok((Dataset::from_units(&units)?.with_covariate_names(names)?, nuis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_labels_and_parsing() {
        let all = Scenario::all();
        assert_eq!(all[0], Scenario::ALL_YES);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), *s);
        }
        assert_eq!("yes,no,yes".parse::<Scenario>().unwrap(), Scenario { tp: true, ps: false, om: true });
        assert_eq!(Scenario::ALL_YES.to_string(), "tp:yes/ps:yes/om:yes");
        assert!("yes,maybe,no".parse::<Scenario>().is_err());
    }

    #[test]
    fn centred_linear_scores_are_one_half_without_shift() {
        let cov = Covariates::from_x([0.25, 0.25, 0.25, 0.25, 1.0]);
        let spec = DgpSpec { ps_shift: 0.0, ..DgpSpec::new(Scenario::ALL_YES, 100, 1) };
        let t = true_nuisance(&spec, &cov);
        assert_eq!(t.p1, 0.5);
        assert_eq!(t.p0, 0.5);
        assert_eq!(t.pi, 0.5);
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = DgpSpec::new(Scenario { tp: false, ps: true, om: false }, 200, 9);
        assert_eq!(generate(&spec, 3).unwrap(), generate(&spec, 3).unwrap());
        assert_ne!(generate(&spec, 3).unwrap(), generate(&spec, 4).unwrap());
    }

    #[test]
    fn one_sided_controls_never_take_up() {
        let spec = DgpSpec::new(Scenario::ALL_YES, 500, 2).with_kind(DgpKind::OneSided);
        let d = generate(&spec, 0).unwrap();
        assert!((0..d.len()).all(|i| d.z()[i] == 1 || d.s()[i] == 0));
    }

    #[test]
    fn tilted_scores_are_monotone() {
        let spec = DgpSpec::new(Scenario::ALL_YES, 500, 2).with_kind(DgpKind::Tilted { eps1: 1.5, eps0: 1.5 });
        let (_, nuis) = generate_with_truth(&spec, 0).unwrap();
        assert!(nuis.p1.iter().zip(&nuis.p0).all(|(a, b)| a > b));
    }

    #[test]
    fn tilted_cell_means_match_observed_model() {
        let spec = DgpSpec::new(Scenario::ALL_YES, 100, 2).with_kind(DgpKind::Tilted { eps1: 1.7, eps0: 0.6 });
        let cov = Covariates::from_x([0.9, -0.3, 1.1, 0.2, 1.0]);
        let t = true_nuisance(&spec, &cov);
        let lm = latent_means(&spec, &t);
        let [e10, e00, e11] = t.e();
        let m11 = (e10 * lm[0][0] + e11 * lm[2][0]) / (e10 + e11);
        let m00 = (e10 * lm[0][1] + e00 * lm[1][1]) / (e10 + e00);
        assert!((m11 - t.mu[1][1]).abs() < 1e-12);
        assert!((m00 - t.mu[0][0]).abs() < 1e-12);
    }
}
