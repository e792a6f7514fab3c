//! Nonparametric bootstrap intervals. Each replicate resamples units with
//! replacement and refits every nuisance model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, Stratum, StratumMap};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind, EstimatorOptions};
use crate::exec;
use crate::glm::{fit_nuisance, FitOptions, NuisanceSpec};
use crate::sensitivity::{estimate_sens_dr, SensitivitySpec};

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Percentile,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub ci_method: CiMethod,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replicates: 1000, level: 0.95, seed: 0, ci_method: CiMethod::Percentile }
    }
}

impl BootstrapConfig {
    pub fn check(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidConfig("bootstrap needs at least 2 replicates".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    pub n_failed_replicates: usize,
}

/// Everything needed to go from a dataset to point estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub nuisance: NuisanceSpec,
    pub fit: FitOptions,
    pub estimators: Vec<EstimatorKind>,
    pub options: EstimatorOptions,
    /// Tilted doubly robust estimates, one per grid point, sharing the fit.
    pub sensitivity: Vec<SensitivitySpec>,
}

impl Pipeline {
    pub fn new(nuisance: NuisanceSpec, estimators: Vec<EstimatorKind>) -> Self {
        Pipeline {
            nuisance,
            fit: FitOptions::default(),
            estimators,
            options: EstimatorOptions::default(),
            sensitivity: Vec::new(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.estimators.iter().map(|k| k.label().to_string()).collect();
        for spec in &self.sensitivity {
            let (a, b) = spec.labels();
            out.push(format!("sens-dr[{a},{b}]"));
        }
        out
    }

    /// Point estimates, one entry per label. `Err` means the nuisance fit failed.
    pub fn run(&self, data: &Dataset) -> Result<Vec<Result<StratumMap<Option<f64>>>>> {
        let nuis = fit_nuisance(data, &self.nuisance, self.fit)?;
        let mut out: Vec<_> =
            self.estimators.iter().map(|&k| estimate(k, data, &nuis, &self.options).map(|e| e.tau)).collect();
        out.extend(self.sensitivity.iter().map(|s| estimate_sens_dr(data, &nuis, s, &self.options).map(|e| e.tau)));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapEntry {
    pub label: String,
    pub intervals: StratumMap<Option<IntervalEstimate>>,
    /// Successful replicate estimates per stratum, in replicate order.
    #[serde(skip)]
    pub replicates: StratumMap<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub config: BootstrapConfig,
    /// Replicates lost to a failed nuisance fit.
    pub failed_fits: usize,
    /// One entry per pipeline label; `Err` when the estimator failed on the
    /// full sample or in too many replicates.
    pub entries: Vec<(String, Result<BootstrapEntry>)>,
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Resampling indices for replicate `b`, independent of execution order.
pub fn resample_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn interval(point: f64, mut reps: Vec<f64>, failed: usize, config: &BootstrapConfig) -> IntervalEstimate {
    reps.sort_by(f64::total_cmp);
    let se = sd(&reps);
    let alpha = 1.0 - config.level;
    let (lower, upper) = match config.ci_method {
        CiMethod::Percentile => (quantile_sorted(&reps, alpha / 2.0), quantile_sorted(&reps, 1.0 - alpha / 2.0)),
        CiMethod::Normal => {
            let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
            (point - z * se, point + z * se)
        }
    };
    IntervalEstimate { point, lower, upper, se, n_failed_replicates: failed }
}

/// Bootstraps every output of `pipeline`. Rows are put in canonical order first,
/// so results do not depend on the input row order.
pub fn bootstrap(data: &Dataset, pipeline: &Pipeline, config: &BootstrapConfig) -> Result<BootstrapResult> {
    config.check()?;
    let base = data.canonical();
    let labels = pipeline.labels();
    let points = pipeline.run(&base)?;
    let n = base.len();
    let b_total = config.replicates;

    let reps = exec::map_indexed(b_total, |b| {
        let sample = base.select(&resample_indices(n, config.seed, b));
        pipeline.run(&sample)
    });
    let failed_fits = reps.iter().filter(|r| r.is_err()).count();
    let limit = (MAX_FAILURE_RATE * b_total as f64).floor() as usize;

    let entries = labels
        .into_iter()
        .enumerate()
        .map(|(e, label)| {
            let entry = points[e].clone().and_then(|point| {
                let mut values: StratumMap<Vec<f64>> = StratumMap::default();
                let mut failed = 0;
                for r in &reps {
                    match r.as_ref().map(|v| &v[e]) {
                        Ok(Ok(tau)) => {
                            for u in Stratum::ALL {
                                if let Some(t) = tau[u] {
                                    values[u].push(t);
                                }
                            }
                        }
                        _ => failed += 1,
                    }
                }
                if failed > limit {
                    return Err(Error::TooManyFailures { failed, total: b_total });
                }
                let intervals = StratumMap::from_fn(|u| {
                    point[u].filter(|_| values[u].len() >= 2).map(|p| interval(p, values[u].clone(), failed, config))
                });
                Ok(BootstrapEntry { label: label.clone(), intervals, replicates: values })
            });
            (label, entry)
        })
        .collect();
    Ok(BootstrapResult { config: *config, failed_fits, entries })
}
