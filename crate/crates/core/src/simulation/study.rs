use std::io::Write;

use serde::Serialize;

use super::{generate, true_pce, DgpKind, DgpSpec, OracleTruth, Scenario, DEFAULT_PS_SHIFT, K};
use crate::data::{Stratum, StratumMap};
use crate::error::{Error, Result};
use crate::estimators::{estimate_many, EstimatorKind, EstimatorOptions};
use crate::exec;
use crate::glm::{fit_nuisance, DesignSpec, FitOptions, NuisanceSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub scenarios: Vec<Scenario>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub ps_shift: f64,
    pub estimators: Vec<EstimatorKind>,
    /// Oracle draws for the truth; `None` skips it.
    pub oracle_n: Option<usize>,
}

impl StudyConfig {
    pub fn new(scenarios: Vec<Scenario>, n: usize, reps: usize, seed: u64) -> Self {
        StudyConfig {
            scenarios,
            n,
            reps,
            seed,
            ps_shift: DEFAULT_PS_SHIFT,
            estimators: EstimatorKind::STUDY.to_vec(),
            oracle_n: Some(1_000_000),
        }
    }
}

/// Working models: logistic and linear in all of `X`, except that a
/// misspecified principal score is fit on `(X₁, X₂)` only.
pub fn fitting_spec(scenario: Scenario) -> NuisanceSpec {
    let all = DesignSpec::all(K);
    let ps =
        if scenario.ps { all.clone() } else { DesignSpec { covariate_indices: vec![0, 1], include_intercept: true } };
    NuisanceSpec { tp: all.clone(), ps, om: all }
}

/// Replicate estimates of one estimator in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSeries {
    pub estimator: EstimatorKind,
    /// `(rep, estimate)` for successful replicates.
    pub values: StratumMap<Vec<(usize, f64)>>,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

impl EstimatorSeries {
    pub fn summary(&self, u: Stratum, truth: f64) -> Summary {
        let v: Vec<f64> = self.values[u].iter().map(|&(_, x)| x).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let rmse = (v.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / n).sqrt();
        Summary { count: v.len(), mean, bias: mean - truth, sd, rmse }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub truth: Option<OracleTruth>,
    pub series: Vec<EstimatorSeries>,
    /// Replicates whose nuisance fit failed.
    pub fit_failures: usize,
}

impl ScenarioResult {
    pub fn series(&self, kind: EstimatorKind) -> Option<&EstimatorSeries> {
        self.series.iter().find(|s| s.estimator == kind)
    }
}

/// Runs every replicate of one scenario of the standard design.
pub fn run_scenario(config: &StudyConfig, scenario: Scenario) -> Result<ScenarioResult> {
    if config.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let spec = DgpSpec { ps_shift: config.ps_shift, ..DgpSpec::new(scenario, config.n, config.seed) };
    spec.check()?;
    let fit = fitting_spec(scenario);
    let opts = EstimatorOptions::default();
    let reps = exec::map_indexed(config.reps, |r| {
        let data = generate(&spec, r as u64)?;
        let nuis = fit_nuisance(&data, &fit, FitOptions::default())?;
        Ok::<_, Error>(estimate_many(&config.estimators, &data, &nuis, &opts))
    });
    let fit_failures = reps.iter().filter(|r| r.is_err()).count();
    let series = config
        .estimators
        .iter()
        .enumerate()
        .map(|(e, &kind)| {
            let mut values: StratumMap<Vec<(usize, f64)>> = StratumMap::default();
            let mut failures = 0;
            for (r, out) in reps.iter().enumerate() {
                match out.as_ref().map(|v| &v[e].result) {
                    Ok(Ok(est)) => {
                        for u in Stratum::ALL {
                            if let Some(t) = est.tau[u] {
                                values[u].push((r, t));
                            }
                        }
                    }
                    _ => failures += 1,
                }
            }
            EstimatorSeries { estimator: kind, values, failures }
        })
        .collect();
    let truth = match config.oracle_n {
        Some(n) => Some(true_pce(&DgpSpec { kind: DgpKind::Standard, ..spec }, n, config.seed ^ 0x5eed)?),
        None => None,
    };
    Ok(ScenarioResult { scenario, truth, series, fit_failures })
}

/// Runs each configured scenario in turn; replicates run in parallel.
pub fn run_study(config: &StudyConfig) -> Result<Vec<ScenarioResult>> {
    config.scenarios.iter().map(|&s| run_scenario(config, s)).collect()
}

/// Long-format replicate estimates:
/// `scenario,estimator,stratum,rep,estimate,truth`.
pub fn export_violin_data<W: Write>(results: &[ScenarioResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wtr.write_record(["scenario", "estimator", "stratum", "rep", "estimate", "truth"]).map_err(io)?;
    for res in results {
        let label = res.scenario.to_string();
        for series in &res.series {
            for u in Stratum::ALL {
                let truth = res.truth.map(|t| t.tau[u].to_string()).unwrap_or_default();
                for &(rep, est) in &series.values[u] {
                    wtr.write_record([
                        label.as_str(),
                        series.estimator.label(),
                        u.label(),
                        &rep.to_string(),
                        &est.to_string(),
                        &truth,
                    ])
                    .map_err(io)?;
                }
            }
        }
    }
    wtr.flush().map_err(|e| Error::Io(e.to_string()))
}
