//! Report types and their JSON, CSV and table renderings.

use std::io::{self, Write};

use pce::balancing::BalanceReport;
use pce::data::{Dataset, Stratum, StratumMap};
use pce::estimators::{EstimateOutcome, EstimatorKind, PceEstimate};
use pce::inference::{BootstrapEntry, BootstrapResult, CiMethod, IntervalEstimate};
use pce::sensitivity::SensitivitySpec;
use pce::simulation::ScenarioResult;
use pce::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{CliError, CliResult};

pub fn write_json<W: Write, T: Serialize>(w: &mut W, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Failure(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Serialize)]
pub struct BootstrapInfo {
    pub replicates: usize,
    pub level: f64,
    pub ci_method: CiMethod,
    pub seed: u64,
    pub failed_fits: usize,
}

#[derive(Debug, Serialize)]
pub struct EstimatorBlock {
    pub estimator: &'static str,
    pub tau: Option<StratumMap<Option<f64>>>,
    pub proportions: Option<StratumMap<Option<f64>>>,
    pub intervals: Option<StratumMap<Option<IntervalEstimate>>>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub interval_error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub covariates: Vec<String>,
    /// Doubly robust stratum proportions `ê_u`.
    pub proportions: StratumMap<f64>,
    pub warnings: Vec<String>,
    pub bootstrap: Option<BootstrapInfo>,
    pub estimators: Vec<EstimatorBlock>,
}

impl EstimateReport {
    pub fn new(
        data: &Dataset,
        proportions: StratumMap<f64>,
        warnings: Vec<String>,
        outcomes: &[EstimateOutcome],
        boot: Option<&BootstrapResult>,
    ) -> Self {
        let estimators = outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let (intervals, interval_error) = match boot.map(|b| &b.entries[i].1) {
                    Some(Ok(entry)) => (Some(entry.intervals), None),
                    Some(Err(e)) => (None, Some(e.to_string())),
                    None => (None, None),
                };
                match &o.result {
                    Ok(est) => EstimatorBlock {
                        estimator: o.kind.label(),
                        tau: Some(est.tau),
                        proportions: Some(est.proportions),
                        intervals,
                        warnings: est.warnings.clone(),
                        error: None,
                        interval_error,
                    },
                    Err(e) => EstimatorBlock {
                        estimator: o.kind.label(),
                        tau: None,
                        proportions: None,
                        intervals: None,
                        warnings: Vec::new(),
                        error: Some(e.to_string()),
                        interval_error: None,
                    },
                }
            })
            .collect();
        EstimateReport {
            n: data.len(),
            covariates: data.covariate_names().to_vec(),
            proportions,
            warnings,
            bootstrap: boot.map(|b| BootstrapInfo {
                replicates: b.config.replicates,
                level: b.config.level,
                ci_method: b.config.ci_method,
                seed: b.config.seed,
                failed_fits: b.failed_fits,
            }),
            estimators,
        }
    }

    pub fn any_failure(&self) -> bool {
        self.estimators.iter().any(|b| b.error.is_some() || b.interval_error.is_some())
    }

    /// `estimator,stratum,estimate,lower,upper,se,error`; the first three lines
    /// hold the proportions under the estimator name `proportion`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> CliResult<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["estimator", "stratum", "estimate", "lower", "upper", "se", "error"]).map_err(csv_err)?;
        for (u, p) in self.proportions.iter() {
            wtr.write_record(["proportion", u.label(), &p.to_string(), "", "", "", ""]).map_err(csv_err)?;
        }
        for b in &self.estimators {
            let err = b.error.clone().or_else(|| b.interval_error.clone()).unwrap_or_default();
            for u in Stratum::ALL {
                let iv = b.intervals.and_then(|m| m[u]);
                wtr.write_record([
                    b.estimator,
                    u.label(),
                    &num(b.tau.and_then(|t| t[u])),
                    &num(iv.map(|i| i.lower)),
                    &num(iv.map(|i| i.upper)),
                    &num(iv.map(|i| i.se)),
                    &err,
                ])
                .map_err(csv_err)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Estimates with intervals in parentheses, one line per estimator.
    pub fn write_table<W: Write>(&self, w: &mut W) -> CliResult<()> {
        let cell = |tau: Option<f64>, iv: Option<IntervalEstimate>| match (tau, iv) {
            (Some(t), Some(i)) => format!("{t:.3} ({:.3}, {:.3})", i.lower, i.upper),
            (Some(t), None) => format!("{t:.3}"),
            _ => "-".to_string(),
        };
        writeln!(w, "{:<14}{:>28}{:>28}{:>28}", "", "10", "00", "11")?;
        let p = self.proportions;
        writeln!(w, "{:<14}{:>28.3}{:>28.3}{:>28.3}", "proportion", p.s10, p.s00, p.s11)?;
        for b in &self.estimators {
            if let Some(e) = &b.error {
                writeln!(w, "{:<14}error: {e}", b.estimator)?;
                continue;
            }
            let c: Vec<String> =
                Stratum::ALL.iter().map(|&u| cell(b.tau.and_then(|t| t[u]), b.intervals.and_then(|m| m[u]))).collect();
            writeln!(w, "{:<14}{:>28}{:>28}{:>28}", b.estimator, c[0], c[1], c[2])?;
        }
        if let Some(bi) = &self.bootstrap {
            writeln!(
                w,
                "\n{:?} intervals at level {} from {} bootstrap replicates (seed {})",
                bi.ci_method, bi.level, bi.replicates, bi.seed
            )?;
        }
        for warning in &self.warnings {
            writeln!(w, "warning: {warning}")?;
        }
        Ok(())
    }
}

pub struct SweepLine {
    pub estimator: EstimatorKind,
    pub spec: SensitivitySpec,
    pub result: Result<PceEstimate, Error>,
    pub interval: Option<Result<BootstrapEntry, Error>>,
}

impl SweepLine {
    pub fn failed(&self) -> bool {
        self.result.is_err() || matches!(self.interval, Some(Err(_)))
    }

    fn tau(&self) -> StratumMap<Option<f64>> {
        self.result.as_ref().map(|e| e.tau).unwrap_or_default()
    }

    fn intervals(&self) -> StratumMap<Option<IntervalEstimate>> {
        match &self.interval {
            Some(Ok(e)) => e.intervals,
            _ => StratumMap::default(),
        }
    }

    fn error(&self) -> Option<String> {
        match (&self.result, &self.interval) {
            (Err(e), _) | (_, Some(Err(e))) => Some(e.to_string()),
            _ => None,
        }
    }
}

pub const SWEEP_HEADER: [&str; 13] = [
    "estimator",
    "eps1",
    "eps0",
    "tau10",
    "tau00",
    "tau11",
    "tau10_lower",
    "tau10_upper",
    "tau00_lower",
    "tau00_upper",
    "tau11_lower",
    "tau11_upper",
    "error",
];

pub fn write_sweep_csv<W: Write>(w: &mut W, lines: &[SweepLine]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for l in lines {
        let (e1, e0) = l.spec.labels();
        let tau = l.tau();
        let iv = l.intervals();
        let mut rec = vec![l.estimator.label().to_string(), e1, e0];
        rec.extend(Stratum::ALL.iter().map(|&u| num(tau[u])));
        for u in Stratum::ALL {
            rec.push(num(iv[u].map(|i| i.lower)));
            rec.push(num(iv[u].map(|i| i.upper)));
        }
        rec.push(l.error().unwrap_or_default());
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn sweep_json(lines: &[SweepLine]) -> Value {
    Value::Array(
        lines
            .iter()
            .map(|l| {
                json!({
                    "estimator": l.estimator.label(),
                    "spec": l.spec,
                    "tau": l.result.as_ref().ok().map(|e| e.tau),
                    "intervals": match &l.interval { Some(Ok(e)) => Some(e.intervals), _ => None },
                    "warnings": l.result.as_ref().map(|e| e.warnings.clone()).unwrap_or_default(),
                    "error": l.error(),
                })
            })
            .collect(),
    )
}

pub fn write_sweep_table<W: Write>(w: &mut W, lines: &[SweepLine]) -> CliResult<()> {
    let wide = lines.iter().any(|l| matches!(l.interval, Some(Ok(_))));
    let width = if wide { 28 } else { 12 };
    writeln!(
        w,
        "{:<10}{:>12}{:>12}{:>width$}{:>width$}{:>width$}",
        "estimator", "eps1", "eps0", "tau10", "tau00", "tau11"
    )?;
    for l in lines {
        let (e1, e0) = l.spec.labels();
        let tau = l.tau();
        let iv = l.intervals();
        let c = |u: Stratum| match (tau[u], iv[u]) {
            (Some(t), Some(i)) => format!("{t:.4} ({:.4}, {:.4})", i.lower, i.upper),
            (Some(t), None) => format!("{t:.4}"),
            _ => "-".into(),
        };
        write!(
            w,
            "{:<10}{:>12}{:>12}{:>width$}{:>width$}{:>width$}",
            l.estimator.label(),
            e1,
            e0,
            c(Stratum::S10),
            c(Stratum::S00),
            c(Stratum::S11)
        )?;
        match l.error() {
            Some(e) => writeln!(w, "  error: {e}")?,
            None => writeln!(w)?,
        }
    }
    Ok(())
}

/// Weighted means per stratum set; `*` marks flagged terms.
pub fn write_balance_table<W: Write>(w: &mut W, report: &BalanceReport) -> io::Result<()> {
    for st in &report.strata {
        writeln!(w, "stratum {} (reference: {})", st.stratum, st.weightings[st.reference])?;
        write!(w, "{:<12}", "h")?;
        for name in &st.weightings {
            write!(w, "{name:>16}")?;
        }
        writeln!(w, "{:>14}", "max|diff|")?;
        for row in &st.rows {
            write!(w, "{:<12}", row.h)?;
            for m in &row.means {
                write!(w, "{m:>16.4}")?;
            }
            writeln!(w, "{:>14.4}{}", row.max_abs_diff, if row.flagged { " *" } else { "" })?;
        }
        writeln!(w)?;
    }
    writeln!(
        w,
        "threshold {}; {}",
        report.threshold,
        if report.any_flagged() { "imbalance flagged (*)" } else { "no term flagged" }
    )
}

pub fn study_json(results: &[ScenarioResult]) -> Value {
    Value::Array(
        results
            .iter()
            .map(|r| {
                let estimators: Vec<Value> = r
                    .series
                    .iter()
                    .map(|s| {
                        let strata = StratumMap::from_fn(|u| {
                            let truth = r.truth.map(|t| t.tau[u]);
                            let sm = s.summary(u, truth.unwrap_or(f64::NAN));
                            json!({
                                "count": sm.count,
                                "mean": sm.mean,
                                "sd": sm.sd,
                                "bias": truth.map(|_| sm.bias),
                                "rmse": truth.map(|_| sm.rmse),
                            })
                        });
                        json!({ "estimator": s.estimator.label(), "failures": s.failures, "strata": strata })
                    })
                    .collect();
                json!({
                    "scenario": r.scenario.to_string(),
                    "truth": r.truth,
                    "fit_failures": r.fit_failures,
                    "estimators": estimators,
                })
            })
            .collect(),
    )
}

pub fn write_study_table<W: Write>(w: &mut W, results: &[ScenarioResult]) -> io::Result<()> {
    writeln!(
        w,
        "{:<22}{:<13}{:<8}{:>10}{:>10}{:>10}{:>10}",
        "scenario", "estimator", "stratum", "mean", "bias", "sd", "rmse"
    )?;
    for r in results {
        for s in &r.series {
            for u in Stratum::ALL {
                let truth = r.truth.map(|t| t.tau[u]);
                let sm = s.summary(u, truth.unwrap_or(f64::NAN));
                let opt = |v: f64| if truth.is_some() { format!("{v:.4}") } else { "-".into() };
                writeln!(
                    w,
                    "{:<22}{:<13}{:<8}{:>10.4}{:>10}{:>10.4}{:>10}",
                    r.scenario.to_string(),
                    s.estimator.label(),
                    u.label(),
                    sm.mean,
                    opt(sm.bias),
                    sm.sd,
                    opt(sm.rmse)
                )?;
            }
        }
    }
    Ok(())
}
