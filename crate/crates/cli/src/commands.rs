use std::fs::File;
use std::io::{self, BufWriter, Write};

use pce::balancing::{balance_check, default_h, parse_h};
use pce::data::{marginal_proportions, read_csv_path, strata_from_scores, ColumnRoles, Dataset, MarginalMode};
use pce::estimators::{estimate_many, EstimatorKind, EstimatorOptions};
use pce::glm::{fit_nuisance, FitOptions, NuisanceFit, NuisanceSpec};
use pce::inference::{bootstrap, BootstrapConfig, BootstrapResult, CiMethod, Pipeline};
use pce::sensitivity::{estimate_sens_dr, estimate_sens_weighting, SensitivitySpec, DEFAULT_GRID};
use pce::simulation::{run_study, Scenario, StudyConfig};
use pce::Error;

use crate::output::{self, EstimateReport, SweepLine};
use crate::{
    BalanceArgs, BootArgs, CiArg, EstimateArgs, Format, InputArgs, ModelArgs, OutArgs, SensitivityArgs, SimulateArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Malformed input or configuration; exit code 2.
    Input(String),
    /// Numerical or estimation failure; exit code 3.
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

/// Rows are put in canonical order, so output does not depend on input row order.
fn load(input: &InputArgs) -> CliResult<Dataset> {
    let roles = ColumnRoles {
        z: input.z.clone(),
        s: input.s.clone(),
        y: input.y.clone(),
        x: input.x.as_deref().map(|x| split_list(x).into_iter().map(String::from).collect()),
    };
    Ok(read_csv_path(&input.input, &roles)?.canonical())
}

fn fit_options(m: &ModelArgs) -> FitOptions {
    FitOptions { randomized: m.randomized, strong_monotonicity: m.strong_monotonicity }
}

fn estimator_options(m: &ModelArgs) -> CliResult<EstimatorOptions> {
    if !(0.0..0.5).contains(&m.trim) {
        return Err(CliError::Input(format!("--trim must lie in [0, 0.5), got {}", m.trim)));
    }
    Ok(EstimatorOptions { marginal: MarginalMode::DoublyRobust, trim: m.trim, truncate_scores: m.truncate_scores })
}

fn boot_config(b: &BootArgs) -> Option<BootstrapConfig> {
    b.bootstrap.map(|replicates| BootstrapConfig {
        replicates,
        level: b.level,
        seed: b.seed,
        ci_method: match b.ci {
            CiArg::Percentile => CiMethod::Percentile,
            CiArg::Normal => CiMethod::Normal,
        },
    })
}

fn writer(out: &OutArgs) -> CliResult<Box<dyn Write>> {
    Ok(match &out.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Input(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn parse_estimators(s: &str) -> CliResult<Vec<EstimatorKind>> {
    match s.trim() {
        "all" => return Ok(EstimatorKind::CORE.to_vec()),
        "study" => return Ok(EstimatorKind::STUDY.to_vec()),
        _ => {}
    }
    let kinds = split_list(s).into_iter().map(str::parse).collect::<Result<Vec<EstimatorKind>, _>>()?;
    if kinds.is_empty() {
        return Err(CliError::Input("no estimators requested".into()));
    }
    Ok(kinds)
}

pub fn estimate(a: &EstimateArgs) -> CliResult<u8> {
    let kinds = parse_estimators(&a.estimators)?;
    if let Some(k) = kinds.iter().find(|k| matches!(k, EstimatorKind::SensDr | EstimatorKind::SensWeighting)) {
        return Err(CliError::Input(format!("'{k}' is available through the sensitivity command")));
    }
    let opts = estimator_options(&a.model)?;
    let boot = boot_config(&a.boot);
    if let Some(c) = &boot {
        c.check()?;
    }
    let data = load(&a.input)?;
    let spec = NuisanceSpec::all(data.k());
    let fit = fit_options(&a.model);
    let nuis = fit_nuisance(&data, &spec, fit)?;

    let outcomes = estimate_many(&kinds, &data, &nuis, &opts);
    let boot = match boot {
        Some(cfg) => {
            let pipeline = Pipeline { nuisance: spec, fit, estimators: kinds, options: opts, sensitivity: Vec::new() };
            Some(bootstrap(&data, &pipeline, &cfg)?)
        }
        None => None,
    };
    let (proportions, warnings) = overview(&data, &nuis, &opts)?;
    let report = EstimateReport::new(&data, proportions, warnings, &outcomes, boot.as_ref());
    let failed = report.any_failure();
    let mut w = writer(&a.out)?;
    match a.out.format.unwrap_or(Format::Json) {
        Format::Json => output::write_json(&mut w, &report)?,
        Format::Csv => report.write_csv(&mut w)?,
        Format::Table => report.write_table(&mut w)?,
    }
    w.flush()?;
    Ok(if failed { 3 } else { 0 })
}

/// Doubly robust stratum proportions and fit-level warnings.
fn overview(
    data: &Dataset,
    nuis: &NuisanceFit,
    opts: &EstimatorOptions,
) -> CliResult<(pce::StratumMap<f64>, Vec<String>)> {
    let mut adj = nuis.clone().trimmed(opts.trim);
    if opts.truncate_scores {
        adj = adj.with_truncated_scores();
    }
    let marg = marginal_proportions(&adj.scores(), MarginalMode::DoublyRobust, &adj.pi, data)?;
    Ok((marg.as_map(), strata_from_scores(&nuis.scores()).warnings()))
}

fn parse_number(s: &str, what: &str, pos: usize) -> CliResult<f64> {
    s.trim().parse::<f64>().map_err(|_| CliError::Input(format!("{what} entry {pos} ('{}') is not a number", s.trim())))
}

pub fn parse_grid(s: &str) -> CliResult<Vec<SensitivitySpec>> {
    s.split(',')
        .enumerate()
        .map(|(i, tok)| match tok.split_once(':') {
            Some((a, b)) => {
                Ok(SensitivitySpec::constant(parse_number(a, "grid", i + 1)?, parse_number(b, "grid", i + 1)?))
            }
            None => {
                let e = parse_number(tok, "grid", i + 1)?;
                Ok(SensitivitySpec::constant(e, e))
            }
        })
        .collect()
}

fn sensitivity_specs(a: &SensitivityArgs, k: usize) -> CliResult<Vec<SensitivitySpec>> {
    let mut specs = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => Vec::new(),
    };
    match (a.eps1, a.eps0) {
        (Some(e1), Some(e0)) => specs.push(SensitivitySpec::constant(e1, e0)),
        (None, None) => {}
        _ => return Err(CliError::Input("--eps1 and --eps0 must be given together".into())),
    }
    match (&a.eta1, &a.eta0) {
        (Some(e1), Some(e0)) => {
            let vec = |s: &str, what: &str| {
                s.split(',').enumerate().map(|(i, t)| parse_number(t, what, i + 1)).collect::<CliResult<Vec<f64>>>()
            };
            specs.push(SensitivitySpec::LogLinear { eta1: vec(e1, "eta1")?, eta0: vec(e0, "eta0")? });
        }
        (None, None) => {}
        _ => return Err(CliError::Input("--eta1 and --eta0 must be given together".into())),
    }
    if specs.is_empty() {
        specs = SensitivitySpec::grid(&DEFAULT_GRID);
    }
    for s in &specs {
        s.check(k)?;
    }
    Ok(specs)
}

pub fn sensitivity(a: &SensitivityArgs) -> CliResult<u8> {
    let kinds = parse_estimators(&a.estimators)?;
    if let Some(k) = kinds.iter().find(|k| !matches!(k, EstimatorKind::SensDr | EstimatorKind::SensWeighting)) {
        return Err(CliError::Input(format!("'{k}' is not a sensitivity estimator; use sens-dr or sens-w")));
    }
    let opts = estimator_options(&a.model)?;
    let boot = boot_config(&a.boot);
    if let Some(c) = &boot {
        c.check()?;
    }
    let data = load(&a.input)?;
    let specs = sensitivity_specs(a, data.k())?;
    let spec = NuisanceSpec::all(data.k());
    let fit = fit_options(&a.model);
    let nuis = fit_nuisance(&data, &spec, fit)?;

    let boot: Option<BootstrapResult> = match boot {
        Some(cfg) if kinds.contains(&EstimatorKind::SensDr) => {
            let pipeline =
                Pipeline { nuisance: spec, fit, estimators: Vec::new(), options: opts, sensitivity: specs.clone() };
            Some(bootstrap(&data, &pipeline, &cfg)?)
        }
        _ => None,
    };
    let mut lines = Vec::new();
    for &kind in &kinds {
        for (g, s) in specs.iter().enumerate() {
            let result = match kind {
                EstimatorKind::SensDr => estimate_sens_dr(&data, &nuis, s, &opts),
                _ => estimate_sens_weighting(&data, &nuis, s, &opts),
            };
            let interval = match (&boot, kind) {
                (Some(b), EstimatorKind::SensDr) => Some(b.entries[g].1.clone()),
                _ => None,
            };
            lines.push(SweepLine { estimator: kind, spec: s.clone(), result, interval });
        }
    }
    let failed = lines.iter().any(SweepLine::failed);
    let mut w = writer(&a.out)?;
    match a.out.format.unwrap_or(Format::Csv) {
        Format::Json => output::write_json(&mut w, &output::sweep_json(&lines))?,
        Format::Csv => output::write_sweep_csv(&mut w, &lines)?,
        Format::Table => output::write_sweep_table(&mut w, &lines)?,
    }
    w.flush()?;
    Ok(if failed { 3 } else { 0 })
}

pub fn balance(a: &BalanceArgs) -> CliResult<u8> {
    if !(a.threshold >= 0.0) {
        return Err(CliError::Input(format!("--threshold must be non-negative, got {}", a.threshold)));
    }
    let opts = estimator_options(&a.model)?;
    let data = load(&a.input)?;
    let h = match &a.h {
        Some(h) => parse_h(&split_list(h), &data)?,
        None => default_h(&data),
    };
    let mut nuis = fit_nuisance(&data, &NuisanceSpec::all(data.k()), fit_options(&a.model))?.trimmed(opts.trim);
    if opts.truncate_scores {
        nuis = nuis.with_truncated_scores();
    }
    let report = balance_check(&data, &nuis, &h, a.threshold)?;
    let mut w = writer(&a.out)?;
    match a.out.format.unwrap_or(Format::Table) {
        Format::Json => output::write_json(&mut w, &report)?,
        Format::Csv => report.write_csv(&mut w)?,
        Format::Table => output::write_balance_table(&mut w, &report)?,
    }
    w.flush()?;
    Ok(0)
}

pub fn parse_scenarios(s: &str) -> CliResult<Vec<Scenario>> {
    if s.trim() == "all" {
        return Ok(Scenario::all().to_vec());
    }
    Ok(s.split(';').map(|t| t.trim().parse()).collect::<Result<Vec<Scenario>, _>>()?)
}

pub fn simulate(a: &SimulateArgs) -> CliResult<u8> {
    let seed = a.seed.ok_or_else(|| CliError::Input("simulate requires --seed".into()))?;
    let mut cfg = StudyConfig::new(parse_scenarios(&a.scenario)?, a.n, a.reps, seed);
    if let Some(e) = &a.estimators {
        cfg.estimators = parse_estimators(e)?;
        if cfg.estimators.iter().any(|k| matches!(k, EstimatorKind::SensDr | EstimatorKind::SensWeighting)) {
            return Err(CliError::Input("sensitivity estimators are not part of the simulation study".into()));
        }
    }
    cfg.oracle_n = (a.oracle_draws > 0).then_some(a.oracle_draws);
    let results = run_study(&cfg)?;
    let mut w = writer(&a.out)?;
    match a.out.format.unwrap_or(Format::Csv) {
        Format::Json => output::write_json(&mut w, &output::study_json(&results))?,
        Format::Csv => pce::simulation::export_violin_data(&results, &mut w)?,
        Format::Table => output::write_study_table(&mut w, &results)?,
    }
    w.flush()?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_lists() {
        assert_eq!(parse_estimators("all").unwrap().len(), 5);
        assert_eq!(parse_estimators("tr, ps-om").unwrap(), vec![EstimatorKind::TriplyRobust, EstimatorKind::PsOm]);
        assert_eq!(parse_estimators("bogus").unwrap_err().code(), 2);
        assert_eq!(parse_estimators(" , ").unwrap_err().code(), 2);
    }

    #[test]
    fn grid_entries() {
        assert_eq!(parse_grid("0.5,1,2").unwrap().len(), 3);
        assert_eq!(parse_grid("1.5:0.8").unwrap(), vec![SensitivitySpec::constant(1.5, 0.8)]);
        let e = parse_grid("1,abc").unwrap_err();
        assert_eq!(e.code(), 2);
        assert!(e.message().contains("entry 2"), "{}", e.message());
    }

    #[test]
    fn scenario_lists() {
        assert_eq!(parse_scenarios("all").unwrap().len(), 8);
        assert_eq!(parse_scenarios("yes,yes,yes").unwrap(), vec![Scenario::ALL_YES]);
        assert_eq!(parse_scenarios("yes,no,yes; tp:no/ps:no/om:no").unwrap().len(), 2);
        assert!(parse_scenarios("yes,maybe,no").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::InvalidConfig("x".into())).code(), 2);
        assert_eq!(CliError::from(Error::RankDeficientDesign).code(), 3);
    }
}
