//! Sensitivity analysis for departures from principal ignorability.
//!
//! Under the tilting model the odds of the `10` stratum against the `11`
//! (treated) or `00` (control) stratum change by `ε_z(X)` for each unit of the
//! potential outcome. `ε ≡ 1` recovers principal ignorability, and every
//! estimator here then reproduces its ignorability counterpart exactly.

use serde::Serialize;

use crate::data::{Dataset, PrincipalScores, StratumMap};
use crate::error::{Error, Result};
use crate::estimators::{
    compute_psi, guarded, tr_denominators, tr_ratios, weighting_with_omega, Context, EstimatorKind, EstimatorOptions,
    PceEstimate, PhiValues, PsiValues,
};
use crate::exec;
use crate::glm::NuisanceFit;

pub const DEFAULT_GRID: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SensitivitySpec {
    Constant {
        eps1: f64,
        eps0: f64,
    },
    /// `ε_z(X) = exp(-Xᵀη_z)`.
    LogLinear {
        eta1: Vec<f64>,
        eta0: Vec<f64>,
    },
}

impl SensitivitySpec {
    pub fn constant(eps1: f64, eps0: f64) -> Self {
        SensitivitySpec::Constant { eps1, eps0 }
    }

    /// `ε₁ = ε₀ = ε` for each grid value.
    pub fn grid(values: &[f64]) -> Vec<Self> {
        values.iter().map(|&e| SensitivitySpec::constant(e, e)).collect()
    }

    pub fn check(&self, k: usize) -> Result<()> {
        match self {
            SensitivitySpec::Constant { eps1, eps0 } => {
                if !(*eps1 > 0.0 && *eps0 > 0.0 && eps1.is_finite() && eps0.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "sensitivity parameters must be positive and finite, got ε1={eps1}, ε0={eps0}"
                    )));
                }
            }
            SensitivitySpec::LogLinear { eta1, eta0 } => {
                if eta1.len() != k || eta0.len() != k {
                    return Err(Error::InvalidConfig(format!(
                        "η vectors need {k} entries, got {} and {}",
                        eta1.len(),
                        eta0.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(ε₁(x), ε₀(x))`.
    pub fn epsilon(&self, x: &[f64]) -> (f64, f64) {
        match self {
            SensitivitySpec::Constant { eps1, eps0 } => (*eps1, *eps0),
            SensitivitySpec::LogLinear { eta1, eta0 } => {
                let dot = |eta: &[f64]| x.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>();
                ((-dot(eta1)).exp(), (-dot(eta0)).exp())
            }
        }
    }

    /// Short labels for tabular output: `(eps1, eps0)` or the η vectors.
    pub fn labels(&self) -> (String, String) {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        match self {
            SensitivitySpec::Constant { eps1, eps0 } => (eps1.to_string(), eps0.to_string()),
            SensitivitySpec::LogLinear { eta1, eta0 } => (format!("eta:{}", join(eta1)), format!("eta:{}", join(eta0))),
        }
    }
}

/// Per-unit tilting weights together with the `ε_z(X)` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaWeights {
    pub w1_10: Vec<f64>,
    pub w0_10: Vec<f64>,
    pub w0_00: Vec<f64>,
    pub w1_11: Vec<f64>,
    pub eps1: Vec<f64>,
    pub eps0: Vec<f64>,
    /// Units whose negative `e₁₀(X)` was clamped at zero.
    pub clamped: usize,
}

impl OmegaWeights {
    pub fn warnings(&self) -> Vec<String> {
        if self.clamped == 0 {
            Vec::new()
        } else {
            vec![format!("negative e10 clamped at zero in tilting weights for {} units", self.clamped)]
        }
    }
}

fn ratio(num: f64, den: f64, unit: usize) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::NonPositiveDenominator { unit })
    }
}

pub fn compute_omega(ps: &PrincipalScores, spec: &SensitivitySpec, data: &Dataset) -> Result<OmegaWeights> {
    spec.check(data.k())?;
    let n = ps.len();
    let mut out = OmegaWeights {
        w1_10: Vec::with_capacity(n),
        w0_10: Vec::with_capacity(n),
        w0_00: Vec::with_capacity(n),
        w1_11: Vec::with_capacity(n),
        eps1: Vec::with_capacity(n),
        eps0: Vec::with_capacity(n),
        clamped: 0,
    };
    for i in 0..n {
        let (p1, p0) = (ps.p1[i], ps.p0[i]);
        let raw10 = p1 - p0;
        if raw10 < 0.0 {
            out.clamped += 1;
        }
        let (e10, e00, e11) = (raw10.max(0.0), 1.0 - p1, p0);
        let (eps1, eps0) = spec.epsilon(data.x_row(i));
        out.w1_10.push(ratio(eps1 * e10 + eps1 * e11, eps1 * e10 + e11, i)?);
        out.w0_10.push(ratio(eps0 * e10 + eps0 * e00, eps0 * e10 + e00, i)?);
        out.w0_00.push(ratio(e10 + e00, eps0 * e10 + e00, i)?);
        out.w1_11.push(ratio(e10 + e11, eps1 * e10 + e11, i)?);
        out.eps1.push(eps1);
        out.eps0.push(eps0);
    }
    Ok(out)
}

/// Principal-score weighting with the principal-score ratios multiplied by `ω`.
pub fn estimate_sens_weighting(
    data: &Dataset,
    nuis: &NuisanceFit,
    spec: &SensitivitySpec,
    opts: &EstimatorOptions,
) -> Result<PceEstimate> {
    let ctx = Context::new(data, nuis, opts)?;
    let omega = compute_omega(&ctx.nuis.scores(), spec, data)?;
    let tau = weighting_with_omega(&ctx, false, Some(&omega))?;
    let mut warnings = ctx.warnings.clone();
    warnings.extend(omega.warnings());
    Ok(PceEstimate { estimator: EstimatorKind::SensWeighting, proportions: ctx.proportions(), tau, warnings })
}

/// Tilted influence-function components `φ′_{z,u}`.
pub fn compute_phi_tilted(
    nuis: &NuisanceFit,
    psi: &PsiValues,
    omega: &OmegaWeights,
    with11: bool,
) -> Result<PhiValues> {
    let missing = |z: u8, s: u8| Error::InvalidConfig(format!("outcome model for cell (Z={z}, S={s}) unavailable"));
    let mu11 = nuis.mu(1, 1).ok_or_else(|| missing(1, 1))?;
    let mu00 = nuis.mu(0, 0).ok_or_else(|| missing(0, 0))?;
    let n = nuis.len();
    let mut out = PhiValues {
        phi1_10: Vec::with_capacity(n),
        phi0_10: Vec::with_capacity(n),
        phi1_00: psi.y1_one_minus_s1.clone(),
        phi0_00: Vec::with_capacity(n),
        phi1_11: with11.then(|| Vec::with_capacity(n)),
        phi0_11: with11.then(|| psi.y0s0.clone()),
    };
    for i in 0..n {
        let (p1, p0) = (nuis.p1[i], nuis.p0[i]);
        let (e10, e00, e11) = (p1 - p0, 1.0 - p1, p0);
        let (eps1, eps0) = (omega.eps1[i], omega.eps0[i]);
        let (w110, w010, w000, w111) = (omega.w1_10[i], omega.w0_10[i], omega.w0_00[i], omega.w1_11[i]);
        let b1 = psi.s0[i] - guarded(p0, p1, i)? * psi.s1[i];
        let b0 = psi.one_minus_s1[i] - guarded(1.0 - p1, 1.0 - p0, i)? * psi.one_minus_s0[i];

        out.phi1_10.push(guarded(w110 * e10, p1, i)? * psi.y1s1[i] - (w110 * w110 / eps1) * (mu11[i] * b1));
        out.phi0_10
            .push(guarded(w010 * e10, 1.0 - p0, i)? * psi.y0_one_minus_s0[i] - (w010 * w010 / eps0) * (mu00[i] * b0));
        out.phi0_00
            .push(guarded(w000 * e00, 1.0 - p0, i)? * psi.y0_one_minus_s0[i] + (w000 * w000 / eps0) * (mu00[i] * b0));
        if let Some(v) = out.phi1_11.as_mut() {
            v.push(guarded(w111 * e11, p1, i)? * psi.y1s1[i] + (w111 * w111 / eps1) * (mu11[i] * b1));
        }
    }
    Ok(out)
}

/// Doubly robust estimator under the tilting model: consistent when the
/// principal score model holds together with either the treatment probability
/// or the outcome model.
pub fn estimate_sens_dr(
    data: &Dataset,
    nuis: &NuisanceFit,
    spec: &SensitivitySpec,
    opts: &EstimatorOptions,
) -> Result<PceEstimate> {
    let ctx = Context::new(data, nuis, opts)?;
    let omega = compute_omega(&ctx.nuis.scores(), spec, data)?;
    let with11 = ctx.has_s11();
    let psi = compute_psi(data, &ctx.nuis)?;
    let phi = compute_phi_tilted(&ctx.nuis, &psi, &omega, with11)?;
    let sm = ctx.nuis.options.strong_monotonicity;
    let dens = tr_denominators(&psi, sm || !with11);
    let tau = tr_ratios(&phi, &dens)?;
    let mut warnings = ctx.warnings.clone();
    warnings.extend(omega.warnings());
    Ok(PceEstimate { estimator: EstimatorKind::SensDr, tau, proportions: dens, warnings })
}

/// One row of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub spec: SensitivitySpec,
    pub result: Result<PceEstimate>,
}

/// Evaluates the doubly robust estimator at every grid point, reusing `nuis`.
pub fn sensitivity_sweep(
    data: &Dataset,
    nuis: &NuisanceFit,
    grid: &[SensitivitySpec],
    opts: &EstimatorOptions,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sensitivity grid is empty".into()));
    }
    Ok(exec::map_indexed(grid.len(), |g| SweepRow {
        spec: grid[g].clone(),
        result: estimate_sens_dr(data, nuis, &grid[g], opts),
    }))
}

/// Convenience view of a sweep row's point estimates.
pub fn sweep_taus(rows: &[SweepRow]) -> Vec<Option<StratumMap<Option<f64>>>> {
    rows.iter().map(|r| r.result.as_ref().ok().map(|e| e.tau)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Unit;
    use crate::estimators::{estimate_tp_ps, estimate_triply_robust};

    fn one_unit() -> Dataset {
        Dataset::from_units(&[Unit::new(1, 1, 1.0, vec![0.3])]).unwrap()
    }

    #[test]
    fn omega_is_one_at_unit_epsilon() {
        let ps = PrincipalScores::new(vec![0.7, 0.2, 0.9], vec![0.2, 0.3, 0.0]).unwrap();
        let data = Dataset::from_units(&[
            Unit::new(1, 1, 1.0, vec![0.0]),
            Unit::new(0, 1, 1.0, vec![0.0]),
            Unit::new(1, 0, 1.0, vec![0.0]),
        ])
        .unwrap();
        let w = compute_omega(&ps, &SensitivitySpec::constant(1.0, 1.0), &data).unwrap();
        for v in [&w.w1_10, &w.w0_10, &w.w0_00, &w.w1_11] {
            assert!(v.iter().all(|&x| x == 1.0));
        }
        assert_eq!(w.clamped, 1);
    }

    #[test]
    fn omega_arithmetic() {
        // e10 = 0.5, e11 = 0.2, ε1 = 2 → (1.0 + 0.4) / (1.0 + 0.2)
        let ps = PrincipalScores::new(vec![0.7], vec![0.2]).unwrap();
        let w = compute_omega(&ps, &SensitivitySpec::constant(2.0, 1.0), &one_unit()).unwrap();
        assert!((w.w1_10[0] - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn omega_at_empty_complier_stratum_is_epsilon() {
        let ps = PrincipalScores::new(vec![0.4], vec![0.4]).unwrap();
        let w = compute_omega(&ps, &SensitivitySpec::constant(1.7, 1.0), &one_unit()).unwrap();
        assert!((w.w1_10[0] - 1.7).abs() < 1e-15);
    }

    #[test]
    fn omega_rejects_vanishing_denominator() {
        let ps = PrincipalScores::new(vec![0.0], vec![0.0]).unwrap();
        let err = compute_omega(&ps, &SensitivitySpec::constant(2.0, 1.0), &one_unit()).unwrap_err();
        assert_eq!(err, Error::NonPositiveDenominator { unit: 0 });
    }

    #[test]
    fn log_linear_epsilon() {
        let spec = SensitivitySpec::LogLinear { eta1: vec![1.0, -2.0], eta0: vec![0.0, 0.5] };
        let (e1, e0) = spec.epsilon(&[0.5, 0.25]);
        assert!((e1 - 1.0f64).abs() < 1e-15);
        assert!((e0 - (-0.125f64).exp()).abs() < 1e-15);
        assert!(spec.check(3).is_err());
    }

    #[test]
    fn omega_monotone_in_epsilon() {
        let ps = PrincipalScores::new(vec![0.6], vec![0.25]).unwrap();
        let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
        let ws: Vec<OmegaWeights> =
            grid.iter().map(|&e| compute_omega(&ps, &SensitivitySpec::constant(e, e), &one_unit()).unwrap()).collect();
        for pair in ws.windows(2) {
            assert!(pair[1].w1_10[0] > pair[0].w1_10[0]);
            assert!(pair[1].w0_10[0] > pair[0].w0_10[0]);
            assert!(pair[1].w0_00[0] < pair[0].w0_00[0]);
            assert!(pair[1].w1_11[0] < pair[0].w1_11[0]);
        }
    }

    fn fixture() -> (Dataset, NuisanceFit) {
        crate::testutil::synthetic(400, 5)
    }

    #[test]
    fn unit_epsilon_reproduces_ignorability_estimators_exactly() {
        let (d, n) = fixture();
        let opts = EstimatorOptions::default();
        let one = SensitivitySpec::constant(1.0, 1.0);
        let dr = estimate_sens_dr(&d, &n, &one, &opts).unwrap();
        let tr = estimate_triply_robust(&d, &n, &opts).unwrap();
        assert_eq!(dr.tau, tr.tau);
        let w = estimate_sens_weighting(&d, &n, &one, &opts).unwrap();
        let tp = estimate_tp_ps(&d, &n, false, &opts).unwrap();
        assert_eq!(w.tau, tp.tau);
    }

    #[test]
    fn zero_outcome_gives_zero_weighting_estimate() {
        let (d, n) = fixture();
        let d = d.with_outcome(vec![0.0; d.len()]).unwrap();
        let est = estimate_sens_weighting(&d, &n, &SensitivitySpec::constant(1.5, 0.7), &Default::default()).unwrap();
        for (_, t) in est.tau.iter() {
            assert_eq!(*t, Some(0.0));
        }
    }

    #[test]
    fn sweep_row_at_one_matches_triply_robust() {
        let (d, n) = fixture();
        let opts = EstimatorOptions::default();
        let rows = sensitivity_sweep(&d, &n, &SensitivitySpec::grid(&[0.5, 1.0, 2.0]), &opts).unwrap();
        assert_eq!(rows.len(), 3);
        let tr = estimate_triply_robust(&d, &n, &opts).unwrap();
        assert_eq!(rows[1].result.as_ref().unwrap().tau, tr.tau);
        assert!(sensitivity_sweep(&d, &n, &[], &opts).is_err());
    }
}
