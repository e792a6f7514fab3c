use super::{compute_psi, guarded, positive, Context, EstimatorKind, EstimatorOptions, PceEstimate, PsiValues};
use crate::data::{Dataset, Stratum, StratumMap};
use crate::error::{Error, Result};
use crate::glm::NuisanceFit;

/// Efficient-influence-function components `φ_{z,u}` for each stratum and arm.
/// The `11` entries are `None` when `τ₁₁` is not applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiValues {
    pub phi1_10: Vec<f64>,
    pub phi0_10: Vec<f64>,
    pub phi1_00: Vec<f64>,
    pub phi0_00: Vec<f64>,
    pub phi1_11: Option<Vec<f64>>,
    pub phi0_11: Option<Vec<f64>>,
}

pub(crate) fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

pub(crate) fn mean_diff(a: &[f64], b: &[f64]) -> f64 {
    mean(a.iter().zip(b).map(|(x, y)| x - y), a.len())
}

fn missing(z: u8, s: u8) -> Error {
    Error::InvalidConfig(format!("outcome model for cell (Z={z}, S={s}) unavailable"))
}

/// General case; requires `μ₁₁`, `μ₁₀`, `μ₀₀` and, for the `11` stratum, `μ₀₁`.
pub fn compute_phi(nuis: &NuisanceFit, psi: &PsiValues) -> Result<PhiValues> {
    let mu11 = nuis.mu(1, 1).ok_or_else(|| missing(1, 1))?;
    let mu00 = nuis.mu(0, 0).ok_or_else(|| missing(0, 0))?;
    let with11 = nuis.mu(0, 1).is_some() && !nuis.options.strong_monotonicity;
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
        let b1 = psi.s0[i] - guarded(p0, p1, i)? * psi.s1[i];
        let b0 = psi.one_minus_s1[i] - guarded(1.0 - p1, 1.0 - p0, i)? * psi.one_minus_s0[i];

        out.phi1_10.push(guarded(e10, p1, i)? * psi.y1s1[i] - mu11[i] * b1);
        out.phi0_10.push(guarded(e10, 1.0 - p0, i)? * psi.y0_one_minus_s0[i] - mu00[i] * b0);
        out.phi0_00.push(guarded(e00, 1.0 - p0, i)? * psi.y0_one_minus_s0[i] + mu00[i] * b0);
        if let Some(v) = out.phi1_11.as_mut() {
            v.push(guarded(e11, p1, i)? * psi.y1s1[i] + mu11[i] * b1);
        }
    }
    Ok(out)
}

/// Reduced components when `S₀ ≡ 0`: `p₀ ≡ 0` makes the `ψ_{S0}` terms vanish
/// and `ψ_{1-S0} ≡ 1`.
pub fn compute_phi_strong_monotone(nuis: &NuisanceFit, psi: &PsiValues) -> Result<PhiValues> {
    let mu00 = nuis.mu(0, 0).ok_or_else(|| missing(0, 0))?;
    let n = nuis.len();
    let mut phi0_10 = Vec::with_capacity(n);
    let mut phi0_00 = Vec::with_capacity(n);
    for i in 0..n {
        let p1 = nuis.p1[i];
        let b0 = psi.one_minus_s1[i] - (1.0 - p1);
        phi0_10.push(p1 * psi.y0_one_minus_s0[i] - mu00[i] * b0);
        phi0_00.push((1.0 - p1) * psi.y0_one_minus_s0[i] + mu00[i] * b0);
    }
    Ok(PhiValues {
        phi1_10: psi.y1s1.clone(),
        phi0_10,
        phi1_00: psi.y1_one_minus_s1.clone(),
        phi0_00,
        phi1_11: None,
        phi0_11: None,
    })
}

/// Denominators `Pn(ψ_{S1} - ψ_{S0})`, `Pn(1 - ψ_{S1})`, `Pn(ψ_{S0})`.
pub(crate) fn tr_denominators(psi: &PsiValues, strong_monotone: bool) -> StratumMap<Option<f64>> {
    let n = psi.s1.len();
    if strong_monotone {
        StratumMap::new(Some(mean(psi.s1.iter().copied(), n)), Some(mean(psi.s1.iter().map(|v| 1.0 - v), n)), None)
    } else {
        StratumMap::new(
            Some(mean_diff(&psi.s1, &psi.s0)),
            Some(mean(psi.s1.iter().map(|v| 1.0 - v), n)),
            Some(mean(psi.s0.iter().copied(), n)),
        )
    }
}

pub(crate) fn tr_ratios(phi: &PhiValues, dens: &StratumMap<Option<f64>>) -> Result<StratumMap<Option<f64>>> {
    let ratio = |u: Stratum, a: &[f64], b: &[f64]| -> Result<f64> {
        Ok(mean_diff(a, b) / positive(u, dens[u].unwrap_or(f64::NAN))?)
    };
    Ok(StratumMap::new(
        Some(ratio(Stratum::S10, &phi.phi1_10, &phi.phi0_10)?),
        Some(ratio(Stratum::S00, &phi.phi1_00, &phi.phi0_00)?),
        match (&phi.phi1_11, &phi.phi0_11, dens.s11) {
            (Some(a), Some(b), Some(_)) => Some(ratio(Stratum::S11, a, b)?),
            _ => None,
        },
    ))
}

/// Triply robust estimator: consistent when any two of the treatment
/// probability, principal score and outcome mean models are correct.
pub fn estimate_triply_robust(data: &Dataset, nuis: &NuisanceFit, opts: &EstimatorOptions) -> Result<PceEstimate> {
    let ctx = Context::new(data, nuis, opts)?;
    let sm = ctx.nuis.options.strong_monotonicity;
    let psi = compute_psi(data, &ctx.nuis)?;
    let phi = if sm { compute_phi_strong_monotone(&ctx.nuis, &psi)? } else { compute_phi(&ctx.nuis, &psi)? };
    let dens = tr_denominators(&psi, sm || !ctx.has_s11());
    let tau = tr_ratios(&phi, &dens)?;
    let proportions = if sm || ctx.has_s11() { dens } else { StratumMap::new(dens.s10, dens.s00, None) };
    Ok(PceEstimate { estimator: EstimatorKind::TriplyRobust, tau, proportions, warnings: ctx.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Unit;
    use crate::estimators::{estimate_ps_om, estimate_tp_om, estimate_tp_ps};
    use crate::glm::FitOptions;
    use crate::testutil::synthetic;

    fn data() -> Dataset {
        synthetic(400, 11).0
    }

    fn nuis(_n: usize) -> NuisanceFit {
        synthetic(400, 11).1
    }

    #[test]
    fn model_assisted_identity_holds_per_unit() {
        let d = data();
        let n = nuis(d.len());
        let psi = compute_psi(&d, &n).unwrap();
        let phi = compute_phi(&n, &psi).unwrap();
        let mu11 = n.mu(1, 1).unwrap();
        for i in 0..d.len() {
            let (z, s, y) = (d.z()[i] as f64, d.s()[i] as f64, d.y()[i]);
            let (pi, p1, p0) = (n.pi[i], n.p1[i], n.p0[i]);
            let lhs = (p1 - p0) * s / p1 * z / pi * (y - mu11[i]) + mu11[i] * (psi.s1[i] - psi.s0[i]);
            assert!((lhs - phi.phi1_10[i]).abs() < 1e-10, "unit {i}: {lhs} vs {}", phi.phi1_10[i]);
        }
    }

    #[test]
    fn noiseless_outcomes_recover_constant_contrasts() {
        // Y equal to constant cell means: every family returns μ-contrasts.
        let d0 = data();
        let mut n = nuis(d0.len());
        for (z, s, v) in [(0, 0, 0.5), (0, 1, 1.5), (1, 0, 1.2), (1, 1, 2.0)] {
            n.mu[z][s] = Some(vec![v; d0.len()]);
        }
        let y: Vec<f64> = (0..d0.len()).map(|i| n.mu(d0.z()[i], d0.s()[i]).unwrap()[i]).collect();
        let d = d0.with_outcome(y).unwrap();
        let want = [1.5, 0.7, 0.5];
        let tr = estimate_triply_robust(&d, &n, &EstimatorOptions::default()).unwrap();
        let plugin = EstimatorOptions { marginal: crate::data::MarginalMode::Plugin, ..Default::default() };
        let pso = estimate_ps_om(&d, &n, &plugin).unwrap();
        let tpo = estimate_tp_om(&d, &n, true, &plugin).unwrap();
        for est in [tr, pso, tpo] {
            for (u, w) in Stratum::ALL.into_iter().zip(want) {
                let got = est.tau[u].unwrap();
                assert!((got - w).abs() < 1e-12, "{} {u}: {got}", est.estimator);
            }
        }
        let tpp = estimate_tp_ps(&d, &n, false, &plugin).unwrap();
        assert!(tpp.tau.s10.unwrap().is_finite());
    }

    #[test]
    fn strong_monotone_path_matches_general_with_zero_p0() {
        let units: Vec<Unit> = (0..60)
            .map(|i| {
                let x = (i as f64 * 0.29).sin();
                let z = u8::from(i % 2 == 0);
                let s = if z == 1 { u8::from(i % 3 != 0) } else { 0 };
                Unit::new(z, s, x + 2.0 * s as f64, vec![x])
            })
            .collect();
        let d = Dataset::from_units(&units).unwrap();
        let n = d.len();
        let c = |v: f64| Some(vec![v; n]);
        let p1: Vec<f64> = (0..n).map(|i| 0.5 + 0.3 * (i % 5) as f64 / 4.0).collect();
        let mu = [[c(0.1), None], [c(0.4), c(2.2)]];
        let sm = NuisanceFit::from_values(
            vec![0.5; n],
            p1.clone(),
            vec![0.0; n],
            mu.clone(),
            FitOptions { strong_monotonicity: true, ..Default::default() },
        )
        .unwrap();
        let general = NuisanceFit::from_values(vec![0.5; n], p1, vec![0.0; n], mu, FitOptions::default()).unwrap();
        let opts = EstimatorOptions::default();
        let a = estimate_triply_robust(&d, &sm, &opts).unwrap();
        let b = estimate_triply_robust(&d, &general, &opts).unwrap();
        assert!((a.tau.s10.unwrap() - b.tau.s10.unwrap()).abs() < 1e-12);
        assert!((a.tau.s00.unwrap() - b.tau.s00.unwrap()).abs() < 1e-12);
        assert_eq!(a.tau.s11, None);
        assert_eq!(a.proportions.s11, None);
    }
}
