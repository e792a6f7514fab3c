use serde::Serialize;

use super::{fit_logistic, fit_ols, Design, DesignSpec, LinearFit, LogisticFit};
use crate::data::{check_positivity, truncate_scores, Dataset, PrincipalScores};
use crate::error::{Error, Result};

/// Designs for the treatment-probability, principal-score and outcome models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NuisanceSpec {
    pub tp: DesignSpec,
    pub ps: DesignSpec,
    pub om: DesignSpec,
}

impl NuisanceSpec {
    /// Intercept plus all `k` covariates in every model.
    pub fn all(k: usize) -> Self {
        NuisanceSpec { tp: DesignSpec::all(k), ps: DesignSpec::all(k), om: DesignSpec::all(k) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FitOptions {
    /// Treatment assigned completely at random: `π(X) ≡ n₁/n`.
    pub randomized: bool,
    /// `S₀ ≡ 0`: `p₀(X) ≡ 0` and the `(Z=0, S=1)` outcome model is skipped.
    pub strong_monotonicity: bool,
}

pub type CellModels<T> = [[Option<T>; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModels {
    pub spec: NuisanceSpec,
    /// `None` under randomization.
    pub tp: Option<LogisticFit>,
    pub ps1: LogisticFit,
    /// `None` under strong monotonicity.
    pub ps0: Option<LogisticFit>,
    /// Outcome fits indexed `[z][s]`.
    pub om: CellModels<LinearFit>,
}

/// Per-unit fitted nuisance functions.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceFit {
    pub pi: Vec<f64>,
    pub p1: Vec<f64>,
    pub p0: Vec<f64>,
    /// Fitted outcome means indexed `[z][s]`; `None` for skipped cells.
    pub mu: CellModels<Vec<f64>>,
    pub options: FitOptions,
    pub models: Option<FittedModels>,
}

impl NuisanceFit {
    /// Nuisance values supplied directly, e.g. the true functions of a
    /// simulation design.
    pub fn from_values(
        pi: Vec<f64>,
        p1: Vec<f64>,
        p0: Vec<f64>,
        mu: CellModels<Vec<f64>>,
        options: FitOptions,
    ) -> Result<Self> {
        let n = pi.len();
        let mu_ok = mu.iter().flatten().flatten().all(|m| m.len() == n);
        if p1.len() != n || p0.len() != n || !mu_ok {
            return Err(Error::InvalidConfig("nuisance vectors have inconsistent lengths".into()));
        }
        Ok(NuisanceFit { pi, p1, p0, mu, options, models: None })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn mu(&self, z: u8, s: u8) -> Option<&[f64]> {
        self.mu[z as usize][s as usize].as_deref()
    }

    pub fn scores(&self) -> PrincipalScores {
        PrincipalScores { p1: self.p1.clone(), p0: self.p0.clone() }
    }

    /// Clamps `π̂(X)` into `[δ, 1 − δ]`. `δ = 0` leaves the fit unchanged.
    pub fn trimmed(mut self, delta: f64) -> Self {
        if delta > 0.0 {
            for p in &mut self.pi {
                *p = p.clamp(delta, 1.0 - delta);
            }
        }
        self
    }

    /// Applies [`truncate_scores`] so that `e₁₀(X) ≥ 0` for every unit.
    pub fn with_truncated_scores(mut self) -> Self {
        let t = truncate_scores(&self.scores());
        self.p1 = t.p1;
        self.p0 = t.p0;
        self
    }

    pub fn check_positivity(&self) -> Result<()> {
        check_positivity(&self.pi)
    }
}

/// Fits `π(X; α)`, `p_z(X; γ)` within each arm, and `μ_zs(X; β)` within each
/// observed `(Z, S)` cell.
pub fn fit_nuisance(data: &Dataset, spec: &NuisanceSpec, options: FitOptions) -> Result<NuisanceFit> {
    let k = data.k();
    spec.tp.check(k)?;
    spec.ps.check(k)?;
    spec.om.check(k)?;
    let n = data.len();
    let z = data.z();
    let s = data.s();

    if options.strong_monotonicity {
        if let Some(row) = (0..n).find(|&i| z[i] == 0 && s[i] == 1) {
            return Err(Error::StrongMonotonicityViolation { row: row + 1 });
        }
    }

    let n1 = z.iter().filter(|&&v| v == 1).count();
    let (pi, tp) = if options.randomized {
        if n1 == 0 || n1 == n {
            return Err(Error::DegenerateResponse(u8::from(n1 == n)));
        }
        (vec![n1 as f64 / n as f64; n], None)
    } else {
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let fit = fit_logistic(&zf, &Design::build(data, &spec.tp, None))?;
        let pi = (0..n).map(|i| fit.predict(&spec.tp, data.x_row(i))).collect();
        (pi, Some(fit))
    };

    let arm = |zv: u8| -> Vec<usize> { (0..n).filter(|&i| z[i] == zv).collect() };
    let fit_arm = |rows: &[usize]| -> Result<LogisticFit> {
        let sf: Vec<f64> = rows.iter().map(|&i| s[i] as f64).collect();
        fit_logistic(&sf, &Design::build(data, &spec.ps, Some(rows)))
    };
    let ps1 = fit_arm(&arm(1))?;
    let p1 = (0..n).map(|i| ps1.predict(&spec.ps, data.x_row(i))).collect();
    let (p0, ps0) = if options.strong_monotonicity {
        (vec![0.0; n], None)
    } else {
        let fit = fit_arm(&arm(0))?;
        ((0..n).map(|i| fit.predict(&spec.ps, data.x_row(i))).collect(), Some(fit))
    };

    let needed = spec.om.columns();
    let mut om: CellModels<LinearFit> = Default::default();
    let mut mu: CellModels<Vec<f64>> = Default::default();
    for zv in 0..2u8 {
        for sv in 0..2u8 {
            if options.strong_monotonicity && zv == 0 && sv == 1 {
                continue;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| z[i] == zv && s[i] == sv).collect();
            if rows.len() < needed {
                return Err(Error::EmptyCell { z: zv, s: sv, count: rows.len(), needed });
            }
            let yv: Vec<f64> = rows.iter().map(|&i| data.y()[i]).collect();
            let fit = fit_ols(&yv, &Design::build(data, &spec.om, Some(&rows)))?;
            mu[zv as usize][sv as usize] = Some((0..n).map(|i| fit.predict(&spec.om, data.x_row(i))).collect());
            om[zv as usize][sv as usize] = Some(fit);
        }
    }

    Ok(NuisanceFit { pi, p1, p0, mu, options, models: Some(FittedModels { spec: spec.clone(), tp, ps1, ps0, om }) })
}
