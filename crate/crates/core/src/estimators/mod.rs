//! Point estimators for the principal causal effects `τ_u`, `u ∈ {10, 00, 11}`.
//!
//! Three families follow the pairwise identification formulas
//! (treatment probability + principal score, treatment probability + outcome
//! mean, principal score + outcome mean); the fourth combines all three
//! working models through the efficient influence function and stays
//! consistent when any two of them are correct.

mod identification;
mod psi;
mod triply_robust;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use identification::{
    estimate_dl_regression, estimate_dl_weighting, estimate_ps_om, estimate_tp_om, estimate_tp_ps,
};
pub use psi::{compute_psi, PsiValues};
pub use triply_robust::{compute_phi, compute_phi_strong_monotone, estimate_triply_robust, PhiValues};

pub(crate) use identification::weighting_with_omega;
pub(crate) use triply_robust::{tr_denominators, tr_ratios};

use crate::data::{
    marginal_proportions, strata_from_scores, Dataset, MarginalMode, MarginalProportions, Stratum, StratumMap,
    StratumScores,
};
use crate::error::{Error, Result};
use crate::glm::NuisanceFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EstimatorKind {
    TpPs,
    TpPsStabilized,
    TpOm,
    TpOmStabilized,
    PsOm,
    TriplyRobust,
    DlWeighting,
    DlRegression,
    SensWeighting,
    SensDr,
}

impl EstimatorKind {
    /// The five families run by [`estimate_all`].
    pub const CORE: [EstimatorKind; 5] = [
        EstimatorKind::TpPs,
        EstimatorKind::TpPsStabilized,
        EstimatorKind::TpOm,
        EstimatorKind::PsOm,
        EstimatorKind::TriplyRobust,
    ];

    /// Estimators compared in the simulation study.
    pub const STUDY: [EstimatorKind; 7] = [
        EstimatorKind::TpPs,
        EstimatorKind::TpPsStabilized,
        EstimatorKind::DlWeighting,
        EstimatorKind::TpOm,
        EstimatorKind::PsOm,
        EstimatorKind::DlRegression,
        EstimatorKind::TriplyRobust,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::TpPs => "tp-ps",
            EstimatorKind::TpPsStabilized => "tp-ps-stab",
            EstimatorKind::TpOm => "tp-om",
            EstimatorKind::TpOmStabilized => "tp-om-stab",
            EstimatorKind::PsOm => "ps-om",
            EstimatorKind::TriplyRobust => "tr",
            EstimatorKind::DlWeighting => "dl-approx-w",
            EstimatorKind::DlRegression => "dl-approx-r",
            EstimatorKind::SensWeighting => "sens-w",
            EstimatorKind::SensDr => "sens-dr",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        const ALL: [EstimatorKind; 10] = [
            EstimatorKind::TpPs,
            EstimatorKind::TpPsStabilized,
            EstimatorKind::TpOm,
            EstimatorKind::TpOmStabilized,
            EstimatorKind::PsOm,
            EstimatorKind::TriplyRobust,
            EstimatorKind::DlWeighting,
            EstimatorKind::DlRegression,
            EstimatorKind::SensWeighting,
            EstimatorKind::SensDr,
        ];
        ALL.into_iter().find(|k| k.label() == s).ok_or_else(|| Error::InvalidConfig(format!("unknown estimator '{s}'")))
    }
}

impl Serialize for PceEstimate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("PceEstimate", 4)?;
        st.serialize_field("estimator", self.estimator.label())?;
        st.serialize_field("tau", &self.tau)?;
        st.serialize_field("proportions", &self.proportions)?;
        st.serialize_field("warnings", &self.warnings)?;
        st.end()
    }
}

/// Point estimates for the three strata. `None` marks a stratum that is not
/// applicable, e.g. `τ₁₁` under strong monotonicity.
#[derive(Debug, Clone, PartialEq)]
pub struct PceEstimate {
    pub estimator: EstimatorKind,
    pub tau: StratumMap<Option<f64>>,
    pub proportions: StratumMap<Option<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorOptions {
    pub marginal: MarginalMode,
    /// Clamp `π̂(X)` into `[δ, 1 − δ]`; zero disables trimming.
    pub trim: f64,
    /// Clamp negative fitted `e₁₀(X)` at zero and renormalize.
    pub truncate_scores: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { marginal: MarginalMode::DoublyRobust, trim: 0.0, truncate_scores: false }
    }
}

/// Shared per-call state: adjusted nuisances, stratum scores and marginals.
pub(crate) struct Context<'a> {
    pub data: &'a Dataset,
    pub nuis: Cow<'a, NuisanceFit>,
    pub e: StratumScores,
    pub marg: MarginalProportions,
    pub warnings: Vec<String>,
}

impl<'a> Context<'a> {
    pub fn new(data: &'a Dataset, nuis: &'a NuisanceFit, opts: &EstimatorOptions) -> Result<Self> {
        if nuis.len() != data.len() {
            return Err(Error::InvalidConfig(format!(
                "nuisance fit has {} units, dataset has {}",
                nuis.len(),
                data.len()
            )));
        }
        let mut nuis = Cow::Borrowed(nuis);
        if opts.trim > 0.0 {
            nuis = Cow::Owned(nuis.into_owned().trimmed(opts.trim));
        }
        if opts.truncate_scores {
            nuis = Cow::Owned(nuis.into_owned().with_truncated_scores());
        }
        nuis.check_positivity()?;
        let e = strata_from_scores(&nuis.scores());
        let marg = marginal_proportions(&nuis.scores(), opts.marginal, &nuis.pi, data)?;
        let warnings = e.warnings();
        Ok(Context { data, nuis, e, marg, warnings })
    }

    /// Whether `τ₁₁` is estimable with this nuisance fit.
    pub fn has_s11(&self) -> bool {
        !self.nuis.options.strong_monotonicity && self.nuis.mu(0, 1).is_some()
    }

    pub fn mu(&self, z: u8, s: u8) -> Result<&[f64]> {
        self.nuis
            .mu(z, s)
            .ok_or_else(|| Error::InvalidConfig(format!("outcome model for cell (Z={z}, S={s}) unavailable")))
    }

    pub fn n(&self) -> f64 {
        self.data.len() as f64
    }

    pub fn proportions(&self) -> StratumMap<Option<f64>> {
        let m = self.marg.as_map();
        StratumMap::new(Some(m.s10), Some(m.s00), self.has_s11().then_some(m.s11))
    }
}

/// Denominator of a stratum ratio; must be strictly positive.
pub(crate) fn positive(u: Stratum, d: f64) -> Result<f64> {
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateStratum(u))
    }
}

/// `num / den` with the convention `0 / 0 = 0` for vanishing principal scores.
pub(crate) fn guarded(num: f64, den: f64, unit: usize) -> Result<f64> {
    if den != 0.0 {
        Ok(num / den)
    } else if num == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::DivisionByZero { unit })
    }
}

/// Runs one estimator.
pub fn estimate(
    kind: EstimatorKind,
    data: &Dataset,
    nuis: &NuisanceFit,
    opts: &EstimatorOptions,
) -> Result<PceEstimate> {
    match kind {
        EstimatorKind::TpPs => estimate_tp_ps(data, nuis, false, opts),
        EstimatorKind::TpPsStabilized => estimate_tp_ps(data, nuis, true, opts),
        EstimatorKind::TpOm => estimate_tp_om(data, nuis, false, opts),
        EstimatorKind::TpOmStabilized => estimate_tp_om(data, nuis, true, opts),
        EstimatorKind::PsOm => estimate_ps_om(data, nuis, opts),
        EstimatorKind::TriplyRobust => estimate_triply_robust(data, nuis, opts),
        EstimatorKind::DlWeighting => estimate_dl_weighting(data, nuis, opts),
        EstimatorKind::DlRegression => estimate_dl_regression(data, nuis, opts),
        EstimatorKind::SensWeighting | EstimatorKind::SensDr => {
            Err(Error::InvalidConfig(format!("'{kind}' needs a sensitivity specification")))
        }
    }
}

/// Result of one estimator family inside [`estimate_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutcome {
    pub kind: EstimatorKind,
    pub result: Result<PceEstimate>,
}

/// Runs `kinds`, embedding per-estimator failures instead of aborting.
pub fn estimate_many(
    kinds: &[EstimatorKind],
    data: &Dataset,
    nuis: &NuisanceFit,
    opts: &EstimatorOptions,
) -> Vec<EstimateOutcome> {
    kinds.iter().map(|&kind| EstimateOutcome { kind, result: estimate(kind, data, nuis, opts) }).collect()
}

/// tp-ps, stabilized tp-ps, tp-om, ps-om and the triply robust estimator.
pub fn estimate_all(data: &Dataset, nuis: &NuisanceFit, opts: &EstimatorOptions) -> Vec<EstimateOutcome> {
    estimate_many(&EstimatorKind::CORE, data, nuis, opts)
}
