use super::{guarded, positive, Context, EstimatorKind, EstimatorOptions, PceEstimate};
use crate::data::{Dataset, MarginalMode, Stratum, StratumMap};
use crate::error::Result;
use crate::glm::NuisanceFit;
use crate::sensitivity::OmegaWeights;

fn finish(ctx: Context<'_>, kind: EstimatorKind, tau: StratumMap<Option<f64>>) -> PceEstimate {
    PceEstimate { estimator: kind, proportions: ctx.proportions(), tau, warnings: ctx.warnings }
}

#[inline]
fn scale(w: Option<&[f64]>, i: usize, v: f64) -> f64 {
    match w {
        Some(w) => w[i] * v,
        None => v,
    }
}

/// Weighted sums for one arm of a stratum contrast.
#[derive(Default, Clone, Copy)]
struct Arm {
    wy: f64,
    w: f64,
}

impl Arm {
    fn add(&mut self, w: f64, y: f64) {
        self.wy += w * y;
        self.w += w;
    }

    fn mean(self, u: Stratum) -> Result<f64> {
        Ok(self.wy / positive(u, self.w)?)
    }
}

/// Treatment-probability and principal-score weighting, optionally with the
/// sensitivity tilting weights `ω` multiplying the principal-score ratios.
pub(crate) fn weighting_with_omega(
    ctx: &Context<'_>,
    stabilized: bool,
    omega: Option<&OmegaWeights>,
) -> Result<StratumMap<Option<f64>>> {
    let data = ctx.data;
    let nuis = &ctx.nuis;
    let e = &ctx.e;
    let has11 = ctx.has_s11();
    let (w110, w010, w000, w111) = match omega {
        Some(o) => (Some(&o.w1_10[..]), Some(&o.w0_10[..]), Some(&o.w0_00[..]), Some(&o.w1_11[..])),
        None => (None, None, None, None),
    };

    let mut a10 = [Arm::default(); 2];
    let mut a00 = [Arm::default(); 2];
    let mut a11 = [Arm::default(); 2];
    for i in 0..data.len() {
        let (z, s, y) = (data.z()[i], data.s()[i], data.y()[i]);
        let (pi, p1, p0) = (nuis.pi[i], nuis.p1[i], nuis.p0[i]);
        match (z, s) {
            (1, 1) => {
                let ipw = 1.0 / pi;
                a10[1].add(scale(w110, i, guarded(e.e10[i], p1, i)?) * ipw, y);
                if has11 {
                    a11[1].add(scale(w111, i, guarded(e.e11[i], p1, i)?) * ipw, y);
                }
            }
            (1, 0) => a00[1].add(1.0 / pi, y),
            (0, 0) => {
                let ipw = 1.0 / (1.0 - pi);
                a10[0].add(scale(w010, i, guarded(e.e10[i], 1.0 - p0, i)?) * ipw, y);
                a00[0].add(scale(w000, i, guarded(e.e00[i], 1.0 - p0, i)?) * ipw, y);
            }
            _ => a11[0].add(1.0 / (1.0 - pi), y),
        }
    }

    let m = ctx.marg;
    let n = ctx.n();
    let contrast = |a: &[Arm; 2], u: Stratum, den: f64| -> Result<f64> {
        if stabilized {
            Ok(a[1].mean(u)? - a[0].mean(u)?)
        } else {
            Ok((a[1].wy - a[0].wy) / n / positive(u, den)?)
        }
    };
    Ok(StratumMap::new(
        Some(contrast(&a10, Stratum::S10, m.e10)?),
        Some(contrast(&a00, Stratum::S00, m.e00)?),
        if has11 { Some(contrast(&a11, Stratum::S11, m.e11)?) } else { None },
    ))
}

/// Weighting by treatment probability and principal score.
pub fn estimate_tp_ps(
    data: &Dataset,
    nuis: &NuisanceFit,
    stabilized: bool,
    opts: &EstimatorOptions,
) -> Result<PceEstimate> {
    let ctx = Context::new(data, nuis, opts)?;
    let tau = weighting_with_omega(&ctx, stabilized, None)?;
    let kind = if stabilized { EstimatorKind::TpPsStabilized } else { EstimatorKind::TpPs };
    Ok(finish(ctx, kind, tau))
}

/// Inverse treatment-probability weighting of outcome-model contrasts.
pub fn estimate_tp_om(
    data: &Dataset,
    nuis: &NuisanceFit,
    stabilized: bool,
    opts: &EstimatorOptions,
) -> Result<PceEstimate> {
    let ctx = Context::new(data, nuis, opts)?;
    let (mu11, mu10, mu00) = (ctx.mu(1, 1)?, ctx.mu(1, 0)?, ctx.mu(0, 0)?);
    let mu01 = if ctx.has_s11() { Some(ctx.mu(0, 1)?) } else { None };

    // Numerator and weight sums, stratum order 10, 00, 11.
    let mut num = [0.0; 3];
    let mut wsum = [0.0; 3];
    for i in 0..data.len() {
        let (z, s) = (data.z()[i], data.s()[i]);
        let pi = ctx.nuis.pi[i];
        let (w10, w00, w11) = match (z, s) {
            (1, 1) => (1.0 / pi, 0.0, 0.0),
            (1, 0) => (0.0, 1.0 / pi, 0.0),
            (0, 1) => {
                let w = 1.0 / (1.0 - pi);
                (-w, 0.0, w)
            }
            _ => (0.0, 0.0, 0.0),
        };
        num[0] += w10 * (mu11[i] - mu00[i]);
        wsum[0] += w10;
        num[1] += w00 * (mu10[i] - mu00[i]);
        wsum[1] += w00;
        if let Some(m01) = mu01 {
            num[2] += w11 * (mu11[i] - m01[i]);
            wsum[2] += w11;
        }
    }

    let n = ctx.n();
    let dens =
        if stabilized { [wsum[0] / n, wsum[1] / n, wsum[2] / n] } else { [ctx.marg.e10, ctx.marg.e00, ctx.marg.e11] };
    let tau = StratumMap::new(
        Some(num[0] / n / positive(Stratum::S10, dens[0])?),
        Some(num[1] / n / positive(Stratum::S00, dens[1])?),
        match mu01 {
            Some(_) => Some(num[2] / n / positive(Stratum::S11, dens[2])?),
            None => None,
        },
    );
    let kind = if stabilized { EstimatorKind::TpOmStabilized } else { EstimatorKind::TpOm };
    Ok(finish(ctx, kind, tau))
}

/// Principal-score weighted outcome-model contrasts.
pub fn estimate_ps_om(data: &Dataset, nuis: &NuisanceFit, opts: &EstimatorOptions) -> Result<PceEstimate> {
    ps_om(data, nuis, opts, EstimatorKind::PsOm)
}

fn ps_om(data: &Dataset, nuis: &NuisanceFit, opts: &EstimatorOptions, kind: EstimatorKind) -> Result<PceEstimate> {
    let ctx = Context::new(data, nuis, opts)?;
    let (mu11, mu10, mu00) = (ctx.mu(1, 1)?, ctx.mu(1, 0)?, ctx.mu(0, 0)?);
    let mu01 = if ctx.has_s11() { Some(ctx.mu(0, 1)?) } else { None };
    let e = &ctx.e;
    let mut num = [0.0; 3];
    for i in 0..data.len() {
        num[0] += e.e10[i] * (mu11[i] - mu00[i]);
        num[1] += e.e00[i] * (mu10[i] - mu00[i]);
        if let Some(m01) = mu01 {
            num[2] += e.e11[i] * (mu11[i] - m01[i]);
        }
    }
    let n = ctx.n();
    let m = ctx.marg;
    let tau = StratumMap::new(
        Some(num[0] / n / positive(Stratum::S10, m.e10)?),
        Some(num[1] / n / positive(Stratum::S00, m.e00)?),
        match mu01 {
            Some(_) => Some(num[2] / n / positive(Stratum::S11, m.e11)?),
            None => None,
        },
    );
    Ok(finish(ctx, kind, tau))
}

/// Stabilized weighting that treats the treatment as completely randomized,
/// `π ≡ n₁/n`, with principal scores from the supplied fit.
pub fn estimate_dl_weighting(data: &Dataset, nuis: &NuisanceFit, opts: &EstimatorOptions) -> Result<PceEstimate> {
    let n1 = data.z().iter().filter(|&&z| z == 1).count();
    let mut flat = nuis.clone();
    flat.pi = vec![n1 as f64 / data.len() as f64; data.len()];
    let opts = EstimatorOptions { trim: 0.0, ..*opts };
    let ctx = Context::new(data, &flat, &opts)?;
    let tau = weighting_with_omega(&ctx, true, None)?;
    Ok(finish(ctx, EstimatorKind::DlWeighting, tau))
}

/// Principal-score and outcome-model regression with plug-in proportions.
pub fn estimate_dl_regression(data: &Dataset, nuis: &NuisanceFit, opts: &EstimatorOptions) -> Result<PceEstimate> {
    let opts = EstimatorOptions { marginal: MarginalMode::Plugin, ..*opts };
    ps_om(data, nuis, &opts, EstimatorKind::DlRegression)
}
