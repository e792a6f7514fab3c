//! Monte Carlo truth for the simulation designs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{draw_covariates, latent_means, true_nuisance, DgpKind, DgpSpec};
use crate::data::{Stratum, StratumMap};
use crate::error::{Error, Result};
use crate::exec;

const CHUNK: usize = 1 << 16;

/// Population value per stratum with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleTruth {
    pub tau: StratumMap<f64>,
    pub se: StratumMap<f64>,
    pub draws: usize,
}

/// Running sums for a ratio of means `E[a] / E[b]`.
#[derive(Debug, Clone, Copy, Default)]
struct RatioSums {
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl RatioSums {
    fn add(&mut self, a: f64, b: f64) {
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
    }

    fn merge(&mut self, o: &RatioSums) {
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.bb += o.bb;
        self.ab += o.ab;
    }

    /// Ratio and delta-method standard error.
    fn finish(&self, n: usize, u: Stratum) -> Result<(f64, f64)> {
        let nf = n as f64;
        if !(self.b > 0.0) {
            return Err(Error::DegenerateStratum(u));
        }
        let r = self.a / self.b;
        let (ma, mb) = (self.a / nf, self.b / nf);
        let v = (self.aa - 2.0 * r * self.ab + r * r * self.bb) / nf - (ma - r * mb).powi(2);
        Ok((r, (v.max(0.0) / nf).sqrt() / mb))
    }
}

type Sums = [RatioSums; 3];

/// Splits `n` draws into fixed chunks with one RNG stream each, so results
/// do not depend on thread count.
fn chunked(n: usize, seed: u64, body: impl Fn(&mut ChaCha8Rng, usize, &mut Sums) + Sync + Send) -> Sums {
    let chunks = n.div_ceil(CHUNK);
    let parts = exec::map_indexed(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let m = CHUNK.min(n - c * CHUNK);
        let mut sums = Sums::default();
        body(&mut rng, m, &mut sums);
        sums
    });
    let mut total = Sums::default();
    for p in &parts {
        for (t, s) in total.iter_mut().zip(p) {
            t.merge(s);
        }
    }
    total
}

fn finish(sums: &Sums, n: usize) -> Result<OracleTruth> {
    let mut tau = StratumMap::default();
    let mut se = StratumMap::default();
    for (i, u) in Stratum::ALL.into_iter().enumerate() {
        let (r, s) = sums[i].finish(n, u)?;
        tau[u] = r;
        se[u] = s;
    }
    Ok(OracleTruth { tau, se, draws: n })
}

/// Which identification formula the oracle evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Formula {
    /// Treatment-probability and principal-score weighting of `Y`.
    A,
    /// Treatment-probability weighting of outcome-mean contrasts.
    B,
    /// Principal-score weighting of outcome-mean contrasts.
    C,
}

/// True PCEs: principal-score weighted outcome-mean contrasts evaluated at the
/// true nuisance functions over `oracle_n` covariate draws. Tilted designs use
/// the tilted contrasts `ω μ`.
pub fn true_pce(spec: &DgpSpec, oracle_n: usize, seed: u64) -> Result<OracleTruth> {
    if spec.kind == DgpKind::Standard {
        return formula_oracle(spec, Formula::C, oracle_n, seed);
    }
    let sums = chunked(oracle_n, seed, |rng, m, acc| {
        for _ in 0..m {
            let t = true_nuisance(spec, &draw_covariates(rng));
            let [e10, e00, e11] = t.e();
            let lm = latent_means(spec, &t);
            acc[0].add(e10 * (lm[0][0] - lm[0][1]), e10);
            acc[1].add(e00 * (lm[1][0] - lm[1][1]), e00);
            acc[2].add(e11 * (lm[2][0] - lm[2][1]), e11);
        }
    });
    finish(&sums, oracle_n)
}

/// Evaluates one of the three identification formulas by Monte Carlo with the
/// true nuisance functions. Formulas A and B also draw `(Z, S, Y)`.
pub fn formula_oracle(spec: &DgpSpec, formula: Formula, oracle_n: usize, seed: u64) -> Result<OracleTruth> {
    if spec.kind != DgpKind::Standard {
        return Err(Error::InvalidConfig("identification formulas need the standard design".into()));
    }
    let sums = chunked(oracle_n, seed, |rng, m, acc| {
        for _ in 0..m {
            let t = true_nuisance(spec, &draw_covariates(rng));
            let [e10, e00, e11] = t.e();
            let mu = t.mu;
            match formula {
                Formula::C => {
                    acc[0].add(e10 * (mu[1][1] - mu[0][0]), e10);
                    acc[1].add(e00 * (mu[1][0] - mu[0][0]), e00);
                    acc[2].add(e11 * (mu[1][1] - mu[0][1]), e11);
                }
                Formula::A | Formula::B => {
                    let zt = rng.random::<f64>() < t.pi;
                    let s = rng.random::<f64>() < if zt { t.p1 } else { t.p0 };
                    let noise: f64 = StandardNormal.sample(rng);
                    let y = mu[usize::from(zt)][usize::from(s)] + noise;
                    let (w1, w0) = (if zt { 1.0 / t.pi } else { 0.0 }, if zt { 0.0 } else { 1.0 / (1.0 - t.pi) });
                    let (sf, nf) = (f64::from(u8::from(s)), f64::from(u8::from(!s)));
                    if formula == Formula::A {
                        let a10 = e10 / t.p1 * sf * w1 * y - e10 / (1.0 - t.p0) * nf * w0 * y;
                        let a00 = nf * w1 * y - e00 / (1.0 - t.p0) * nf * w0 * y;
                        let a11 = e11 / t.p1 * sf * w1 * y - sf * w0 * y;
                        acc[0].add(a10, e10);
                        acc[1].add(a00, e00);
                        acc[2].add(a11, e11);
                    } else {
                        acc[0].add((sf * w1 - sf * w0) * (mu[1][1] - mu[0][0]), e10);
                        acc[1].add(nf * w1 * (mu[1][0] - mu[0][0]), e00);
                        acc[2].add(sf * w0 * (mu[1][1] - mu[0][1]), e11);
                    }
                }
            }
        }
    });
    finish(&sums, oracle_n)
}

/// Averages potential-outcome mean differences over units drawn into each
/// latent stratum; an independent route to the truth of tilted designs.
pub fn latent_truth(spec: &DgpSpec, oracle_n: usize, seed: u64) -> Result<OracleTruth> {
    let sums = chunked(oracle_n, seed, |rng, m, acc| {
        for _ in 0..m {
            let t = true_nuisance(spec, &draw_covariates(rng));
            let [e10, e00, _] = t.e();
            let v = rng.random::<f64>();
            let u = if v < e10 {
                0
            } else if v < e10 + e00 {
                1
            } else {
                2
            };
            let lm = latent_means(spec, &t);
            for (k, sums) in acc.iter_mut().enumerate() {
                let hit = if k == u { 1.0 } else { 0.0 };
                sums.add(hit * (lm[k][0] - lm[k][1]), hit);
            }
        }
    });
    finish(&sums, oracle_n)
}
