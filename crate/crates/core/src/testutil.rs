use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Unit};
use crate::glm::{FitOptions, NuisanceFit};

/// One covariate `x ~ U(-1, 1)` and smooth nuisances; the returned fit holds
/// the true nuisance values.
pub(crate) fn synthetic(n: usize, seed: u64) -> (Dataset, NuisanceFit) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut units = Vec::with_capacity(n);
    let (mut pi, mut p1, mut p0) = (Vec::new(), Vec::new(), Vec::new());
    let mut mu: [[Vec<f64>; 2]; 2] = Default::default();
    for _ in 0..n {
        let x: f64 = rng.random_range(-1.0..1.0);
        let (a, b, c) = (0.45 + 0.1 * x, 0.7 + 0.1 * x, 0.25 - 0.05 * x);
        let m = [[2.0 + x, 1.5 + x], [3.0 + 0.8 * x, 2.5 + 1.1 * x]];
        let z = u8::from(rng.random::<f64>() < a);
        let s = u8::from(rng.random::<f64>() < if z == 1 { b } else { c });
        let eps: f64 = StandardNormal.sample(&mut rng);
        units.push(Unit::new(z, s, m[z as usize][s as usize] + 0.5 * eps, vec![x]));
        pi.push(a);
        p1.push(b);
        p0.push(c);
        for zz in 0..2 {
            for ss in 0..2 {
                mu[zz][ss].push(m[zz][ss]);
            }
        }
    }
    let [[m00, m01], [m10, m11]] = mu;
    let nuis =
        NuisanceFit::from_values(pi, p1, p0, [[Some(m00), Some(m01)], [Some(m10), Some(m11)]], FitOptions::default())
            .unwrap();
    (Dataset::from_units(&units).unwrap(), nuis)
}
