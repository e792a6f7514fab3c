use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::NuisanceFit;

/// Augmented-IPW pseudo-outcomes for `E[f(Z = z) | X]`, one value per unit.
///
/// For a function `f` of the observed data and its working regression `m`,
/// `ψ_fz = 1{Z=z}(f - m)/P(Z=z|X) + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiValues {
    pub s1: Vec<f64>,
    pub s0: Vec<f64>,
    pub one_minus_s1: Vec<f64>,
    pub one_minus_s0: Vec<f64>,
    pub y1s1: Vec<f64>,
    pub y0s0: Vec<f64>,
    pub y1_one_minus_s1: Vec<f64>,
    pub y0_one_minus_s0: Vec<f64>,
}

#[inline]
fn aipw(hit: bool, f: f64, m: f64, prob: f64) -> f64 {
    if hit {
        (f - m) / prob + m
    } else {
        m
    }
}

pub fn compute_psi(data: &Dataset, nuis: &NuisanceFit) -> Result<PsiValues> {
    nuis.check_positivity()?;
    let missing = |z: u8, s: u8| Error::InvalidConfig(format!("outcome model for cell (Z={z}, S={s}) unavailable"));
    let mu11 = nuis.mu(1, 1).ok_or_else(|| missing(1, 1))?;
    let mu10 = nuis.mu(1, 0).ok_or_else(|| missing(1, 0))?;
    let mu00 = nuis.mu(0, 0).ok_or_else(|| missing(0, 0))?;
    let mu01 = nuis.mu(0, 1);

    let n = data.len();
    let mut out = PsiValues {
        s1: Vec::with_capacity(n),
        s0: Vec::with_capacity(n),
        one_minus_s1: Vec::with_capacity(n),
        one_minus_s0: Vec::with_capacity(n),
        y1s1: Vec::with_capacity(n),
        y0s0: Vec::with_capacity(n),
        y1_one_minus_s1: Vec::with_capacity(n),
        y0_one_minus_s0: Vec::with_capacity(n),
    };
    for i in 0..n {
        let t = data.z()[i] == 1;
        let c = !t;
        let s = data.s()[i] as f64;
        let y = data.y()[i];
        let (pi, p1, p0) = (nuis.pi[i], nuis.p1[i], nuis.p0[i]);
        let q = 1.0 - pi;

        out.s1.push(aipw(t, s, p1, pi));
        out.s0.push(aipw(c, s, p0, q));
        out.one_minus_s1.push(aipw(t, 1.0 - s, 1.0 - p1, pi));
        out.one_minus_s0.push(aipw(c, 1.0 - s, 1.0 - p0, q));
        out.y1s1.push(aipw(t, y * s, mu11[i] * p1, pi));
        // Without a (Z=0, S=1) model the plug-in is zero only when p0 vanishes.
        let m01 = match mu01 {
            Some(m) => m[i] * p0,
            None if p0 == 0.0 => 0.0,
            None => f64::NAN,
        };
        out.y0s0.push(aipw(c, y * s, m01, q));
        out.y1_one_minus_s1.push(aipw(t, y * (1.0 - s), mu10[i] * (1.0 - p1), pi));
        out.y0_one_minus_s0.push(aipw(c, y * (1.0 - s), mu00[i] * (1.0 - p0), q));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Unit;
    use crate::glm::FitOptions;

    fn one(z: u8, s: u8, y: f64) -> (Dataset, NuisanceFit) {
        let data = Dataset::from_units(&[Unit::new(z, s, y, vec![0.0])]).unwrap();
        let mu = [[Some(vec![1.0]), Some(vec![2.0])], [Some(vec![3.0]), Some(vec![4.0])]];
        let nuis = NuisanceFit::from_values(vec![0.5], vec![0.5], vec![0.25], mu, FitOptions::default()).unwrap();
        (data, nuis)
    }

    #[test]
    fn treated_taker_values() {
        let (d, n) = one(1, 1, 2.0);
        let p = compute_psi(&d, &n).unwrap();
        assert_eq!(p.s1[0], 1.5);
        assert_eq!(p.one_minus_s1[0], -0.5);
        assert_eq!(p.s0[0], 0.25);
        // mu11 = 4, p1 = 0.5: (2 - 2) / 0.5 + 2
        assert_eq!(p.y1s1[0], 2.0);
        // mu10 = 3: (0 - 1.5) / 0.5 + 1.5
        assert_eq!(p.y1_one_minus_s1[0], -1.5);
        assert_eq!(p.y0_one_minus_s0[0], 0.75);
    }

    #[test]
    fn control_uses_control_probability() {
        let (d, n) = one(0, 1, 3.0);
        let p = compute_psi(&d, &n).unwrap();
        assert_eq!(p.s1[0], 0.5);
        assert_eq!(p.s0[0], (1.0 - 0.25) / 0.5 + 0.25);
        // mu01 = 2, p0 = 0.25: (3 - 0.5) / 0.5 + 0.5
        assert_eq!(p.y0s0[0], 5.5);
    }

    #[test]
    fn complement_sums_to_one() {
        for (z, s) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let (d, n) = one(z, s, 1.0);
            let p = compute_psi(&d, &n).unwrap();
            assert!((p.s1[0] + p.one_minus_s1[0] - 1.0).abs() < 1e-15);
            assert!((p.s0[0] + p.one_minus_s0[0] - 1.0).abs() < 1e-15);
        }
    }
}
