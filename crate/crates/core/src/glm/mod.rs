//! Working-model fitters: logistic regression by iteratively reweighted least
//! squares and ordinary least squares by Householder QR.

mod nuisance;

pub use nuisance::{fit_nuisance, CellModels, FitOptions, FittedModels, NuisanceFit, NuisanceSpec};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const IRLS_MAX_ITER: usize = 50;
pub const IRLS_TOL: f64 = 1e-8;
pub const PROB_CLAMP: f64 = 1e-6;

/// Which covariates enter a working model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignSpec {
    /// Zero-based covariate indices.
    pub covariate_indices: Vec<usize>,
    pub include_intercept: bool,
}

impl DesignSpec {
    /// Intercept plus every covariate.
    pub fn all(k: usize) -> Self {
        DesignSpec { covariate_indices: (0..k).collect(), include_intercept: true }
    }

    pub fn intercept_only() -> Self {
        DesignSpec { covariate_indices: Vec::new(), include_intercept: true }
    }

    pub fn columns(&self) -> usize {
        self.covariate_indices.len() + usize::from(self.include_intercept)
    }

    pub fn check(&self, k: usize) -> Result<()> {
        let mut seen = vec![false; k];
        for &j in &self.covariate_indices {
            if j >= k {
                return Err(Error::InvalidConfig(format!("covariate index {} out of range 1..={k}", j + 1)));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidConfig(format!("covariate index {} repeated", j + 1)));
            }
        }
        if self.columns() == 0 {
            return Err(Error::InvalidConfig("empty design".into()));
        }
        Ok(())
    }

    /// Linear predictor `x_row · coef` under this design.
    pub fn linear_predictor(&self, x_row: &[f64], coef: &[f64]) -> f64 {
        let mut eta = 0.0;
        let mut c = coef.iter();
        if self.include_intercept {
            eta += c.next().copied().unwrap_or(0.0);
        }
        for (&j, &b) in self.covariate_indices.iter().zip(c) {
            eta += x_row[j] * b;
        }
        eta
    }
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "design shape mismatch");
        Design { rows, cols, data }
    }

    /// Design for the units in `subset` (all units when `None`).
    pub fn build(data: &Dataset, spec: &DesignSpec, subset: Option<&[usize]>) -> Self {
        let cols = spec.columns();
        let push_row = |out: &mut Vec<f64>, i: usize| {
            if spec.include_intercept {
                out.push(1.0);
            }
            let x = data.x_row(i);
            out.extend(spec.covariate_indices.iter().map(|&j| x[j]));
        };
        let mut buf = Vec::new();
        let rows = match subset {
            Some(idx) => {
                buf.reserve(idx.len() * cols);
                idx.iter().for_each(|&i| push_row(&mut buf, i));
                idx.len()
            }
            None => {
                buf.reserve(data.len() * cols);
                (0..data.len()).for_each(|i| push_row(&mut buf, i));
                data.len()
            }
        };
        Design { rows, cols, data: buf }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// `Xᵀ diag(w) X`, or `XᵀX` when `w` is `None`.
    fn gram(&self, w: Option<&[f64]>) -> DMatrix<f64> {
        let p = self.cols;
        let mut g = DMatrix::zeros(p, p);
        for i in 0..self.rows {
            let r = self.row(i);
            let wi = w.map_or(1.0, |w| w[i]);
            for a in 0..p {
                let ra = r[a] * wi;
                for b in a..p {
                    g[(a, b)] += ra * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// Rejects designs whose scaled Gram matrix is numerically singular.
    fn check_rank(&self) -> Result<()> {
        if self.rows < self.cols {
            return Err(Error::RankDeficientDesign);
        }
        let mut g = self.gram(None);
        let scale: Vec<f64> = (0..self.cols).map(|a| g[(a, a)].sqrt()).collect();
        if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::RankDeficientDesign);
        }
        for a in 0..self.cols {
            for b in 0..self.cols {
                g[(a, b)] /= scale[a] * scale[b];
            }
        }
        let eig = SymmetricEigen::new(g).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if !(min > max * 1e-12) {
            return Err(Error::RankDeficientDesign);
        }
        Ok(())
    }

    fn mul(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticFit {
    /// Intercept first when the design has one.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
}

impl LogisticFit {
    pub fn predict(&self, spec: &DesignSpec, x_row: &[f64]) -> f64 {
        logistic(spec.linear_predictor(x_row, &self.coefficients)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
}

impl LinearFit {
    pub fn predict(&self, spec: &DesignSpec, x_row: &[f64]) -> f64 {
        spec.linear_predictor(x_row, &self.coefficients)
    }
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    -2.0 * y.iter().zip(mu).map(|(&yi, &m)| if yi > 0.5 { m.ln() } else { (1.0 - m).ln() }).sum::<f64>()
}

/// Maximum-likelihood logistic regression of a 0/1 response.
///
/// Converges when the relative deviance change drops below [`IRLS_TOL`];
/// fitted probabilities are clamped to `[1e-6, 1 - 1e-6]` inside the
/// iterations so quasi-separated data still terminate.
pub fn fit_logistic(y: &[f64], x: &Design) -> Result<LogisticFit> {
    assert_eq!(y.len(), x.rows(), "response length must match design rows");
    let ones = y.iter().filter(|&&v| v > 0.5).count();
    if ones == 0 {
        return Err(Error::DegenerateResponse(0));
    }
    if ones == y.len() {
        return Err(Error::DegenerateResponse(1));
    }
    x.check_rank()?;

    let n = x.rows();
    let p = x.cols();
    let mut beta = vec![0.0; p];
    let mut mu = vec![0.5; n];
    let mut dev_old = deviance(y, &mu);
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        let eta = x.mul(&beta);
        let mut rhs = DVector::zeros(p);
        for i in 0..n {
            let m = mu[i];
            w[i] = m * (1.0 - m);
            let zi = eta[i] + (y[i] - m) / w[i];
            let r = x.row(i);
            for a in 0..p {
                rhs[a] += r[a] * w[i] * zi;
            }
        }
        let chol = x.gram(Some(&w)).cholesky().ok_or(Error::RankDeficientDesign)?;
        let next = chol.solve(&rhs);
        beta = next.iter().copied().collect();
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::RankDeficientDesign);
        }
        mu = x.mul(&beta).into_iter().map(|e| logistic(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)).collect();
        let dev = deviance(y, &mu);
        if (dev - dev_old).abs() / (dev.abs() + 0.1) < IRLS_TOL {
            dev_old = dev;
            converged = true;
            break;
        }
        dev_old = dev;
    }
    Ok(LogisticFit { coefficients: beta, converged, iterations, deviance: dev_old })
}

/// Least squares via Householder QR.
pub fn fit_ols(y: &[f64], x: &Design) -> Result<LinearFit> {
    assert_eq!(y.len(), x.rows(), "response length must match design rows");
    x.check_rank()?;
    let n = x.rows();
    let p = x.cols();
    let qr = x.to_matrix().qr();
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let r = qr.r();
    let beta = r.solve_upper_triangular(&qty.rows(0, p).into_owned()).ok_or(Error::RankDeficientDesign)?;
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let fitted = x.mul(&coefficients);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let residual_variance = if n > p { rss / (n - p) as f64 } else { 0.0 };
    Ok(LinearFit { coefficients, residual_variance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(x: &[f64], intercept: bool) -> Design {
        let cols = 1 + usize::from(intercept);
        let mut data = Vec::new();
        for &v in x {
            if intercept {
                data.push(1.0);
            }
            data.push(v);
        }
        Design::from_rows(x.len(), cols, data)
    }

    #[test]
    fn intercept_only_half() {
        let y = [0.0, 1.0, 1.0, 0.0];
        let fit = fit_logistic(&y, &Design::from_rows(4, 1, vec![1.0; 4])).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-10);
    }

    #[test]
    fn intercept_only_quarter() {
        let y: Vec<f64> = (0..400).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&y, &Design::from_rows(400, 1, vec![1.0; 400])).unwrap();
        assert!((fit.coefficients[0] - (-1.0986122886681098)).abs() < 1e-6);
        assert!((logit(0.25) + 1.0986122886681098).abs() < 1e-15);
    }

    #[test]
    fn degenerate_response() {
        let d = Design::from_rows(3, 1, vec![1.0; 3]);
        assert_eq!(fit_logistic(&[0.0; 3], &d), Err(Error::DegenerateResponse(0)));
        assert_eq!(fit_logistic(&[1.0; 3], &d), Err(Error::DegenerateResponse(1)));
    }

    #[test]
    fn mirrored_column_is_rank_deficient() {
        let xs = [0.3, -1.2, 0.5, 2.0, 0.1, -0.7];
        let mut data = Vec::new();
        for &v in &xs {
            data.extend_from_slice(&[1.0, v, -v]);
        }
        let d = Design::from_rows(6, 3, data);
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        assert_eq!(fit_logistic(&y, &d), Err(Error::RankDeficientDesign));
        assert_eq!(fit_ols(&y, &d), Err(Error::RankDeficientDesign));
    }

    #[test]
    fn separation_terminates() {
        let xs = [-2.0, -1.0, 1.0, 2.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let fit = fit_logistic(&y, &column(&xs, true)).unwrap();
        assert!(fit.iterations <= IRLS_MAX_ITER);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn ols_interpolates_line() {
        let xs = [0.0, 1.5, -2.0, 7.0, 3.25];
        let y: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x).collect();
        let fit = fit_ols(&y, &column(&xs, true)).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!(fit.residual_variance < 1e-20);
    }

    #[test]
    fn ols_constant_response() {
        let xs = [0.0, 1.5, -2.0, 7.0];
        let fit = fit_ols(&[4.5; 4], &column(&xs, true)).unwrap();
        assert!((fit.coefficients[0] - 4.5).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn ols_fitted_values_invariant_to_reparameterization() {
        let xs = [0.2, 1.1, -0.4, 2.3, 0.9, -1.7, 0.05];
        let y = [1.0, 2.5, 0.1, 3.9, 2.0, -1.2, 0.7];
        let a = column(&xs, true);
        // columns (1, x) -> (2 + 3x, -x)
        let mut data = Vec::new();
        for &v in &xs {
            data.extend_from_slice(&[2.0 + 3.0 * v, -v]);
        }
        let b = Design::from_rows(xs.len(), 2, data);
        let fa = a.mul(&fit_ols(&y, &a).unwrap().coefficients);
        let fb = b.mul(&fit_ols(&y, &b).unwrap().coefficients);
        for (p, q) in fa.iter().zip(&fb) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn design_spec_validation() {
        assert!(DesignSpec { covariate_indices: vec![0, 0], include_intercept: true }.check(2).is_err());
        assert!(DesignSpec { covariate_indices: vec![2], include_intercept: true }.check(2).is_err());
        assert!(DesignSpec { covariate_indices: vec![], include_intercept: false }.check(2).is_err());
        assert!(DesignSpec::all(3).check(3).is_ok());
    }
}
