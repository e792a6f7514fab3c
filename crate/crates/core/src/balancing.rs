//! Covariate balance diagnostics for the treatment-probability and
//! principal-score models.
//!
//! For each stratum, several weightings of the sample all target
//! `E{h(X) | U = u}` when both models are correct. Large standardized
//! differences between the weighted means point to misspecification.

use std::io::Write;

use serde::Serialize;

use crate::data::{Dataset, Stratum};
use crate::error::{Error, Result};
use crate::estimators::{guarded, positive};
use crate::exec;
use crate::glm::NuisanceFit;

pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// `h(X) = X_j^power`; power 0 is the constant function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HTerm {
    pub label: String,
    pub column: usize,
    pub power: u32,
}

impl HTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.power {
            0 => 1.0,
            p => x[self.column].powi(p as i32),
        }
    }
}

/// Each raw covariate and its square.
pub fn default_h(data: &Dataset) -> Vec<HTerm> {
    let mut out = Vec::with_capacity(2 * data.k());
    for (j, name) in data.covariate_names().iter().enumerate() {
        out.push(HTerm { label: name.clone(), column: j, power: 1 });
        out.push(HTerm { label: format!("{name}^2"), column: j, power: 2 });
    }
    out
}

/// Parses `name` and `name^2` tokens against the covariate names; `1` is the
/// constant function.
pub fn parse_h(tokens: &[&str], data: &Dataset) -> Result<Vec<HTerm>> {
    tokens
        .iter()
        .map(|tok| {
            let tok = tok.trim();
            if tok == "1" {
                return Ok(HTerm { label: "1".into(), column: 0, power: 0 });
            }
            let (name, power) = match tok.split_once('^') {
                Some((n, "2")) => (n, 2),
                Some(_) => {
                    return Err(Error::InvalidConfig(format!(
                        "balance term '{tok}': only name and name^2 are supported"
                    )))
                }
                None => (tok, 1),
            };
            let column = data
                .covariate_names()
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown covariate '{name}' in balance term")))?;
            Ok(HTerm { label: tok.to_string(), column, power })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub h: String,
    /// Self-normalized weighted means, in the order of [`StratumBalance::weightings`].
    pub means: Vec<f64>,
    /// Sample standard deviation of `h(X)`; differences are left raw when zero.
    pub sd: f64,
    /// `(mean_i - mean_ref) / sd` for each weighting.
    pub std_diff: Vec<f64>,
    /// Largest absolute standardized difference over all pairs of weightings.
    pub max_abs_diff: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumBalance {
    pub stratum: Stratum,
    pub weightings: Vec<&'static str>,
    pub reference: usize,
    pub rows: Vec<BalanceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub threshold: f64,
    pub strata: Vec<StratumBalance>,
}

impl BalanceReport {
    pub fn any_flagged(&self) -> bool {
        self.strata.iter().flat_map(|s| &s.rows).any(|r| r.flagged)
    }

    pub fn max_abs_diff(&self) -> f64 {
        self.strata.iter().flat_map(|s| &s.rows).map(|r| r.max_abs_diff).fold(0.0, f64::max)
    }

    /// Long format: one line per stratum, term and weighting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wtr.write_record(["stratum", "h", "weighting", "reference", "mean", "std_diff", "max_abs_diff", "flagged"])
            .map_err(io)?;
        for st in &self.strata {
            for row in &st.rows {
                for (i, name) in st.weightings.iter().enumerate() {
                    wtr.write_record([
                        st.stratum.label().to_string(),
                        row.h.clone(),
                        name.to_string(),
                        (i == st.reference).to_string(),
                        row.means[i].to_string(),
                        row.std_diff[i].to_string(),
                        row.max_abs_diff.to_string(),
                        row.flagged.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
        wtr.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

const SET_A: [&str; 4] = ["tp-ps:treated", "tp-ps:control", "tp", "ps"];
const SET_B: [&str; 4] = ["tp:treated", "tp-ps:control", "tp", "ps"];
const SET_C: [&str; 3] = ["tp-ps:treated", "tp:control", "ps"];

/// Per-unit weights for each set; columns follow `SET_A`, `SET_B`, `SET_C`.
struct Weights {
    a: [Vec<f64>; 4],
    b: [Vec<f64>; 4],
    c: Option<[Vec<f64>; 3]>,
}

fn weights(data: &Dataset, nuis: &NuisanceFit) -> Result<Weights> {
    let n = data.len();
    let with11 = !nuis.options.strong_monotonicity;
    let mut a: [Vec<f64>; 4] = Default::default();
    let mut b: [Vec<f64>; 4] = Default::default();
    let mut c: [Vec<f64>; 3] = Default::default();
    for i in 0..n {
        let (z, s) = (data.z()[i] as f64, data.s()[i] as f64);
        let (pi, p1, p0) = (nuis.pi[i], nuis.p1[i], nuis.p0[i]);
        let (e10, e00, e11) = (p1 - p0, 1.0 - p1, p0);
        let t1 = s * z / pi;
        let c0 = (1.0 - s) * (1.0 - z) / (1.0 - pi);
        let s0 = s * (1.0 - z) / (1.0 - pi);

        a[0].push(guarded(e10, p1, i)? * t1);
        a[1].push(guarded(e10, 1.0 - p0, i)? * c0);
        a[2].push(t1 - s0);
        a[3].push(e10);

        b[0].push((1.0 - s) * z / pi);
        b[1].push(guarded(e00, 1.0 - p0, i)? * c0);
        b[2].push(1.0 - t1);
        b[3].push(e00);

        if with11 {
            c[0].push(guarded(e11, p1, i)? * t1);
            c[1].push(s0);
            c[2].push(e11);
        }
    }
    Ok(Weights { a, b, c: with11.then_some(c) })
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn stratum_balance(
    u: Stratum,
    names: &[&'static str],
    reference: usize,
    w: &[Vec<f64>],
    h: &[HTerm],
    hv: &[Vec<f64>],
    threshold: f64,
) -> Result<StratumBalance> {
    let totals: Vec<f64> = w.iter().map(|wi| wi.iter().sum()).collect();
    for &t in &totals {
        positive(u, t)?;
    }
    let rows = exec::map_indexed(h.len(), |j| {
        let vals = &hv[j];
        let means: Vec<f64> =
            w.iter().zip(&totals).map(|(wi, t)| wi.iter().zip(vals).map(|(a, b)| a * b).sum::<f64>() / t).collect();
        let sd = sample_sd(vals);
        let scale = if sd > 0.0 { sd } else { 1.0 };
        let std_diff: Vec<f64> = means.iter().map(|m| (m - means[reference]) / scale).collect();
        let mut max_abs_diff = 0.0f64;
        for (i, mi) in means.iter().enumerate() {
            for mj in &means[i + 1..] {
                max_abs_diff = max_abs_diff.max((mi - mj).abs() / scale);
            }
        }
        BalanceRow { h: h[j].label.clone(), means, sd, std_diff, max_abs_diff, flagged: max_abs_diff > threshold }
    });
    Ok(StratumBalance { stratum: u, weightings: names.to_vec(), reference, rows })
}

/// Weighted means of each `h(X)` under the balancing weightings of every
/// stratum. Under strong monotonicity the `11` set is omitted.
pub fn balance_check(data: &Dataset, nuis: &NuisanceFit, h: &[HTerm], threshold: f64) -> Result<BalanceReport> {
    if nuis.len() != data.len() {
        return Err(Error::InvalidConfig("nuisance fit and dataset differ in length".into()));
    }
    if h.is_empty() {
        return Err(Error::InvalidConfig("no balance terms".into()));
    }
    if let Some(t) = h.iter().find(|t| t.power > 0 && t.column >= data.k()) {
        return Err(Error::InvalidConfig(format!("balance term '{}' refers to a missing covariate", t.label)));
    }
    nuis.check_positivity()?;
    let w = weights(data, nuis)?;
    let hv: Vec<Vec<f64>> = h.iter().map(|t| (0..data.len()).map(|i| t.eval(data.x_row(i))).collect()).collect();
    let mut strata = vec![
        stratum_balance(Stratum::S10, &SET_A, 2, &w.a, h, &hv, threshold)?,
        stratum_balance(Stratum::S00, &SET_B, 2, &w.b, h, &hv, threshold)?,
    ];
    if let Some(c) = &w.c {
        strata.push(stratum_balance(Stratum::S11, &SET_C, 1, c, h, &hv, threshold)?);
    }
    Ok(BalanceReport { threshold, strata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::synthetic;

    #[test]
    fn constant_h_balances_exactly() {
        let (d, n) = synthetic(300, 3);
        let h = parse_h(&["1"], &d).unwrap();
        let rep = balance_check(&d, &n, &h, 0.1).unwrap();
        assert_eq!(rep.strata.len(), 3);
        for st in &rep.strata {
            let row = &st.rows[0];
            assert!(row.means.iter().all(|&m| m == 1.0), "{:?}", row.means);
            assert_eq!(row.max_abs_diff, 0.0);
        }
        assert_eq!(rep.strata[0].weightings.len(), 4);
        assert_eq!(rep.strata[2].weightings.len(), 3);
    }

    #[test]
    fn affine_rescaling_leaves_differences_unchanged() {
        let (d, n) = synthetic(300, 4);
        let scaled: Vec<f64> = (0..d.len()).map(|i| 3.0 * d.x_row(i)[0] - 7.0).collect();
        let d2 = Dataset::from_columns(d.z().to_vec(), d.s().to_vec(), d.y().to_vec(), scaled, 1).unwrap();
        let h = parse_h(&["x1"], &d).unwrap();
        let a = balance_check(&d, &n, &h, 0.1).unwrap();
        let b = balance_check(&d2, &n, &h, 0.1).unwrap();
        for (sa, sb) in a.strata.iter().zip(&b.strata) {
            for (x, y) in sa.rows[0].std_diff.iter().zip(&sb.rows[0].std_diff) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn default_terms_and_parsing() {
        let (d, _) = synthetic(10, 1);
        let h = default_h(&d);
        assert_eq!(h.len(), 2);
        assert_eq!(h[1].label, "x1^2");
        assert!(parse_h(&["nope"], &d).is_err());
        assert!(parse_h(&["x1^z"], &d).is_err());
        assert!(parse_h(&["x1^3"], &d).is_err());
        assert_eq!(parse_h(&["x1^2"], &d).unwrap()[0].eval(&[3.0]), 9.0);
    }

    #[test]
    fn csv_has_one_line_per_weighting() {
        let (d, n) = synthetic(200, 2);
        let rep = balance_check(&d, &n, &default_h(&d), 0.1).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let lines = String::from_utf8(buf).unwrap().lines().count();
        assert_eq!(lines, 1 + 2 * (4 + 4 + 3));
    }
}
