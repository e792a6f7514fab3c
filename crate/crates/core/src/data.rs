//! Observed-data records, principal-stratum algebra and input validation.
//!
//! A [`Dataset`] holds `n` units `(Z, S, Y, X)` with binary treatment `Z`,
//! binary intermediate variable `S`, real outcome `Y` and a covariate vector
//! of fixed length `k`. Storage is columnar; covariates are row-major.

use std::cmp::Ordering;
use std::fmt;
use std::io::Read;
use std::ops::{Index, IndexMut};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// A single observed unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub z: u8,
    pub s: u8,
    pub y: f64,
    pub x: Vec<f64>,
}

impl Unit {
    pub fn new(z: u8, s: u8, y: f64, x: Vec<f64>) -> Self {
        Unit { z, s, y, x }
    }
}

/// Principal strata that survive monotonicity. `01` is ruled out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Stratum {
    /// Compliers, `S_1 = 1, S_0 = 0`.
    S10,
    /// Never-takers, `S_1 = S_0 = 0`.
    S00,
    /// Always-takers, `S_1 = S_0 = 1`.
    S11,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::S10, Stratum::S00, Stratum::S11];

    pub fn label(self) -> &'static str {
        match self {
            Stratum::S10 => "10",
            Stratum::S00 => "00",
            Stratum::S11 => "11",
        }
    }

    fn index(self) -> usize {
        match self {
            Stratum::S10 => 0,
            Stratum::S00 => 1,
            Stratum::S11 => 2,
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A value per principal stratum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StratumMap<T> {
    #[serde(rename = "10")]
    pub s10: T,
    #[serde(rename = "00")]
    pub s00: T,
    #[serde(rename = "11")]
    pub s11: T,
}

impl<T> StratumMap<T> {
    pub fn new(s10: T, s00: T, s11: T) -> Self {
        StratumMap { s10, s00, s11 }
    }

    pub fn from_fn(mut f: impl FnMut(Stratum) -> T) -> Self {
        StratumMap { s10: f(Stratum::S10), s00: f(Stratum::S00), s11: f(Stratum::S11) }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Stratum, &T) -> U) -> StratumMap<U> {
        StratumMap::from_fn(|u| f(u, &self[u]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stratum, &T)> {
        Stratum::ALL.into_iter().map(move |u| (u, &self[u]))
    }
}

impl<T> Index<Stratum> for StratumMap<T> {
    type Output = T;
    fn index(&self, u: Stratum) -> &T {
        match u.index() {
            0 => &self.s10,
            1 => &self.s00,
            _ => &self.s11,
        }
    }
}

impl<T> IndexMut<Stratum> for StratumMap<T> {
    fn index_mut(&mut self, u: Stratum) -> &mut T {
        match u.index() {
            0 => &mut self.s10,
            1 => &mut self.s00,
            _ => &mut self.s11,
        }
    }
}

/// Immutable collection of units sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: Vec<u8>,
    s: Vec<u8>,
    y: Vec<f64>,
    x: Vec<f64>,
    k: usize,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, rejecting non-binary `z`/`s`, non-finite values and
    /// ragged covariate vectors.
    pub fn from_units(units: &[Unit]) -> Result<Self> {
        let first = units.first().ok_or(Error::EmptyDataset)?;
        let k = first.x.len();
        let n = units.len();
        let mut z = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * k);
        for (row, u) in units.iter().enumerate() {
            if u.z > 1 {
                return Err(Error::NonBinaryTreatment { row, value: u.z as f64 });
            }
            if u.s > 1 {
                return Err(Error::NonBinaryIntermediate { row, value: u.s as f64 });
            }
            if u.x.len() != k {
                return Err(Error::InconsistentCovariateDim { row, expected: k, found: u.x.len() });
            }
            if !u.y.is_finite() {
                return Err(Error::Parse { row, column: "y".into(), message: "non-finite outcome".into() });
            }
            if let Some(j) = u.x.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row,
                    column: format!("x{}", j + 1),
                    message: "non-finite covariate".into(),
                });
            }
            z.push(u.z);
            s.push(u.s);
            y.push(u.y);
            x.extend_from_slice(&u.x);
        }
        let names = (1..=k).map(|j| format!("x{j}")).collect();
        Ok(Dataset { z, s, y, x, k, names })
    }

    /// Builds a dataset from columns. `x` is row-major with `k` entries per unit.
    pub fn from_columns(z: Vec<u8>, s: Vec<u8>, y: Vec<f64>, x: Vec<f64>, k: usize) -> Result<Self> {
        let n = z.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if s.len() != n || y.len() != n || x.len() != n * k {
            return Err(Error::InvalidConfig("column lengths disagree".into()));
        }
        if let Some(row) = z.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryTreatment { row, value: z[row] as f64 });
        }
        if let Some(row) = s.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryIntermediate { row, value: s[row] as f64 });
        }
        let names = (1..=k).map(|j| format!("x{j}")).collect();
        Ok(Dataset { z, s, y, x, k, names })
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k {
            return Err(Error::InvalidConfig(format!("{} covariate names for dimension {}", names.len(), self.k)));
        }
        self.names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Covariate dimension.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn s(&self) -> &[u8] {
        &self.s
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Covariate row of unit `i`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    pub fn x_col(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x[i * self.k + j])
    }

    pub fn unit(&self, i: usize) -> Unit {
        Unit { z: self.z[i], s: self.s[i], y: self.y[i], x: self.x_row(i).to_vec() }
    }

    /// Same dataset with the outcome replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(Error::InvalidConfig("outcome length mismatch".into()));
        }
        Ok(Dataset { y, ..self.clone() })
    }

    /// Dataset made of the units at `indices`, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> Self {
        let k = self.k;
        let mut x = Vec::with_capacity(indices.len() * k);
        for &i in indices {
            x.extend_from_slice(self.x_row(i));
        }
        Dataset {
            z: indices.iter().map(|&i| self.z[i]).collect(),
            s: indices.iter().map(|&i| self.s[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            x,
            k,
            names: self.names.clone(),
        }
    }

    /// Rows sorted by `(z, s, y, x)` under the IEEE total order, so that any
    /// permutation of the input maps to the same dataset.
    pub fn canonical(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.z[a].cmp(&self.z[b]).then(self.s[a].cmp(&self.s[b])).then(self.y[a].total_cmp(&self.y[b])).then_with(
                || {
                    self.x_row(a)
                        .iter()
                        .zip(self.x_row(b))
                        .map(|(p, q)| p.total_cmp(q))
                        .find(|o| *o != Ordering::Equal)
                        .unwrap_or(Ordering::Equal)
                },
            )
        });
        self.select(&order)
    }

    /// Number of units in observed cell `(Z = z, S = s)`.
    pub fn cell_count(&self, z: u8, s: u8) -> usize {
        self.z.iter().zip(&self.s).filter(|(&a, &b)| a == z && b == s).count()
    }
}

/// Summary produced by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub n_treated: usize,
    /// `cell_counts[z][s]`.
    pub cell_counts: [[usize; 2]; 2],
    pub k: usize,
    pub empty_arm: bool,
    pub empty_cells: Vec<(u8, u8)>,
    /// Zero-based indices of covariates with no variation.
    pub constant_columns: Vec<usize>,
}

pub fn validate(data: &Dataset) -> Result<ValidationReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cell_counts = [[0usize; 2]; 2];
    for (&z, &s) in data.z().iter().zip(data.s()) {
        if z > 1 {
            return Err(Error::NonBinaryTreatment { row: 0, value: z as f64 });
        }
        if s > 1 {
            return Err(Error::NonBinaryIntermediate { row: 0, value: s as f64 });
        }
        cell_counts[z as usize][s as usize] += 1;
    }
    let n_treated = cell_counts[1][0] + cell_counts[1][1];
    let empty_cells = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)]
        .into_iter()
        .filter(|&(z, s)| cell_counts[z as usize][s as usize] == 0)
        .collect();
    let constant_columns = (0..data.k())
        .filter(|&j| {
            let first = data.x_row(0)[j];
            data.x_col(j).all(|v| v == first)
        })
        .collect();
    Ok(ValidationReport {
        n: data.len(),
        n_treated,
        cell_counts,
        k: data.k(),
        empty_arm: n_treated == 0 || n_treated == data.len(),
        empty_cells,
        constant_columns,
    })
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone)]
pub struct ColumnRoles {
    pub z: String,
    pub s: String,
    pub y: String,
    /// Covariate columns; `None` means every remaining column, in header order.
    pub x: Option<Vec<String>>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        ColumnRoles { z: "z".into(), s: "s".into(), y: "y".into(), x: None }
    }
}

pub fn read_csv_path(path: &Path, roles: &ColumnRoles) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, roles)
}

/// Parses a headed CSV. Row numbers in errors are 1-based data rows.
pub fn read_csv<R: Read>(reader: R, roles: &ColumnRoles) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> =
        rdr.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("column '{name}' not found in header")))
    };
    let zi = find(&roles.z)?;
    let si = find(&roles.s)?;
    let yi = find(&roles.y)?;
    let xnames: Vec<String> = match &roles.x {
        Some(names) => names.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != zi && *i != si && *i != yi)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let xi: Vec<usize> = xnames.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut units = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        let field = |i: usize| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Parse { row, column: headers[i].clone(), message: "missing value".into() });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: headers[i].clone(),
                message: format!("cannot parse '{raw}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, column: headers[i].clone(), message: "non-finite value".into() });
            }
            Ok(v)
        };
        let z = field(zi)?;
        if z != 0.0 && z != 1.0 {
            return Err(Error::NonBinaryTreatment { row, value: z });
        }
        let s = field(si)?;
        if s != 0.0 && s != 1.0 {
            return Err(Error::NonBinaryIntermediate { row, value: s });
        }
        let y = field(yi)?;
        let x = xi.iter().map(|&i| field(i)).collect::<Result<Vec<_>>>()?;
        units.push(Unit::new(z as u8, s as u8, y, x));
    }
    Dataset::from_units(&units)?.with_covariate_names(xnames)
}

/// Fitted principal scores `p_1(X)`, `p_0(X)` per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalScores {
    pub p1: Vec<f64>,
    pub p0: Vec<f64>,
}

impl PrincipalScores {
    pub fn new(p1: Vec<f64>, p0: Vec<f64>) -> Result<Self> {
        if p1.len() != p0.len() {
            return Err(Error::InvalidConfig("principal score lengths disagree".into()));
        }
        for (i, &v) in p1.iter().chain(&p0).enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("principal score {v} at position {i} outside [0, 1]")));
            }
        }
        Ok(PrincipalScores { p1, p0 })
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }
}

/// Per-unit stratum probabilities `e_u(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumScores {
    pub e10: Vec<f64>,
    pub e00: Vec<f64>,
    pub e11: Vec<f64>,
    /// Units with `p_1(X) < p_0(X)`, i.e. negative `e_10(X)`.
    pub monotonicity_violations: Vec<usize>,
}

impl StratumScores {
    pub fn warnings(&self) -> Vec<String> {
        if self.monotonicity_violations.is_empty() {
            Vec::new()
        } else {
            vec![format!(
                "fitted principal scores violate monotonicity (p1 < p0) for {} units",
                self.monotonicity_violations.len()
            )]
        }
    }
}

/// `e_10 = p_1 - p_0`, `e_00 = 1 - p_1`, `e_11 = p_0`. Negative `e_10` is kept
/// and reported.
pub fn strata_from_scores(ps: &PrincipalScores) -> StratumScores {
    let n = ps.len();
    let mut out = StratumScores {
        e10: Vec::with_capacity(n),
        e00: Vec::with_capacity(n),
        e11: Vec::with_capacity(n),
        monotonicity_violations: Vec::new(),
    };
    for (i, (&p1, &p0)) in ps.p1.iter().zip(&ps.p0).enumerate() {
        let e10 = p1 - p0;
        if e10 < 0.0 {
            out.monotonicity_violations.push(i);
        }
        out.e10.push(e10);
        out.e00.push(1.0 - p1);
        out.e11.push(p0);
    }
    out
}

/// Clamps `e_10(X)` at zero and renormalizes the remaining two strata, then
/// maps back to `(p_1, p_0)`. Units satisfying monotonicity are unchanged.
pub fn truncate_scores(ps: &PrincipalScores) -> PrincipalScores {
    let (p1, p0) = ps
        .p1
        .iter()
        .zip(&ps.p0)
        .map(|(&p1, &p0)| {
            if p1 >= p0 {
                (p1, p0)
            } else {
                let e11 = p0 / (1.0 - p1 + p0);
                (e11, e11)
            }
        })
        .unzip();
    PrincipalScores { p1, p0 }
}

/// How `p_1 = E(S_1)` and `p_0 = E(S_0)` are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMode {
    /// Sample means of the fitted principal scores.
    Plugin,
    /// Augmented inverse-probability-weighted means.
    #[default]
    DoublyRobust,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalProportions {
    pub p1: f64,
    pub p0: f64,
    pub e10: f64,
    pub e00: f64,
    pub e11: f64,
}

impl MarginalProportions {
    fn from_p(p1: f64, p0: f64) -> Self {
        MarginalProportions { p1, p0, e10: p1 - p0, e00: 1.0 - p1, e11: p0 }
    }

    pub fn as_map(&self) -> StratumMap<f64> {
        StratumMap::new(self.e10, self.e00, self.e11)
    }
}

pub fn marginal_proportions(
    ps: &PrincipalScores,
    mode: MarginalMode,
    pi: &[f64],
    data: &Dataset,
) -> Result<MarginalProportions> {
    let n = data.len() as f64;
    match mode {
        MarginalMode::Plugin => {
            let p1 = ps.p1.iter().sum::<f64>() / n;
            let p0 = ps.p0.iter().sum::<f64>() / n;
            Ok(MarginalProportions::from_p(p1, p0))
        }
        MarginalMode::DoublyRobust => {
            check_positivity(pi)?;
            let mut a1 = 0.0;
            let mut a0 = 0.0;
            for i in 0..data.len() {
                let s = data.s[i] as f64;
                let (p1, p0) = (ps.p1[i], ps.p0[i]);
                if data.z[i] == 1 {
                    a1 += (s - p1) / pi[i] + p1;
                    a0 += p0;
                } else {
                    a1 += p1;
                    a0 += (s - p0) / (1.0 - pi[i]) + p0;
                }
            }
            Ok(MarginalProportions::from_p(a1 / n, a0 / n))
        }
    }
}

pub(crate) fn check_positivity(pi: &[f64]) -> Result<()> {
    match pi.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        Some(unit) => Err(Error::PositivityViolation { unit, value: pi[unit] }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_cells() -> Vec<Unit> {
        vec![
            Unit::new(0, 0, 1.0, vec![0.1, 1.0]),
            Unit::new(0, 1, 2.0, vec![0.2, 1.0]),
            Unit::new(1, 0, 3.0, vec![0.3, 1.0]),
            Unit::new(1, 1, 4.0, vec![0.4, 1.0]),
        ]
    }

    #[test]
    fn validate_counts_every_cell() {
        let data = Dataset::from_units(&four_cells()).unwrap();
        let report = validate(&data).unwrap();
        assert_eq!(report.n, 4);
        assert_eq!(report.n_treated, 2);
        assert_eq!(report.cell_counts, [[1, 1], [1, 1]]);
        assert!(report.empty_cells.is_empty());
        assert!(!report.empty_arm);
        assert_eq!(report.constant_columns, vec![1]);
    }

    #[test]
    fn rejects_non_binary_treatment() {
        let mut units = four_cells();
        units[2].z = 2;
        assert!(matches!(Dataset::from_units(&units), Err(Error::NonBinaryTreatment { row: 2, .. })));
    }

    #[test]
    fn rejects_ragged_covariates() {
        let units = vec![Unit::new(0, 0, 1.0, vec![0.0; 3]), Unit::new(1, 0, 1.0, vec![0.0; 4])];
        assert!(matches!(
            Dataset::from_units(&units),
            Err(Error::InconsistentCovariateDim { row: 1, expected: 3, found: 4 })
        ));
    }

    #[test]
    fn rejects_empty() {
        assert_eq!(Dataset::from_units(&[]), Err(Error::EmptyDataset));
    }

    #[test]
    fn reports_empty_arm() {
        let units = vec![Unit::new(1, 0, 1.0, vec![]), Unit::new(1, 1, 1.0, vec![])];
        let report = validate(&Dataset::from_units(&units).unwrap()).unwrap();
        assert!(report.empty_arm);
        assert_eq!(report.empty_cells, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn strata_identities() {
        let ps = PrincipalScores::new(vec![0.7, 0.5, 0.3], vec![0.2, 0.5, 0.4]).unwrap();
        let e = strata_from_scores(&ps);
        assert!((e.e10[0] - 0.5).abs() < 1e-15 && (e.e00[0] - 0.3).abs() < 1e-15 && e.e11[0] == 0.2);
        assert_eq!((e.e10[1], e.e00[1], e.e11[1]), (0.0, 0.5, 0.5));
        assert!((e.e10[2] + 0.1).abs() < 1e-15 && (e.e00[2] - 0.7).abs() < 1e-15 && e.e11[2] == 0.4);
        assert_eq!(e.monotonicity_violations, vec![2]);
        assert_eq!(e.warnings().len(), 1);
    }

    #[test]
    fn truncation_clamps_only_violations() {
        let ps = PrincipalScores::new(vec![0.7, 0.3], vec![0.2, 0.4]).unwrap();
        let t = truncate_scores(&ps);
        assert_eq!((t.p1[0], t.p0[0]), (0.7, 0.2));
        let e = strata_from_scores(&t);
        assert_eq!(e.e10[1], 0.0);
        assert!((e.e00[1] - 0.7 / 1.1).abs() < 1e-15);
        assert!((e.e11[1] - 0.4 / 1.1).abs() < 1e-15);
        assert!((e.e10[1] + e.e00[1] + e.e11[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn plugin_proportions_of_constant_scores() {
        let data = Dataset::from_units(&four_cells()).unwrap();
        let ps = PrincipalScores::new(vec![0.7; 4], vec![0.2; 4]).unwrap();
        let m = marginal_proportions(&ps, MarginalMode::Plugin, &[0.5; 4], &data).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
        assert!(close(m.p1, 0.7) && close(m.p0, 0.2) && close(m.e10, 0.5) && close(m.e00, 0.3) && close(m.e11, 0.2));
    }

    #[test]
    fn doubly_robust_with_saturated_scores_is_arm_mean() {
        let data = Dataset::from_columns(vec![1, 1, 1, 1, 0, 0, 0], vec![1, 0, 1, 1, 0, 1, 0], vec![0.0; 7], vec![], 0)
            .unwrap();
        let p1 = vec![0.75; 7];
        let p0 = vec![1.0 / 3.0; 7];
        let ps = PrincipalScores::new(p1, p0).unwrap();
        let pi = vec![4.0 / 7.0; 7];
        let dr = marginal_proportions(&ps, MarginalMode::DoublyRobust, &pi, &data).unwrap();
        let plug = marginal_proportions(&ps, MarginalMode::Plugin, &pi, &data).unwrap();
        assert!((dr.p1 - 0.75).abs() < 1e-14);
        assert!((dr.p0 - 1.0 / 3.0).abs() < 1e-14);
        assert!((dr.p1 - plug.p1).abs() < 1e-14 && (dr.p0 - plug.p0).abs() < 1e-14);
    }

    #[test]
    fn doubly_robust_requires_positivity() {
        let data = Dataset::from_units(&four_cells()).unwrap();
        let ps = PrincipalScores::new(vec![0.5; 4], vec![0.5; 4]).unwrap();
        let err = marginal_proportions(&ps, MarginalMode::DoublyRobust, &[0.5, 1.0, 0.5, 0.5], &data);
        assert!(matches!(err, Err(Error::PositivityViolation { unit: 1, .. })));
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let text = "z,s,y,x1,x2\n1,1,2.5,0.1,3\n0,0,-1,0.2,4\n";
        let data = read_csv(text.as_bytes(), &ColumnRoles::default()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.covariate_names(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(data.x_row(1), &[0.2, 4.0]);

        let missing = "z,s,y,x1\n1,1,,0.1\n";
        match read_csv(missing.as_bytes(), &ColumnRoles::default()) {
            Err(Error::Parse { row: 1, column, .. }) => assert_eq!(column, "y"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_z = "z,s,y\n2,0,1\n";
        assert!(matches!(
            read_csv(bad_z.as_bytes(), &ColumnRoles::default()),
            Err(Error::NonBinaryTreatment { row: 1, .. })
        ));
    }

    #[test]
    fn canonical_order_ignores_permutation() {
        let units = four_cells();
        let a = Dataset::from_units(&units).unwrap();
        let mut rev = units.clone();
        rev.reverse();
        let b = Dataset::from_units(&rev).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.canonical(), b.canonical());
    }
}
