//! Datasets shared by every estimator.
//!
//! [`ObservationalDataset`] holds `(X, D, Y)` triples for treatment-effect
//! work; [`TwoSampleDataset`] holds a denominator sample (`de`, drawn from
//! `p_de`) and a numerator sample (`nu`, drawn from `p_nu`) for density-ratio
//! estimation of `r₀ = p_nu / p_de`. Both are immutable once validated.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of sample points, `n` rows by `d` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Shape("covariate dimension must be at least 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::Shape(format!(
                "expected {} values for {n}x{d} samples, got {}",
                n * d,
                data.len()
            )));
        }
        Ok(Samples { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {d}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Samples::from_flat(rows.len(), d, data)
    }

    /// One-dimensional samples from a slice of scalars.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Samples::from_flat(values.len(), 1, values.to_vec())
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `idx`, in the given order.
    pub fn select(&self, idx: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Samples { n: idx.len(), d: self.d, data }
    }

    /// `self` rows followed by `other` rows.
    pub fn concat(&self, other: &Samples) -> Result<Samples> {
        if self.d != other.d {
            return Err(Error::Shape(format!(
                "cannot stack {}-column and {}-column samples",
                self.d, other.d
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Samples { n: self.n + other.n, d: self.d, data })
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data.iter().position(|v| !v.is_finite()).map(|p| (p / self.d, p % self.d))
    }
}

/// One unvalidated observation as parsed from an external source.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    pub x: Vec<f64>,
    pub d: f64,
    pub y: f64,
}

/// `n` observations `(X_i, D_i, Y_i)` with binary treatment.
///
/// Invariants: `n >= 2`, every entry finite, `D_i ∈ {0, 1}`, and both arms
/// non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDataset {
    x: Samples,
    d_treat: Vec<u8>,
    y: Vec<f64>,
}

impl ObservationalDataset {
    pub fn new(x: Samples, d_treat: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n = x.nrows();
        if d_treat.len() != n || y.len() != n {
            return Err(Error::Shape(format!(
                "x has {n} rows but d has {} and y has {}",
                d_treat.len(),
                y.len()
            )));
        }
        if let Some((row, col)) = x.first_non_finite() {
            return Err(Error::NonFiniteValue { row, column: format!("x{}", col + 1) });
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, column: "y".into() });
        }
        if let Some(row) = d_treat.iter().position(|&d| d > 1) {
            return Err(Error::NonBinaryTreatment { row, value: d_treat[row] as f64 });
        }
        if n < 2 {
            return Err(Error::TooFewRows { needed: 2, got: n });
        }
        for arm in [1u8, 0] {
            if !d_treat.contains(&arm) {
                return Err(Error::EmptyArm { arm });
            }
        }
        Ok(ObservationalDataset { x, d_treat, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Samples {
        &self.x
    }

    pub fn treatment(&self) -> &[u8] {
        &self.d_treat
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }

    pub fn arm_count(&self, arm: u8) -> usize {
        self.d_treat.iter().filter(|&&d| d == arm).count()
    }

    /// Share of treated observations, `p̂₁`.
    pub fn treated_share(&self) -> f64 {
        self.arm_count(1) as f64 / self.len() as f64
    }

    /// Subset of rows without re-checking the arm invariant; used for folds,
    /// where the caller decides how to treat a missing arm.
    pub fn subset_unchecked(&self, idx: &[usize]) -> ObservationalDataset {
        ObservationalDataset {
            x: self.x.select(idx),
            d_treat: idx.iter().map(|&i| self.d_treat[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Copy with the outcome column replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        ObservationalDataset::new(self.x.clone(), self.d_treat.clone(), y)
    }
}

/// Validates parsed rows into an [`ObservationalDataset`].
pub fn validate_observational(raw: &[RawObservation]) -> Result<ObservationalDataset> {
    let d = raw.first().map(|r| r.x.len()).unwrap_or(0);
    let mut x = Vec::with_capacity(raw.len() * d);
    let mut treat = Vec::with_capacity(raw.len());
    let mut y = Vec::with_capacity(raw.len());
    for (row, r) in raw.iter().enumerate() {
        if r.x.len() != d {
            return Err(Error::Shape(format!("row {row} has {} covariates, expected {d}", r.x.len())));
        }
        if let Some(col) = r.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, column: format!("x{}", col + 1) });
        }
        if !r.d.is_finite() {
            return Err(Error::NonFiniteValue { row, column: "d".into() });
        }
        if !r.y.is_finite() {
            return Err(Error::NonFiniteValue { row, column: "y".into() });
        }
        let arm = if r.d == 0.0 {
            0
        } else if r.d == 1.0 {
            1
        } else {
            return Err(Error::NonBinaryTreatment { row, value: r.d });
        };
        x.extend_from_slice(&r.x);
        treat.push(arm);
        y.push(r.y);
    }
    if raw.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: raw.len() });
    }
    ObservationalDataset::new(Samples::from_flat(raw.len(), d, x)?, treat, y)
}

/// Denominator sample `de ~ p_de` and numerator sample `nu ~ p_nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleDataset {
    de: Samples,
    nu: Samples,
}

impl TwoSampleDataset {
    pub fn new(de: Samples, nu: Samples) -> Result<Self> {
        if de.nrows() == 0 || nu.nrows() == 0 {
            return Err(Error::TooFewRows { needed: 1, got: de.nrows().min(nu.nrows()) });
        }
        if de.ncols() != nu.ncols() {
            return Err(Error::Shape(format!(
                "de has {} columns, nu has {}",
                de.ncols(),
                nu.ncols()
            )));
        }
        if let Some((row, col)) = de.first_non_finite() {
            return Err(Error::NonFiniteValue { row, column: format!("de.x{}", col + 1) });
        }
        if let Some((row, col)) = nu.first_non_finite() {
            return Err(Error::NonFiniteValue { row, column: format!("nu.x{}", col + 1) });
        }
        Ok(TwoSampleDataset { de, nu })
    }

    pub fn de(&self) -> &Samples {
        &self.de
    }

    pub fn nu(&self) -> &Samples {
        &self.nu
    }

    pub fn n_de(&self) -> usize {
        self.de.nrows()
    }

    pub fn n_nu(&self) -> usize {
        self.nu.nrows()
    }

    pub fn dim(&self) -> usize {
        self.de.ncols()
    }

    /// `de` rows followed by `nu` rows.
    pub fn pooled(&self) -> Samples {
        self.de.concat(&self.nu).expect("column counts checked at construction")
    }
}

/// Builds the sample pair whose density ratio is `r₀(arm, ·)`: the numerator
/// is every covariate row (`p_X`) and the denominator the rows with `D = arm`
/// (`p_{D,X}(arm, ·)` up to normalization).
pub fn split_two_sample_for_ate(data: &ObservationalDataset, arm: u8) -> Result<TwoSampleDataset> {
    let idx: Vec<usize> = (0..data.len()).filter(|&i| data.treatment()[i] == arm).collect();
    if idx.is_empty() {
        return Err(Error::EmptyArm { arm });
    }
    TwoSampleDataset::new(data.x().select(&idx), data.x().clone())
}

/// Partition of `0..n` into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_id: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_ids(&self) -> &[usize] {
        &self.fold_id
    }

    pub fn fold(&self, f: usize) -> Vec<usize> {
        (0..self.fold_id.len()).filter(|&i| self.fold_id[i] == f).collect()
    }

    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold_id.len()).filter(|&i| self.fold_id[i] != f).collect()
    }
}

/// Seeded shuffle followed by round-robin assignment, so fold sizes differ by
/// at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::BadFoldCount { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_id = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_id[i] = pos % k;
    }
    Ok(FoldAssignment { fold_id, k })
}

fn covariate_columns(headers: &csv::StringRecord) -> Result<Vec<usize>> {
    let mut cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, h)| {
            let h = h.trim();
            h.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()).map(|j| (j, pos))
        })
        .collect();
    cols.sort();
    if cols.is_empty() {
        return Err(Error::Shape("no covariate columns x1..xd in header".into()));
    }
    for (expect, &(j, _)) in (1..).zip(cols.iter()) {
        if j != expect {
            return Err(Error::Shape(format!("covariate columns must be x1..xd, missing x{expect}")));
        }
    }
    Ok(cols.into_iter().map(|(_, pos)| pos).collect())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Shape(format!("missing column `{name}`")))
}

fn parse_field(rec: &csv::StringRecord, pos: usize, row: usize, name: &str) -> Result<f64> {
    let text = rec.get(pos).unwrap_or("").trim();
    text.parse::<f64>().map_err(|_| Error::Parse { row, column: name.into(), text: text.into() })
}

/// Reads `x1..xd, d, y` columns (any order, header required).
pub fn read_observational_csv<R: Read>(reader: R) -> Result<ObservationalDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let xcols = covariate_columns(&headers)?;
    let dcol = column(&headers, "d")?;
    let ycol = column(&headers, "y")?;
    let mut raw = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let x = xcols
            .iter()
            .enumerate()
            .map(|(j, &pos)| parse_field(&rec, pos, row, &format!("x{}", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        raw.push(RawObservation {
            x,
            d: parse_field(&rec, dcol, row, "d")?,
            y: parse_field(&rec, ycol, row, "y")?,
        });
    }
    validate_observational(&raw)
}

pub fn write_observational_csv<W: Write>(data: &ObservationalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("d".into());
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.x().row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(data.treatment()[i].to_string());
        rec.push(format!("{:?}", data.outcome()[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `x1..xd, sample` columns where `sample` is `de` or `nu`.
pub fn read_two_sample_csv<R: Read>(reader: R) -> Result<TwoSampleDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let xcols = covariate_columns(&headers)?;
    let scol = column(&headers, "sample")?;
    let d = xcols.len();
    let (mut de, mut nu) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let target = match rec.get(scol).unwrap_or("").trim() {
            "de" => &mut de,
            "nu" => &mut nu,
            other => {
                return Err(Error::Parse { row, column: "sample".into(), text: other.into() })
            }
        };
        for (j, &pos) in xcols.iter().enumerate() {
            let v = parse_field(&rec, pos, row, &format!("x{}", j + 1))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row, column: format!("x{}", j + 1) });
            }
            target.push(v);
        }
    }
    let (n_de, n_nu) = (de.len() / d, nu.len() / d);
    TwoSampleDataset::new(Samples::from_flat(n_de, d, de)?, Samples::from_flat(n_nu, d, nu)?)
}

pub fn write_two_sample_csv<W: Write>(data: &TwoSampleDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("sample".into());
    w.write_record(&header)?;
    for (label, s) in [("de", data.de()), ("nu", data.nu())] {
        for row in s.rows() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.into());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(d: &[f64]) -> Vec<RawObservation> {
        d.iter()
            .enumerate()
            .map(|(i, &d)| RawObservation { x: vec![i as f64], d, y: 1.0 })
            .collect()
    }

    #[test]
    fn validates_well_formed_rows() {
        let data = validate_observational(&raw(&[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(data.len(), 4);
        assert_eq!(data.treatment(), &[1, 0, 1, 0]);
    }

    #[test]
    fn rejects_non_binary_treatment() {
        let err = validate_observational(&raw(&[1.0, 2.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonBinaryTreatment { row: 1, value } if value == 2.0));
    }

    #[test]
    fn rejects_single_arm() {
        let err = validate_observational(&raw(&[1.0, 1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::EmptyArm { arm: 0 }));
    }

    #[test]
    fn rejects_non_finite() {
        let mut rows = raw(&[1.0, 0.0, 1.0]);
        rows[2].y = f64::NAN;
        let err = validate_observational(&rows).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 2, ref column } if column == "y"));
        rows[2].y = 0.0;
        rows[1].x[0] = f64::INFINITY;
        let err = validate_observational(&rows).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 1, ref column } if column == "x1"));
    }

    #[test]
    fn two_sample_split_counts() {
        let data = validate_observational(&raw(&[1.0, 0.0, 1.0, 0.0])).unwrap();
        let s1 = split_two_sample_for_ate(&data, 1).unwrap();
        assert_eq!((s1.n_nu(), s1.n_de()), (4, 2));
        let s0 = split_two_sample_for_ate(&data, 0).unwrap();
        assert_eq!(s0.n_de(), 2);

        let mut both: Vec<f64> = s1.de().as_flat().iter().chain(s0.de().as_flat()).copied().collect();
        both.sort_by(f64::total_cmp);
        assert_eq!(both, data.x().as_flat());
    }

    #[test]
    fn two_sample_split_empty_arm() {
        // Built directly: the validated type cannot hold a single-arm sample.
        let data = ObservationalDataset {
            x: Samples::from_column(&[0.0, 1.0]).unwrap(),
            d_treat: vec![1, 1],
            y: vec![0.0, 0.0],
        };
        assert!(matches!(split_two_sample_for_ate(&data, 0), Err(Error::EmptyArm { arm: 0 })));
    }

    #[test]
    fn folds_are_balanced() {
        let f = make_folds(10, 2, 7).unwrap();
        assert_eq!(f.fold(0).len(), 5);
        assert_eq!(f.fold(1).len(), 5);
        let f = make_folds(5, 2, 7).unwrap();
        let mut sizes = vec![f.fold(0).len(), f.fold(1).len()];
        sizes.sort();
        assert_eq!(sizes, vec![2, 3]);
        assert!(matches!(make_folds(3, 5, 0), Err(Error::BadFoldCount { n: 3, k: 5 })));
        assert!(matches!(make_folds(3, 1, 0), Err(Error::BadFoldCount { .. })));
    }

    #[test]
    fn folds_depend_only_on_inputs() {
        assert_eq!(make_folds(50, 5, 11).unwrap(), make_folds(50, 5, 11).unwrap());
        assert_ne!(make_folds(50, 5, 11).unwrap(), make_folds(50, 5, 12).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let text = "x1,x2,d,y\n0.5,1,1,2.0\n-1,2,0,3.5\n0,0,1,-1\n";
        let data = read_observational_csv(text.as_bytes()).unwrap();
        assert_eq!(data.dim(), 2);
        assert_eq!(data.x().row(1), &[-1.0, 2.0]);
        let mut buf = Vec::new();
        write_observational_csv(&data, &mut buf).unwrap();
        assert_eq!(read_observational_csv(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn csv_rejects_garbage() {
        let text = "x1,d,y\n0.5,1,abc\n";
        assert!(matches!(read_observational_csv(text.as_bytes()), Err(Error::Parse { row: 0, .. })));
        let text = "x1,y\n0.5,1\n";
        assert!(matches!(read_observational_csv(text.as_bytes()), Err(Error::Shape(_))));
    }

    #[test]
    fn two_sample_csv() {
        let text = "x1,sample\n0.1,de\n0.2,nu\n0.3,nu\n";
        let data = read_two_sample_csv(text.as_bytes()).unwrap();
        assert_eq!((data.n_de(), data.n_nu()), (1, 2));
        let mut buf = Vec::new();
        write_two_sample_csv(&data, &mut buf).unwrap();
        assert_eq!(read_two_sample_csv(buf.as_slice()).unwrap(), data);
        let bad = "x1,sample\n0.1,foo\n";
        assert!(read_two_sample_csv(bad.as_bytes()).is_err());
    }
}
