//! Datasets: the synthetic cube test functions, CSV ingestion, seeded
//! train/test splits, z-score standardization and error metrics.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scales below this count as a constant feature.
const CONSTANT_SCALE: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthFunction {
    F5,
    F6,
    F7,
}

impl SynthFunction {
    pub fn dim(self) -> usize {
        match self {
            SynthFunction::F5 => 5,
            SynthFunction::F6 => 6,
            SynthFunction::F7 => 7,
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::domain(format!(
                "{self} takes {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(match self {
            SynthFunction::F5 => {
                let s: f64 = x.iter().sum::<f64>() - 0.5;
                (-4.0 * s * s).exp()
            }
            SynthFunction::F6 => {
                let q: f64 = x[..5].iter().map(|v| (v - 0.5).powi(2)).sum();
                (-4.0 * q).exp() + 2.0 * (x[0] - 0.5).abs()
            }
            SynthFunction::F7 => {
                let q: f64 = x.iter().map(|v| (v - 0.5).powi(2)).sum();
                let b: f64 = x[..2].iter().map(|v| (v - 0.3).powi(2)).sum();
                (-q).exp() + (-9.0 * b).exp()
            }
        })
    }
}

impl fmt::Display for SynthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthFunction::F5 => "f5",
            SynthFunction::F6 => "f6",
            SynthFunction::F7 => "f7",
        })
    }
}

impl FromStr for SynthFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f5" => Ok(SynthFunction::F5),
            "f6" => Ok(SynthFunction::F6),
            "f7" => Ok(SynthFunction::F7),
            other => Err(Error::domain(format!("unknown test function '{other}' (f5|f6|f7)"))),
        }
    }
}

pub fn synth_function(which: SynthFunction, x: &[f64]) -> Result<f64> {
    which.eval(x)
}

/// `n` i.i.d. uniform points on `[0, 1]^d`.
pub fn sample_unit_cube(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // row-major draw order so that a prefix of rows does not depend on n
    let mut m = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            m[(i, j)] = rng.gen::<f64>();
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Per-feature and target affine maps `v -> (v - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
    /// Features with zero spread on the training rows; their scale is 1.
    pub constant_features: Vec<usize>,
}

impl Standardization {
    /// Maps standardized target values back to original units.
    pub fn unstandardize_target(&self, v: f64) -> f64 {
        v * self.target_scale + self.target_mean
    }

    pub fn apply_features(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.feature_mean.len() {
            return Err(Error::domain("standardization dimension mismatch"));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.feature_mean[j]) / self.feature_scale[j]
        }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub split: Vec<Split>,
    pub standardization: Option<Standardization>,
    /// Feature column names (without the target).
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Rows dropped during ingestion for non-finite values.
    pub rejected_rows: usize,
}

impl Dataset {
    /// All rows labelled as training rows.
    pub fn new(name: impl Into<String>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::domain(format!("{} inputs but {} targets", x.nrows(), y.len())));
        }
        let d = x.ncols();
        Ok(Dataset {
            name: name.into(),
            split: vec![Split::Train; x.nrows()],
            x,
            y,
            standardization: None,
            feature_names: (1..=d).map(|j| format!("x{j}")).collect(),
            target_name: "y".into(),
            rejected_rows: 0,
        })
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

    fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == which).collect()
    }

    fn part(&self, which: Split) -> (DMatrix<f64>, DVector<f64>) {
        let idx = self.indices(which);
        (self.x.select_rows(&idx), self.y.select_rows(&idx))
    }

    pub fn train(&self) -> (DMatrix<f64>, DVector<f64>) {
        self.part(Split::Train)
    }

    pub fn test(&self) -> (DMatrix<f64>, DVector<f64>) {
        self.part(Split::Test)
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices(Split::Test)
    }
}

/// `n` cube samples with the test function evaluated on them.
pub fn synth_dataset(which: SynthFunction, n: usize, seed: u64) -> Dataset {
    let x = sample_unit_cube(which.dim(), n, seed);
    let y = DVector::from_fn(n, |i, _| {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        which.eval(&row).expect("dimension matches by construction")
    });
    Dataset::new(which.to_string(), x, y).expect("shapes match by construction")
}

/// Reads a headered CSV whose last column is the target. Rows holding a
/// non-finite value are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    parse_csv(&text, name)
}

pub fn parse_csv(text: &str, name: impl Into<String>) -> Result<Dataset> {
    if text.trim().is_empty() {
        return Err(Error::Parse { row: 0, column: 0, message: "empty file".into() });
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 0,
            column: header.len(),
            message: "need at least one feature column and a target column".into(),
        });
    }
    let width = header.len();
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut rejected = 0usize;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse {
                row: r + 1,
                column: rec.len(),
                message: format!("expected {width} fields"),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            row.push(v);
        }
        if row.iter().all(|v| v.is_finite()) {
            values.extend(row);
            rows += 1;
        } else {
            rejected += 1;
        }
    }
    if rows == 0 {
        return Err(Error::Parse { row: 0, column: 0, message: "no usable data rows".into() });
    }
    let all = DMatrix::from_row_slice(rows, width, &values);
    let x = all.columns(0, width - 1).into_owned();
    let y = all.column(width - 1).into_owned();
    let mut ds = Dataset::new(name, x, y)?;
    ds.feature_names = header[..width - 1].to_vec();
    ds.target_name = header[width - 1].clone();
    ds.rejected_rows = rejected;
    Ok(ds)
}

/// Writes features and target with a header row. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, File::create(path)?)
}

/// Seeded split: the first `round(fraction * N)` rows of a random permutation
/// are training rows, the rest test rows.
pub fn train_test_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::domain(format!("train fraction must lie in [0, 1], got {fraction}")));
    }
    let n = ds.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (fraction * n as f64).round() as usize;
    let mut split = vec![Split::Test; n];
    for &i in &perm[..n_train] {
        split[i] = Split::Train;
    }
    Ok(Dataset { split, ..ds.clone() })
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores features and target with statistics of the training rows,
/// applied to every row. Applying it again composes with the stored map.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let train = ds.train_indices();
    if train.is_empty() {
        return Err(Error::domain("cannot standardize without training rows"));
    }
    let d = ds.dim();
    let mut feature_mean = vec![0.0; d];
    let mut feature_scale = vec![1.0; d];
    let mut constant_features = Vec::new();
    for j in 0..d {
        let (m, s) = mean_and_scale(train.iter().map(|&i| ds.x[(i, j)]));
        feature_mean[j] = m;
        if s > CONSTANT_SCALE {
            feature_scale[j] = s;
        } else {
            constant_features.push(j);
        }
    }
    let (ty_mean, ty_scale) = mean_and_scale(train.iter().map(|&i| ds.y[i]));
    let ty_scale = if ty_scale > CONSTANT_SCALE { ty_scale } else { 1.0 };
    let step = Standardization {
        feature_mean,
        feature_scale,
        target_mean: ty_mean,
        target_scale: ty_scale,
        constant_features,
    };
    let x = step.apply_features(&ds.x)?;
    let y = ds.y.map(|v| (v - ty_mean) / ty_scale);
    let composed = match &ds.standardization {
        None => step,
        Some(prev) => Standardization {
            feature_mean: (0..d)
                .map(|j| prev.feature_mean[j] + prev.feature_scale[j] * step.feature_mean[j])
                .collect(),
            feature_scale: (0..d).map(|j| prev.feature_scale[j] * step.feature_scale[j]).collect(),
            target_mean: prev.target_mean + prev.target_scale * step.target_mean,
            target_scale: prev.target_scale * step.target_scale,
            constant_features: prev.constant_features.clone(),
        },
    };
    Ok(Dataset {
        x,
        y,
        standardization: Some(composed),
        ..ds.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub max_abs_error: f64,
}

pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::domain(format!(
            "metrics need equal nonzero lengths, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for (a, b) in y_true.iter().zip(y_pred) {
        let e = a - b;
        sq += e * e;
        max = max.max(e.abs());
    }
    Ok(Metrics {
        mse: sq / y_true.len() as f64,
        max_abs_error: max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn synth_examples() {
        assert_eq!(SynthFunction::F5.eval(&[0.1; 5]).unwrap(), 1.0);
        assert_eq!(SynthFunction::F6.eval(&[0.5; 6]).unwrap(), 1.0);
        assert_relative_eq!(SynthFunction::F7.eval(&[0.5; 7]).unwrap(), 1.0 + (-0.72f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(1.0 + (-0.72f64).exp(), 1.486_752_2, epsilon = 1e-7);
        assert!(SynthFunction::F5.eval(&[0.1; 4]).is_err());
        assert!("f8".parse::<SynthFunction>().is_err());
    }

    #[test]
    fn synth_bounds_on_cube() {
        let x = sample_unit_cube(7, 2000, 1);
        for i in 0..2000 {
            let r: Vec<f64> = x.row(i).iter().copied().collect();
            let f5 = SynthFunction::F5.eval(&r[..5]).unwrap();
            let f6 = SynthFunction::F6.eval(&r[..6]).unwrap();
            let f7 = SynthFunction::F7.eval(&r).unwrap();
            assert!(f5 > 0.0 && f5 <= 1.0);
            assert!(f6 > 0.0 && f6 <= 2.0);
            assert!(f7 > 0.0 && f7 <= 2.0);
        }
    }

    proptest! {
        #[test]
        fn f5_constant_orthogonal_to_ones(
            x in prop::collection::vec(0.0f64..1.0, 5),
            v in prop::collection::vec(-1.0f64..1.0, 5),
        ) {
            let mean = v.iter().sum::<f64>() / 5.0;
            let w: Vec<f64> = v.iter().map(|t| t - mean).collect();
            let shifted: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
            let a = SynthFunction::F5.eval(&x).unwrap();
            let b = SynthFunction::F5.eval(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn csv_round_trip_is_exact(vals in prop::collection::vec(-1e6f64..1e6, 12)) {
            let x = DMatrix::from_row_slice(4, 2, &vals[..8]);
            let y = DVector::from_row_slice(&vals[8..]);
            let ds = Dataset::new("t", x, y).unwrap();
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf).unwrap();
            let back = parse_csv(std::str::from_utf8(&buf).unwrap(), "t").unwrap();
            prop_assert_eq!(back.x, ds.x);
            prop_assert_eq!(back.y, ds.y);
        }
    }

    #[test]
    fn cube_samples() {
        let a = sample_unit_cube(3, 100, 42);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a, sample_unit_cube(3, 100, 42));
        assert_ne!(a, sample_unit_cube(3, 100, 43));
        let big = sample_unit_cube(2, 100_000, 7);
        let tol = 4.0 / (12.0f64 * 100_000.0).sqrt();
        for j in 0..2 {
            assert!((big.column(j).mean() - 0.5).abs() <= tol);
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let ds = synth_dataset(SynthFunction::F5, 10, 0);
        let s = train_test_split(&ds, 0.8, 3).unwrap();
        let tr = s.train_indices();
        let te = s.test_indices();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert_eq!(s, train_test_split(&ds, 0.8, 3).unwrap());
        assert!(train_test_split(&ds, 1.5, 3).is_err());
    }

    #[test]
    fn standardize_train_statistics_and_idempotence() {
        let ds = synth_dataset(SynthFunction::F6, 200, 5);
        let mut ds = train_test_split(&ds, 0.75, 1).unwrap();
        // constant feature
        for i in 0..ds.len() {
            ds.x[(i, 2)] = 3.0;
        }
        let s = standardize(&ds).unwrap();
        let (xt, yt) = s.train();
        for j in 0..6 {
            let (m, sc) = mean_and_scale(xt.column(j).iter().copied());
            assert!(m.abs() <= 1e-10);
            if j == 2 {
                assert_eq!(sc, 0.0);
            } else {
                assert!((sc - 1.0).abs() <= 1e-8);
            }
        }
        assert_eq!(s.standardization.as_ref().unwrap().constant_features, vec![2]);
        let (m, sc) = mean_and_scale(yt.iter().copied());
        assert!(m.abs() <= 1e-10 && (sc - 1.0).abs() <= 1e-8);

        let twice = standardize(&s).unwrap();
        assert!((&twice.x - &s.x).abs().max() <= 1e-12);
        assert!((&twice.y - &s.y).abs().max() <= 1e-12);
        let st = twice.standardization.unwrap();
        assert_relative_eq!(st.unstandardize_target(twice.y[0]), ds.y[0], max_relative = 1e-12);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv("", "e"), Err(Error::Parse { .. })));
        match parse_csv("a,b,y\n1,2,3\n4,x,6\n", "e") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let ds = parse_csv("a,y\n1,2\nnan,3\n4,inf\n5,6\n", "e").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.rejected_rows, 2);
        assert_eq!(ds.feature_names, vec!["a"]);
        assert_eq!(ds.target_name, "y");
        let ds = parse_csv("a,y\n1e-5,2.5E3\n", "e").unwrap();
        assert_eq!(ds.x[(0, 0)], 1e-5);
    }

    #[test]
    fn metric_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(metrics(&a, &a).unwrap(), Metrics { mse: 0.0, max_abs_error: 0.0 });
        assert_eq!(metrics(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), Metrics { mse: 1.0, max_abs_error: 1.0 });
        assert!(metrics(&[1.0], &[]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t: Vec<f64> = (0..100).map(|_| rng.gen()).collect();
        let p: Vec<f64> = (0..100).map(|_| rng.gen()).collect();
        let mut sq = 0.0;
        let mut mx = 0.0f64;
        for i in 0..100 {
            sq += (t[i] - p[i]) * (t[i] - p[i]);
            mx = mx.max((t[i] - p[i]).abs());
        }
        let m = metrics(&t, &p).unwrap();
        assert_relative_eq!(m.mse, sq / 100.0, max_relative = 1e-14);
        assert_eq!(m.max_abs_error, mx);
    }
}
