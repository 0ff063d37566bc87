//! The learnable first layer `A` (a `b x d` matrix) of the two-layered kernel
//! `k_A(x, y) = k(Ax, Ay)`, and its spectral diagnostics.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    IdentityInit,
    Optimized,
    Loaded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "LayerFile", try_from = "LayerFile")]
pub struct FirstLayer {
    matrix: DMatrix<f64>,
    provenance: Provenance,
}

/// On-disk form: `{"rows": b, "cols": d, "data": [row-major], "provenance": ".."}`.
#[derive(Clone, Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

impl FirstLayer {
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let (b, d) = matrix.shape();
        if b == 0 || d == 0 {
            return Err(Error::domain("first layer must have at least one row and column"));
        }
        if b > d {
            return Err(Error::domain(format!(
                "first layer must satisfy rows <= cols, got {b}x{d}"
            )));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("first layer contains non-finite entries"));
        }
        Ok(FirstLayer { matrix, provenance })
    }

    /// `I_d`.
    pub fn identity(d: usize) -> Result<Self> {
        Self::scaled_identity(d, d, 1.0)
    }

    /// The first `b` rows of `c * I_d`.
    pub fn scaled_identity(b: usize, d: usize, c: f64) -> Result<Self> {
        let m = DMatrix::from_fn(b, d, |i, j| if i == j { c } else { 0.0 });
        Self::new(m, Provenance::IdentityInit)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Maps every row `x_i` of `x` to `A x_i`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.cols() {
            return Err(Error::domain(format!(
                "layer expects {} input columns, got {}",
                self.cols(),
                x.ncols()
            )));
        }
        Ok(x * self.matrix.transpose())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl From<FirstLayer> for LayerFile {
    fn from(l: FirstLayer) -> Self {
        LayerFile {
            rows: l.rows(),
            cols: l.cols(),
            data: l.matrix.transpose().iter().copied().collect(),
            provenance: l.provenance,
        }
    }
}

impl TryFrom<LayerFile> for FirstLayer {
    type Error = Error;

    fn try_from(file: LayerFile) -> Result<Self> {
        if file.data.len() != file.rows * file.cols {
            return Err(Error::domain(format!(
                "layer data has {} entries, expected {}x{}",
                file.data.len(),
                file.rows,
                file.cols
            )));
        }
        FirstLayer::new(
            DMatrix::from_row_slice(file.rows, file.cols, &file.data),
            file.provenance,
        )
    }
}

/// Kernel matrix of the two-layered kernel between the rows of `x` and `y`.
pub fn two_layer_gram(
    spec: &KernelSpec,
    layer: &FirstLayer,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    gram_matrix(spec, &layer.apply(x)?, &layer.apply(y)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "values", rename_all = "snake_case")]
pub enum CumulativePower {
    Defined(Vec<f64>),
    /// All singular values vanish; the normalization is undefined.
    Degenerate,
}

impl CumulativePower {
    pub fn values(&self) -> Option<&[f64]> {
        match self {
            CumulativePower::Defined(v) => Some(v),
            CumulativePower::Degenerate => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Nonincreasing, length `min(b, d)`.
    pub singular_values: Vec<f64>,
    /// `b x min(b, d)`, orthonormal columns.
    pub left_singular_vectors: DMatrix<f64>,
    /// `d x min(b, d)`, orthonormal columns.
    pub right_singular_vectors: DMatrix<f64>,
    pub cumulative_power: CumulativePower,
    /// Eigenvalues of `A` (square layers only), sorted by decreasing real
    /// part. Reported alongside, never used for the cumulative power.
    pub eigenvalues: Option<Vec<Eigenvalue>>,
}

impl SpectralReport {
    /// `i`-th right singular vector as a plain vector.
    pub fn right_vector(&self, i: usize) -> Vec<f64> {
        self.right_singular_vectors.column(i).iter().copied().collect()
    }

    /// CSV with columns `index,singular_value,cumulative_power` (1-based
    /// index; empty power column for a degenerate layer).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "singular_value", "cumulative_power"])?;
        for (i, s) in self.singular_values.iter().enumerate() {
            let cp = match &self.cumulative_power {
                CumulativePower::Defined(v) => format!("{:e}", v[i]),
                CumulativePower::Degenerate => String::new(),
            };
            w.write_record([(i + 1).to_string(), format!("{s:e}"), cp])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Vectors<'a> {
            singular_values: &'a [f64],
            left_singular_vectors: Vec<Vec<f64>>,
            right_singular_vectors: Vec<Vec<f64>>,
            cumulative_power: &'a CumulativePower,
            eigenvalues: &'a Option<Vec<Eigenvalue>>,
        }
        let cols = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.column_iter().map(|c| c.iter().copied().collect()).collect()
        };
        Ok(serde_json::to_string_pretty(&Vectors {
            singular_values: &self.singular_values,
            left_singular_vectors: cols(&self.left_singular_vectors),
            right_singular_vectors: cols(&self.right_singular_vectors),
            cumulative_power: &self.cumulative_power,
            eigenvalues: &self.eigenvalues,
        })?)
    }
}

/// Normalized partial sums of singular value magnitudes.
pub fn cumulative_power(singular_values: &[f64]) -> CumulativePower {
    let total: f64 = singular_values.iter().map(|s| s.abs()).sum();
    if !(total > 0.0) {
        return CumulativePower::Degenerate;
    }
    let mut acc = 0.0;
    let mut out: Vec<f64> = singular_values
        .iter()
        .map(|s| {
            acc += s.abs();
            acc / total
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    CumulativePower::Defined(out)
}

/// Thin SVD with singular triplets sorted by decreasing singular value.
fn sorted_svd(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("SVD did not converge"))?;
    let u = svd.u.ok_or_else(|| Error::numerical("SVD returned no U"))?;
    let vt = svd.v_t.ok_or_else(|| Error::numerical("SVD returned no V^T"))?;
    let m = svd.singular_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let left = DMatrix::from_fn(u.nrows(), m, |r, c| u[(r, order[c])]);
    let right = DMatrix::from_fn(vt.ncols(), m, |r, c| vt[(order[c], r)]);
    Ok((sv, left, right))
}

pub fn spectral_report(layer: &FirstLayer) -> Result<SpectralReport> {
    let a = layer.matrix();
    let (singular_values, left, right) = sorted_svd(a)?;
    let eigenvalues = if a.is_square() {
        let mut ev: Vec<Eigenvalue> = a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| Eigenvalue { re: z.re, im: z.im })
            .collect();
        ev.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal));
        Some(ev)
    } else {
        None
    };
    Ok(SpectralReport {
        cumulative_power: cumulative_power(&singular_values),
        singular_values,
        left_singular_vectors: left,
        right_singular_vectors: right,
        eigenvalues,
    })
}

/// Principal angles in degrees between the spans of the leading `n` right
/// singular vectors of two layers, sorted nondecreasing.
///
/// `n` is bounded by the number of right singular vectors each layer has,
/// `min(rows, cols)`.
pub fn principal_angles(a: &FirstLayer, b: &FirstLayer, n: usize) -> Result<Vec<f64>> {
    if a.cols() != b.cols() {
        return Err(Error::domain(format!(
            "layers act on different input dimensions ({} vs {})",
            a.cols(),
            b.cols()
        )));
    }
    let limit = a.rows().min(b.rows());
    if n == 0 || n > limit {
        return Err(Error::domain(format!(
            "subspace dimension must be in 1..={limit}, got {n}"
        )));
    }
    let (_, _, va) = sorted_svd(a.matrix())?;
    let (_, _, vb) = sorted_svd(b.matrix())?;
    Ok(subspace_angles(&va.columns(0, n).into_owned(), &vb.columns(0, n).into_owned()))
}

/// Angles (degrees, nondecreasing) between spans of two orthonormal bases.
pub(crate) fn subspace_angles(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Vec<f64> {
    let m = qa.transpose() * qb;
    let mut cos: Vec<f64> = m.singular_values().iter().copied().collect();
    cos.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    cos.into_iter()
        .map(|c| c.clamp(-1.0, 1.0).acos().to_degrees())
        .collect()
}
