//! Radial base kernels and Gram matrix assembly.
//!
//! Every kernel is a unit-normalized radial profile `phi(eps * r)` of the
//! Euclidean distance `r`. The Matérn members are the half-integer ones with
//! closed forms, `matern0` being the exponential kernel `exp(-r)`.
//!
//! Point sets are stored row-wise: an `N x d` matrix holds `N` points.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Matern0,
    Matern1,
    Matern2,
    Gaussian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Matern0,
        KernelFamily::Matern1,
        KernelFamily::Matern2,
        KernelFamily::Gaussian,
    ];

    pub fn id(self) -> &'static str {
        match self {
            KernelFamily::Matern0 => "matern0",
            KernelFamily::Matern1 => "matern1",
            KernelFamily::Matern2 => "matern2",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matern0" => Ok(KernelFamily::Matern0),
            "matern1" => Ok(KernelFamily::Matern1),
            "matern2" => Ok(KernelFamily::Matern2),
            "gaussian" => Ok(KernelFamily::Gaussian),
            other => Err(Error::domain(format!(
                "unknown kernel '{other}' (expected matern0|matern1|matern2|gaussian)"
            ))),
        }
    }
}

/// A base radial kernel: family plus a positive length scale that multiplies
/// distances before the profile is applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    length_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, length_scale: f64) -> Result<Self> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::domain(format!(
                "length scale must be positive and finite, got {length_scale}"
            )));
        }
        Ok(KernelSpec {
            family,
            length_scale,
        })
    }

    /// Unit length scale.
    pub fn unit(family: KernelFamily) -> Self {
        KernelSpec {
            family,
            length_scale: 1.0,
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn with_length_scale(&self, length_scale: f64) -> Result<Self> {
        KernelSpec::new(self.family, length_scale)
    }

    /// Order `k` of the Matérn member (`phi = exp(-s) * poly_k(s)`), `None`
    /// for the Gaussian.
    pub fn smoothness_k(&self) -> Option<u32> {
        match self.family {
            KernelFamily::Matern0 => Some(0),
            KernelFamily::Matern1 => Some(1),
            KernelFamily::Matern2 => Some(2),
            KernelFamily::Gaussian => None,
        }
    }

    /// `phi(eps * r)`.
    pub fn eval_phi(&self, r: f64) -> Result<f64> {
        check_distance(r)?;
        Ok(self.phi(r))
    }

    /// `d/dr phi(eps * r)`, chain factor included. For `matern0` the value at
    /// `r = 0` is the one-sided limit `-eps`.
    pub fn eval_phi_radial_derivative(&self, r: f64) -> Result<f64> {
        check_distance(r)?;
        Ok(self.dphi(r))
    }

    /// Unchecked profile evaluation for hot loops; `r` must be finite and
    /// nonnegative.
    #[inline]
    pub(crate) fn phi(&self, r: f64) -> f64 {
        let s = self.length_scale * r;
        match self.family {
            KernelFamily::Matern0 => (-s).exp(),
            KernelFamily::Matern1 => (1.0 + s) * (-s).exp(),
            KernelFamily::Matern2 => (3.0 + s * (3.0 + s)) * (-s).exp() / 3.0,
            KernelFamily::Gaussian => (-s * s).exp(),
        }
    }

    #[inline]
    pub(crate) fn dphi(&self, r: f64) -> f64 {
        let eps = self.length_scale;
        let s = eps * r;
        let ds = match self.family {
            KernelFamily::Matern0 => -(-s).exp(),
            KernelFamily::Matern1 => -s * (-s).exp(),
            KernelFamily::Matern2 => -s * (1.0 + s) * (-s).exp() / 3.0,
            KernelFamily::Gaussian => -2.0 * s * (-s * s).exp(),
        };
        eps * ds
    }

    /// Kernel value between two points given as slices.
    #[inline]
    pub fn eval_points(&self, x: &[f64], y: &[f64]) -> f64 {
        self.phi(euclidean(x, y))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(eps={})", self.family, self.length_scale)
    }
}

fn check_distance(r: f64) -> Result<()> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::domain(format!(
            "distance must be finite and nonnegative, got {r}"
        )));
    }
    Ok(())
}

/// Direct Euclidean norm of the difference; no Gram-trick expansion.
#[inline]
pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Points of a row-wise matrix as owned contiguous rows.
pub fn rows_of(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..points.nrows())
        .map(|i| points.row(i).iter().copied().collect())
        .collect()
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} contains non-finite entries")))
    }
}

/// Kernel matrix with entry `(i, j) = phi(eps * |x_i - y_j|)`.
pub fn gram_matrix(spec: &KernelSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != y.ncols() {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {} columns",
            x.ncols(),
            y.ncols()
        )));
    }
    check_finite(x, "X")?;
    check_finite(y, "Y")?;
    let xr = rows_of(x);
    let yr = rows_of(y);
    Ok(DMatrix::from_fn(xr.len(), yr.len(), |i, j| {
        spec.eval_points(&xr[i], &yr[j])
    }))
}

/// Symmetric kernel matrix of one point set. Each unordered pair is evaluated
/// once and mirrored, so the result is exactly symmetric with unit diagonal.
pub fn gram_symmetric(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(x, "X")?;
    let xr = rows_of(x);
    Ok(gram_symmetric_rows(spec, &xr))
}

pub(crate) fn gram_symmetric_rows(spec: &KernelSpec, xr: &[Vec<f64>]) -> DMatrix<f64> {
    let n = xr.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.phi(0.0);
        for j in 0..i {
            let v = spec.eval_points(&xr[i], &xr[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
