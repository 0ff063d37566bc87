//! Matrix-free greedy kernel interpolation in the Newton basis.
//!
//! Centers are picked one at a time from a fixed candidate set. For every
//! candidate the fit keeps the squared power function and the residual, both
//! updated by a rank-one step when a center is added, so no kernel matrix is
//! ever assembled. The kernel may be two-layered (`k(Ax, Ay)`).

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::metrics;
use crate::error::{Error, Result};
use crate::kernels::{euclidean, gram_matrix, rows_of, KernelSpec};
use crate::layer::FirstLayer;

/// Squared powers this far below zero are rounding noise and clamp to zero.
pub const POWER_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    PGreedy,
    FGreedy,
    FOverPGreedy,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::PGreedy => "p_greedy",
            Criterion::FGreedy => "f_greedy",
            Criterion::FOverPGreedy => "f_over_p_greedy",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "p" | "p_greedy" => Ok(Criterion::PGreedy),
            "f" | "f_greedy" => Ok(Criterion::FGreedy),
            "fp" | "f/p" | "f_over_p" | "f_over_p_greedy" | "f/p_greedy" => Ok(Criterion::FOverPGreedy),
            other => Err(Error::domain(format!("unknown greedy criterion '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub criterion: Criterion,
    pub max_centers: usize,
    /// Stop once the selection indicator drops to this value.
    pub residual_tolerance: f64,
    /// Candidates with `p(x) <= floor * k(x, x)` become ineligible.
    pub power_stability_floor: f64,
    /// Diagonal shift of the training Gram matrix.
    pub lambda: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            criterion: Criterion::FGreedy,
            max_centers: 100,
            residual_tolerance: 0.0,
            power_stability_floor: 1e-13,
            lambda: 0.0,
        }
    }
}

/// One greedy iteration, measured over the eligible candidates before the
/// center is added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub selected_index: usize,
    pub indicator: f64,
    pub max_residual: f64,
    pub max_power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyStop {
    MaxCenters,
    Tolerance,
    NoEligibleCandidate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreedyModel {
    pub kernel: KernelSpec,
    pub layer: Option<FirstLayer>,
    pub config: GreedyConfig,
    pub center_indices: Vec<usize>,
    /// `n x d`, original input space.
    pub centers: DMatrix<f64>,
    /// Lower triangular `L` with `L L^T = K(X_n, X_n) + lambda I`; row `i`
    /// holds the Newton basis values at center `i`.
    pub newton_triangle: DMatrix<f64>,
    /// Expansion coefficients in the Newton basis.
    pub newton_coefficients: DVector<f64>,
    /// Expansion coefficients of `s(x) = sum_i alpha_i k(x, x_i)`.
    pub coefficients: DVector<f64>,
    pub trace: Vec<GreedyStep>,
    /// Max absolute training residual after each added center.
    pub residual_after: Vec<f64>,
    pub stop: GreedyStop,
}

fn transformed(layer: Option<&FirstLayer>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match layer {
        Some(l) => l.apply(x),
        None => Ok(x.clone()),
    }
}

/// Greedy fit over the candidate set `x` with targets `f`.
pub fn fit_greedy(
    spec: &KernelSpec,
    layer: Option<&FirstLayer>,
    x: &DMatrix<f64>,
    f: &DVector<f64>,
    config: &GreedyConfig,
) -> Result<GreedyModel> {
    let n_cand = x.nrows();
    if n_cand == 0 {
        return Err(Error::domain("empty candidate set"));
    }
    if f.len() != n_cand {
        return Err(Error::domain(format!("{n_cand} candidates but {} targets", f.len())));
    }
    if !f.iter().chain(x.iter()).all(|v| v.is_finite()) {
        return Err(Error::domain("non-finite candidate or target"));
    }
    if config.max_centers == 0 {
        return Err(Error::domain("max_centers must be at least 1"));
    }
    if !(config.residual_tolerance >= 0.0 && config.power_stability_floor >= 0.0 && config.lambda >= 0.0) {
        return Err(Error::domain("greedy thresholds and lambda must be nonnegative"));
    }
    let z = rows_of(&transformed(layer, x)?);
    let lambda = config.lambda;
    let kdiag = spec.phi(0.0);

    let mut power2 = vec![kdiag + lambda; n_cand];
    let mut residual: Vec<f64> = f.iter().copied().collect();
    let mut eligible = vec![true; n_cand];
    // Newton basis columns v_j evaluated at every candidate.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut selected: Vec<usize> = Vec::new();
    let mut newton_coeffs: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut residual_after = Vec::new();
    let mut stop = GreedyStop::MaxCenters;
    let max_centers = config.max_centers.min(n_cand);

    for step in 0..max_centers {
        let mut best: Option<(usize, f64)> = None;
        let mut max_res = 0.0f64;
        let mut max_pow = 0.0f64;
        for i in 0..n_cand {
            if !eligible[i] {
                continue;
            }
            if power2[i] <= config.power_stability_floor * kdiag {
                eligible[i] = false;
                continue;
            }
            let p = power2[i].sqrt();
            let r = residual[i].abs();
            max_res = max_res.max(r);
            max_pow = max_pow.max(p);
            let eta = match config.criterion {
                Criterion::PGreedy => p,
                Criterion::FGreedy => r,
                Criterion::FOverPGreedy => r / p,
            };
            if best.is_none_or(|(_, b)| eta > b) {
                best = Some((i, eta));
            }
        }
        let Some((sel, eta)) = best else {
            if step == 0 {
                return Err(Error::numerical(
                    "no candidate has power above the stability floor; the kernel is degenerate",
                ));
            }
            stop = GreedyStop::NoEligibleCandidate;
            break;
        };
        if eta <= config.residual_tolerance {
            stop = GreedyStop::Tolerance;
            break;
        }

        let pivot = power2[sel].sqrt();
        let mut column = vec![0.0; n_cand];
        for (i, zi) in z.iter().enumerate() {
            let mut k = spec.eval_points(zi, &z[sel]);
            if i == sel {
                k += lambda;
            }
            for v in &basis {
                k -= v[i] * v[sel];
            }
            column[i] = k / pivot;
        }
        let coeff = residual[sel] / pivot;
        for i in 0..n_cand {
            let p = power2[i] - column[i] * column[i];
            power2[i] = if (-POWER_CLAMP..0.0).contains(&p) { 0.0 } else { p };
            residual[i] -= coeff * column[i];
        }
        power2[sel] = 0.0;
        eligible[sel] = false;
        if !(coeff.is_finite() && column.iter().all(|v| v.is_finite())) {
            return Err(Error::numerical(format!("non-finite Newton update at step {}", step + 1)));
        }
        trace.push(GreedyStep {
            selected_index: sel,
            indicator: eta,
            max_residual: max_res,
            max_power: max_pow,
        });
        selected.push(sel);
        newton_coeffs.push(coeff);
        basis.push(column);
        residual_after.push(residual.iter().fold(0.0f64, |a, r| a.max(r.abs())));
    }

    let n = selected.len();
    let triangle = DMatrix::from_fn(n, n, |i, j| if j <= i { basis[j][selected[i]] } else { 0.0 });
    let newton_coefficients = DVector::from_vec(newton_coeffs);
    let coefficients = triangle
        .transpose()
        .solve_upper_triangular(&newton_coefficients)
        .ok_or_else(|| Error::numerical("singular Newton triangle"))?;
    Ok(GreedyModel {
        kernel: *spec,
        layer: layer.cloned(),
        config: config.clone(),
        centers: x.select_rows(&selected),
        center_indices: selected,
        newton_triangle: triangle,
        newton_coefficients,
        coefficients,
        trace,
        residual_after,
        stop,
    })
}

/// Largest distance from a candidate to its nearest center.
pub fn fill_distance(candidates: &DMatrix<f64>, centers: &DMatrix<f64>) -> Result<f64> {
    if candidates.nrows() == 0 || centers.nrows() == 0 {
        return Err(Error::domain("fill distance needs nonempty candidates and centers"));
    }
    if candidates.ncols() != centers.ncols() {
        return Err(Error::domain("candidates and centers differ in dimension"));
    }
    let c = rows_of(centers);
    Ok(rows_of(candidates)
        .iter()
        .map(|x| c.iter().map(|y| euclidean(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

/// Test error of the model truncated to its first `n_centers` centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n_centers: usize,
    pub train_max_residual: f64,
    pub test_mse: f64,
    pub test_max_error: f64,
}

impl GreedyModel {
    pub fn n_centers(&self) -> usize {
        self.center_indices.len()
    }

    fn check_eval(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.n_centers() == 0 {
            return Err(Error::domain("model has no centers"));
        }
        if x.ncols() != self.centers.ncols() {
            return Err(Error::domain(format!(
                "model expects {} input columns, got {}",
                self.centers.ncols(),
                x.ncols()
            )));
        }
        transformed(self.layer.as_ref(), x)
    }

    fn kernel_to_centers(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let zx = self.check_eval(x)?;
        let zc = transformed(self.layer.as_ref(), &self.centers)?;
        gram_matrix(&self.kernel, &zx, &zc)
    }

    /// Newton basis values `V = K(x, X_n) L^{-T}`, one row per point.
    fn newton_values(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let vt = self
            .newton_triangle
            .solve_lower_triangular(&k.transpose())
            .ok_or_else(|| Error::numerical("singular Newton triangle"))?;
        Ok(vt.transpose())
    }

    /// `s(x) = sum_i alpha_i k(x, x_i)`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.kernel_to_centers(x)? * &self.coefficients)
    }

    /// Same interpolant evaluated through the Newton basis.
    pub fn predict_newton(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let v = self.newton_values(&self.kernel_to_centers(x)?)?;
        Ok(v * &self.newton_coefficients)
    }

    /// Power function `sqrt(k(x, x) - sum_j v_j(x)^2)`.
    pub fn power_values(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let kdiag = self.kernel.phi(0.0);
        let v = self.newton_values(&self.kernel_to_centers(x)?)?;
        Ok(DVector::from_iterator(
            v.nrows(),
            v.row_iter().map(|row| {
                let p2 = kdiag - row.norm_squared();
                if (-POWER_CLAMP..0.0).contains(&p2) {
                    0.0
                } else {
                    p2.max(0.0).sqrt()
                }
            }),
        ))
    }

    /// Error decay over the nested sub-models with `1..=n` centers.
    pub fn error_decay(&self, x_test: &DMatrix<f64>, y_test: &DVector<f64>) -> Result<Vec<DecayRow>> {
        if x_test.nrows() != y_test.len() {
            return Err(Error::domain("test inputs and targets differ in length"));
        }
        let v = self.newton_values(&self.kernel_to_centers(x_test)?)?;
        let mut pred = DVector::zeros(x_test.nrows());
        let mut rows = Vec::with_capacity(self.n_centers());
        for j in 0..self.n_centers() {
            pred.axpy(self.newton_coefficients[j], &v.column(j), 1.0);
            let m = metrics(y_test.as_slice(), pred.as_slice())?;
            rows.push(DecayRow {
                n_centers: j + 1,
                train_max_residual: self.residual_after[j],
                test_mse: m.mse,
                test_max_error: m.max_abs_error,
            });
        }
        Ok(rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// CSV with columns `iteration,selected_index,indicator,max_residual,max_power`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "selected_index", "indicator", "max_residual", "max_power"])?;
        for (i, s) in self.trace.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                s.selected_index.to_string(),
                format!("{:e}", s.indicator),
                format!("{:e}", s.max_residual),
                format!("{:e}", s.max_power),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `log(test_max_error)` against `log(n_centers)` over
/// the rows with `lo <= n_centers <= hi`.
pub fn decay_slope(rows: &[DecayRow], lo: usize, hi: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| (lo..=hi).contains(&r.n_centers) && r.test_max_error > 0.0)
        .map(|r| ((r.n_centers as f64).ln(), r.test_max_error.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::domain(format!("need at least two decay rows in {lo}..={hi}")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// CSV with columns `n_centers,train_max_residual,test_mse,test_max_error`.
pub fn write_decay_csv<W: Write>(rows: &[DecayRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_centers", "train_max_residual", "test_mse", "test_max_error"])?;
    for r in rows {
        w.write_record([
            r.n_centers.to_string(),
            format!("{:e}", r.train_max_residual),
            format!("{:e}", r.test_mse),
            format!("{:e}", r.test_max_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::layer::{two_layer_gram, Provenance};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>());
        let f = DVector::from_fn(n, |i, _| (3.0 * x[(i, 0)]).sin() + x.row(i).sum());
        (x, f)
    }

    fn cfg(criterion: Criterion, max_centers: usize) -> GreedyConfig {
        GreedyConfig { criterion, max_centers, ..Default::default() }
    }

    #[test]
    fn f_greedy_starts_at_largest_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, f) = cloud(&mut rng, 30, 2);
        let m = fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), None, &x, &f, &cfg(Criterion::FGreedy, 3)).unwrap();
        let argmax = f.iamax();
        assert_eq!(m.center_indices[0], argmax);
        assert_eq!(m.trace[0].indicator, f[argmax].abs());
        for s in &m.trace {
            assert_eq!(s.indicator, s.max_residual);
        }
    }

    #[test]
    fn p_greedy_breaks_initial_tie_by_lowest_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, f) = cloud(&mut rng, 12, 3);
        let m = fit_greedy(&KernelSpec::unit(KernelFamily::Gaussian), None, &x, &f, &cfg(Criterion::PGreedy, 2)).unwrap();
        assert_eq!(m.center_indices[0], 0);
        assert_eq!(m.trace[0].indicator, 1.0);
    }

    #[test]
    fn full_run_reproduces_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, f) = cloud(&mut rng, 10, 2);
        let spec = KernelSpec::unit(KernelFamily::Matern1);
        for crit in [Criterion::PGreedy, Criterion::FGreedy, Criterion::FOverPGreedy] {
            let m = fit_greedy(&spec, None, &x, &f, &cfg(crit, 10)).unwrap();
            assert_eq!(m.n_centers(), 10);
            let k = gram_matrix(&spec, &m.centers, &m.centers).unwrap();
            let fc = f.select_rows(&m.center_indices);
            let alpha = k.lu().solve(&fc).unwrap();
            for i in 0..10 {
                assert_relative_eq!(m.coefficients[i], alpha[i], max_relative = 1e-6, epsilon = 1e-9);
            }
            let pred = m.predict(&x).unwrap();
            for i in 0..10 {
                assert!((pred[i] - f[i]).abs() <= 1e-8 * f[i].abs().max(1.0));
            }
            let mut uniq = m.center_indices.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), 10);
            assert!(m.trace.iter().all(|s| s.max_power > 0.0));
        }
    }

    #[test]
    fn prediction_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, f) = cloud(&mut rng, 40, 3);
        let a = FirstLayer::new(DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.5..1.5)), Provenance::Loaded).unwrap();
        let spec = KernelSpec::unit(KernelFamily::Matern2);
        let m = fit_greedy(&spec, Some(&a), &x, &f, &GreedyConfig { lambda: 1e-6, ..cfg(Criterion::FOverPGreedy, 12) }).unwrap();
        let xe = DMatrix::from_fn(25, 3, |_, _| rng.gen::<f64>());
        let p1 = m.predict(&xe).unwrap();
        let p2 = m.predict_newton(&xe).unwrap();
        assert!((p1 - p2).abs().max() <= 1e-10 * (1.0 + f.abs().max()));
    }

    #[test]
    fn single_center_model() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 1.0]);
        let f = DVector::from_vec(vec![0.2, -2.0, 0.7]);
        let m = fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), None, &x, &f, &cfg(Criterion::FGreedy, 1)).unwrap();
        assert_eq!(m.center_indices, vec![1]);
        let at = m.predict(&DMatrix::from_row_slice(1, 1, &[0.5])).unwrap();
        assert_relative_eq!(at[0], -2.0, epsilon = 1e-14);
        assert_relative_eq!(m.coefficients[0], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn power_matches_dense_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, f) = cloud(&mut rng, 8, 2);
        let spec = KernelSpec::unit(KernelFamily::Matern0);
        let m = fit_greedy(&spec, None, &x, &f, &cfg(Criterion::FGreedy, 4)).unwrap();
        let xe = DMatrix::from_fn(15, 2, |_, _| rng.gen::<f64>());
        let p = m.power_values(&xe).unwrap();
        let kc = gram_matrix(&spec, &m.centers, &m.centers).unwrap();
        let kx = gram_matrix(&spec, &xe, &m.centers).unwrap();
        let sol = kc.lu().solve(&kx.transpose()).unwrap();
        for i in 0..15 {
            let dense = 1.0 - kx.row(i).dot(&sol.column(i).transpose());
            assert!((p[i] * p[i] - dense).abs() <= 1e-8);
        }
        let at_centers = m.power_values(&m.centers).unwrap();
        assert!(at_centers.iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn power_is_monotone_in_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, f) = cloud(&mut rng, 50, 2);
        let spec = KernelSpec::unit(KernelFamily::Matern1);
        let m = fit_greedy(&spec, None, &x, &f, &cfg(Criterion::PGreedy, 20)).unwrap();
        let xe = DMatrix::from_fn(30, 2, |_, _| rng.gen::<f64>());
        let k = gram_matrix(&spec, &xe, &m.centers).unwrap();
        let v = m.newton_values(&k).unwrap();
        let mut prev = vec![1.0; 30];
        for j in 0..m.n_centers() {
            for i in 0..30 {
                let p2 = prev[i] - v[(i, j)] * v[(i, j)];
                assert!(p2 <= prev[i] && p2 >= -POWER_CLAMP);
                prev[i] = p2;
            }
        }
        assert!(m.trace.windows(2).all(|w| w[1].max_power <= w[0].max_power + 1e-14));
    }

    #[test]
    fn empty_model_power_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, f) = cloud(&mut rng, 5, 2);
        let spec = KernelSpec::unit(KernelFamily::Gaussian);
        // stop immediately via tolerance above any residual
        let c = GreedyConfig { residual_tolerance: 1e6, ..cfg(Criterion::FGreedy, 5) };
        let m = fit_greedy(&spec, None, &x, &f, &c).unwrap();
        assert_eq!(m.n_centers(), 0);
        assert_eq!(m.stop, GreedyStop::Tolerance);
        assert!(m.power_values(&x).is_err());
        // power of the empty expansion is sqrt(k(x,x))
        assert_eq!(spec.eval_phi(0.0).unwrap().sqrt(), 1.0);
    }

    #[test]
    fn scaled_identity_layer_selects_same_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x, f) = cloud(&mut rng, 60, 3);
        let c = 2.5;
        for crit in [Criterion::PGreedy, Criterion::FGreedy, Criterion::FOverPGreedy] {
            let a = fit_greedy(&KernelSpec::new(KernelFamily::Matern0, c).unwrap(), None, &x, &f, &cfg(crit, 25)).unwrap();
            let layer = FirstLayer::scaled_identity(3, 3, c).unwrap();
            let b = fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), Some(&layer), &x, &f, &cfg(crit, 25)).unwrap();
            assert_eq!(a.center_indices, b.center_indices, "{crit}");
        }
    }

    #[test]
    fn stops_when_no_candidate_left() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let f = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), None, &x, &f, &cfg(Criterion::PGreedy, 10)).unwrap();
        assert_eq!(m.n_centers(), 3);
        let dup = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 0.0]);
        let m = fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), None, &dup, &f, &cfg(Criterion::PGreedy, 3)).unwrap();
        assert_eq!(m.n_centers(), 1);
        assert_eq!(m.stop, GreedyStop::NoEligibleCandidate);
    }

    #[test]
    fn degenerate_kernel_fails() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let f = DVector::from_vec(vec![1.0, 2.0]);
        let c = GreedyConfig { power_stability_floor: 2.0, ..cfg(Criterion::PGreedy, 2) };
        assert!(matches!(
            fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), None, &x, &f, &c),
            Err(Error::Numerical { .. })
        ));
    }

    #[test]
    fn regularized_fit_is_ridge_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, f) = cloud(&mut rng, 15, 2);
        let spec = KernelSpec::unit(KernelFamily::Matern0);
        let layer = FirstLayer::identity(2).unwrap();
        let m = fit_greedy(&spec, Some(&layer), &x, &f, &GreedyConfig { lambda: 1e-2, ..cfg(Criterion::FGreedy, 15) }).unwrap();
        let mut k = two_layer_gram(&spec, &layer, &m.centers, &m.centers).unwrap();
        for i in 0..15 {
            k[(i, i)] += 1e-2;
        }
        let alpha = k.lu().solve(&f.select_rows(&m.center_indices)).unwrap();
        for i in 0..15 {
            assert_relative_eq!(m.coefficients[i], alpha[i], max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    #[test]
    fn fill_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.gen::<f64>());
        assert_eq!(fill_distance(&x, &x).unwrap(), 0.0);
        let cand = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let cent = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(fill_distance(&cand, &cent).unwrap(), 1.0);
        let c = x.rows(0, 4).into_owned();
        let mut oracle = 0.0f64;
        for i in 0..20 {
            let mut best = f64::INFINITY;
            for j in 0..4 {
                best = best.min((x.row(i) - c.row(j)).norm());
            }
            oracle = oracle.max(best);
        }
        assert_relative_eq!(fill_distance(&x, &c).unwrap(), oracle, max_relative = 1e-14);
        assert!(fill_distance(&DMatrix::zeros(0, 3), &c).is_err());
    }

    #[test]
    fn decay_matches_truncated_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (x, f) = cloud(&mut rng, 40, 2);
        let (xt, ft) = cloud(&mut rng, 30, 2);
        let spec = KernelSpec::unit(KernelFamily::Matern0);
        let m = fit_greedy(&spec, None, &x, &f, &cfg(Criterion::FGreedy, 8)).unwrap();
        let decay = m.error_decay(&xt, &ft).unwrap();
        assert_eq!(decay.len(), 8);
        for n in [1usize, 4, 8] {
            let small = fit_greedy(&spec, None, &x, &f, &cfg(Criterion::FGreedy, n)).unwrap();
            let p = small.predict(&xt).unwrap();
            let mse = (p - &ft).map(|e| e * e).mean();
            assert_relative_eq!(decay[n - 1].test_mse, mse, max_relative = 1e-8);
        }
        let mut buf = Vec::new();
        write_decay_csv(&decay, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "n_centers,train_max_residual,test_mse,test_max_error");
    }

    #[test]
    fn slope_of_power_law() {
        let rows: Vec<DecayRow> = (1..=100)
            .map(|n| DecayRow {
                n_centers: n,
                train_max_residual: 0.0,
                test_mse: 0.0,
                test_max_error: 3.0 * (n as f64).powf(-1.5),
            })
            .collect();
        assert_relative_eq!(decay_slope(&rows, 50, 100).unwrap(), -1.5, epsilon = 1e-12);
        assert!(decay_slope(&rows, 200, 300).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, f) = cloud(&mut rng, 20, 2);
        let m = fit_greedy(&KernelSpec::unit(KernelFamily::Matern0), Some(&FirstLayer::identity(2).unwrap()), &x, &f, &cfg(Criterion::FGreedy, 5)).unwrap();
        let back = GreedyModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.center_indices, m.center_indices);
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
    }
}
