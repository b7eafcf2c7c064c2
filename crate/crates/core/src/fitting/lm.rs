//! Damped Gauss-Newton (Levenberg-Marquardt) for weighted least squares.
//!
//! Parameters are optimized in scaled coordinates `u = (p - p0) / s` so
//! that quantities spanning many decades (Hz, counts, counts/Hz²) share one
//! damping parameter. Marquardt's diagonal scaling is applied on top.

use nalgebra::{DMatrix, DVector};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative parameter-step tolerance.
    pub xtol: f64,
    /// Relative χ²-decrease tolerance.
    pub ftol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 200, xtol: 1e-10, ftol: 1e-12, lambda0: 1e-3 }
    }
}

/// Model values for a parameter vector.
pub type ModelFn<'a> = dyn Fn(&[f64]) -> Vec<f64> + 'a;
/// Jacobian ∂model_i/∂p_j (rows = points).
pub type JacobianFn<'a> = dyn Fn(&[f64]) -> DMatrix<f64> + 'a;

pub struct Problem<'a> {
    pub names: &'a [&'a str],
    pub y: &'a [f64],
    /// Inverse variances.
    pub weights: &'a [f64],
    /// Characteristic magnitude of each parameter.
    pub scales: &'a [f64],
    pub model: &'a ModelFn<'a>,
    pub jacobian: Option<&'a JacobianFn<'a>>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub params: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Problem<'_> {
    fn chi2(&self, p: &[f64]) -> f64 {
        let m = (self.model)(p);
        let mut s = 0.0;
        for ((y, m), w) in self.y.iter().zip(&m).zip(self.weights) {
            let r = y - m;
            s += w * r * r;
        }
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    }

    /// Jacobian in parameter space, analytic if available.
    pub fn jacobian_at(&self, p: &[f64]) -> DMatrix<f64> {
        match self.jacobian {
            Some(j) => j(p),
            None => central_difference(self.model, p, self.scales, self.y.len()),
        }
    }

    /// Normal matrix and gradient in scaled coordinates.
    fn normal_equations(&self, p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let n = p.len();
        let mut ju = self.jacobian_at(p);
        for j in 0..n {
            ju.column_mut(j).scale_mut(self.scales[j]);
        }
        let m = (self.model)(p);
        let mut a = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for i in 0..self.y.len() {
            let w = self.weights[i];
            let r = self.y[i] - m[i];
            for j in 0..n {
                let wj = w * ju[(i, j)];
                g[j] += wj * r;
                for k in j..n {
                    a[(j, k)] += wj * ju[(i, k)];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                a[(j, k)] = a[(k, j)];
            }
        }
        (a, g)
    }

    fn check_identifiable(&self, a: &DMatrix<f64>) -> Result<(), FitError> {
        let n = a.nrows();
        let dmax = (0..n).map(|j| a[(j, j)]).fold(0.0, f64::max);
        let dead: Vec<&str> = (0..n)
            .filter(|&j| !(a[(j, j)] > dmax * 1e-24) || !a[(j, j)].is_finite())
            .map(|j| self.names[j])
            .collect();
        if !dead.is_empty() {
            return Err(FitError::SingularJacobian(format!(
                "no sensitivity to {}",
                dead.join(", ")
            )));
        }
        let mut r = a.clone();
        for j in 0..n {
            for k in 0..n {
                r[(j, k)] /= (a[(j, j)] * a[(k, k)]).sqrt();
            }
        }
        let ev = r.symmetric_eigenvalues();
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 1e-14) {
            return Err(FitError::SingularJacobian("collinear parameters".into()));
        }
        Ok(())
    }
}

/// Central differences with step 1e-6 of each parameter's scale.
pub fn central_difference(model: &ModelFn<'_>, p: &[f64], scales: &[f64], m: usize) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-6 * scales[j];
        q[j] = p[j] + h;
        let up = model(&q);
        q[j] = p[j] - h;
        let dn = model(&q);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    jac
}

/// Minimizes Σ w_i (y_i − model_i(p))² from `p0`.
///
/// Returns `converged = false` when the iteration cap is reached.
pub fn minimize(problem: &Problem<'_>, p0: &[f64], opts: &LmOptions) -> Result<Outcome, FitError> {
    let n = p0.len();
    if problem.y.len() < n {
        return Err(FitError::Underdetermined { need: n, got: problem.y.len() });
    }
    let mut p = p0.to_vec();
    let mut chi2 = problem.chi2(&p);
    if !chi2.is_finite() {
        return Err(FitError::InvalidInput("model is not finite at the initial point".into()));
    }
    let mut lambda = opts.lambda0;
    let mut converged = chi2 == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let (a, g) = problem.normal_equations(&p);
        problem.check_identifiable(&a)?;
        loop {
            let mut damped = a.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * a[(j, j)];
            }
            let du = match damped.cholesky() {
                Some(c) => c.solve(&g),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = (0..n).map(|j| p[j] + du[j] * problem.scales[j]).collect();
            let chi2_trial = problem.chi2(&trial);
            if chi2_trial <= chi2 {
                let step = (0..n)
                    .map(|j| (du[j] * problem.scales[j]).abs() / p[j].abs().max(problem.scales[j]))
                    .fold(0.0, f64::max);
                let drop = chi2 - chi2_trial;
                p = trial;
                chi2 = chi2_trial;
                lambda = (lambda / 10.0).max(1e-12);
                if step < opts.xtol || drop <= opts.ftol * chi2 || chi2 == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left at machine precision.
                converged = true;
                break;
            }
        }
    }

    let (a, _) = problem.normal_equations(&p);
    problem.check_identifiable(&a)?;
    let inv = a
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| FitError::SingularJacobian("normal matrix is not positive definite".into()))?;
    let mut cov = inv;
    for j in 0..n {
        for k in 0..n {
            cov[(j, k)] *= problem.scales[j] * problem.scales[k];
        }
    }
    Ok(Outcome { params: p, covariance: cov, chi2, iterations, converged })
}
