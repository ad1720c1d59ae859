//! Small wrapper around Levenberg-Marquardt for residual closures with a
//! central-difference Jacobian.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

struct NumericProblem<F> {
    residual_fn: F,
    params: DVector<f64>,
}

impl<F> NumericProblem<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn eval(&self, x: &[f64]) -> Option<DVector<f64>> {
        let r = (self.residual_fn)(x);
        r.iter()
            .all(|v| v.is_finite())
            .then(|| DVector::from_vec(r))
    }
}

fn step(x: f64) -> f64 {
    1e-6 * x.abs().max(1e-3)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn numeric_jacobian<F>(f: &F, x: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step(x[j]);
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        for i in 0..m {
            let d = (up[i] - down[i]) / (2.0 * h);
            if !d.is_finite() {
                return None;
            }
            jac[(i, j)] = d;
        }
    }
    Some(jac)
}

impl<F> LeastSquaresProblem<f64, Dyn, Dyn> for NumericProblem<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.params.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.params.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.eval(self.params.as_slice())
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        numeric_jacobian(&self.residual_fn, self.params.as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub converged: bool,
    pub termination: String,
    pub evaluations: usize,
}

impl Solution {
    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    /// Parameter covariance `(JᵀJ)⁻¹`, scaled by the residual variance when
    /// `scale_by_residuals` is set (unit weights) and left absolute otherwise.
    pub fn covariance(&self, scale_by_residuals: bool) -> Option<DMatrix<f64>> {
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj.try_inverse()?;
        if !scale_by_residuals {
            return Some(inv);
        }
        let dof = self.residuals.len().checked_sub(self.params.len())?;
        if dof == 0 {
            return None;
        }
        let s2 = self.residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64;
        Some(inv * s2)
    }
}

/// Minimizes `‖f(x)‖²` starting from `x0`.
pub fn minimize<F>(f: F, x0: &[f64]) -> Solution
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let problem = NumericProblem {
        residual_fn: f,
        params: DVector::from_column_slice(x0),
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_patience(400)
        .minimize(problem);
    let params = problem.params.as_slice().to_vec();
    let residuals = problem
        .eval(&params)
        .map(|r| r.as_slice().to_vec())
        .unwrap_or_default();
    let jacobian = numeric_jacobian(&problem.residual_fn, &params)
        .unwrap_or_else(|| DMatrix::zeros(residuals.len(), params.len()));
    Solution {
        converged: report.termination.was_successful(),
        termination: format!("{:?}", report.termination),
        evaluations: report.number_of_evaluations,
        params,
        residuals,
        jacobian,
    }
}
