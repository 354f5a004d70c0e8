//! Bounded nonlinear least squares.
//!
//! A damped Gauss-Newton (Levenberg-Marquardt) loop over the free
//! parameters, with box bounds enforced by projecting trial steps, a
//! forward-difference Jacobian, and seeded multi-start. Accepted cost is
//! monotone non-increasing by construction and the whole procedure is
//! deterministic for a fixed seed.

pub mod adapters;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// One model parameter with box bounds.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub fixed: bool,
}

impl Parameter {
    pub fn free(name: impl Into<String>, initial: f64, lower: f64, upper: f64) -> Self {
        Parameter {
            name: name.into(),
            initial,
            lower,
            upper,
            fixed: false,
        }
    }

    pub fn fixed(name: impl Into<String>, value: f64) -> Self {
        Parameter {
            name: name.into(),
            initial: value,
            lower: value,
            upper: value,
            fixed: true,
        }
    }
}

/// Forward model: fill `out[i]` with the prediction at `x[i]`.
pub trait FitModel: Sync {
    fn eval(&self, params: &[f64], x: &[f64], out: &mut [f64]) -> Result<()>;
}

impl<F> FitModel for F
where
    F: Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn eval(&self, params: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
        self(params, x, out)
    }
}

/// A least-squares problem: model, data and parameter set.
pub struct FitProblem<M: FitModel> {
    model: M,
    x: Vec<f64>,
    y: Vec<f64>,
    y_sigma: Option<Vec<f64>>,
    params: Vec<Parameter>,
}

impl<M: FitModel> FitProblem<M> {
    pub fn new(model: M, x: Vec<f64>, y: Vec<f64>, params: Vec<Parameter>) -> Result<Self> {
        Self::with_sigma(model, x, y, None, params)
    }

    pub fn with_sigma(
        model: M,
        x: Vec<f64>,
        y: Vec<f64>,
        y_sigma: Option<Vec<f64>>,
        params: Vec<Parameter>,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::FitProblem("x and y lengths differ".into()));
        }
        if let Some(s) = &y_sigma {
            if s.len() != y.len() {
                return Err(Error::FitProblem("y_sigma length differs from data".into()));
            }
            if s.iter().any(|&v| v <= 0.0) {
                return Err(Error::FitProblem("y_sigma must be positive".into()));
            }
        }
        let n_free = params.iter().filter(|p| !p.fixed).count();
        if n_free == 0 {
            return Err(Error::FitProblem("no free parameters".into()));
        }
        if x.len() <= n_free {
            return Err(Error::FitProblem(format!(
                "{} data points cannot constrain {} free parameters",
                x.len(),
                n_free
            )));
        }
        for p in &params {
            if p.lower > p.upper {
                return Err(Error::FitProblem(format!(
                    "parameter `{}` has inverted bounds",
                    p.name
                )));
            }
            if p.initial < p.lower || p.initial > p.upper {
                return Err(Error::FitProblem(format!(
                    "parameter `{}` initial value {} outside [{}, {}]",
                    p.name, p.initial, p.lower, p.upper
                )));
            }
        }
        Ok(FitProblem {
            model,
            x,
            y,
            y_sigma,
            params,
        })
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    fn free_indices(&self) -> Vec<usize> {
        self.params
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.fixed)
            .map(|(i, _)| i)
            .collect()
    }

    fn residuals(&self, full: &[f64], out: &mut [f64]) -> Result<()> {
        self.model.eval(full, &self.x, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteModel {
                params: full.to_vec(),
            });
        }
        match &self.y_sigma {
            Some(s) => {
                for i in 0..out.len() {
                    out[i] = (out[i] - self.y[i]) / s[i];
                }
            }
            None => {
                for i in 0..out.len() {
                    out[i] -= self.y[i];
                }
            }
        }
        Ok(())
    }
}

/// Optimizer settings; `restarts` counts the total number of starts (the
/// first is the supplied initial point, the rest are seeded samples).
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Relative cost-change convergence threshold.
    pub rel_tol: f64,
    /// Relative step-size convergence threshold.
    pub step_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 200,
            rel_tol: 1e-12,
            step_tol: 1e-12,
            restarts: 8,
            seed: 42,
        }
    }
}

/// Best-fit values with curvature-based uncertainty estimates.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// All parameter values, fixed ones included, in problem order.
    pub values: Vec<f64>,
    /// 1σ estimates from the local curvature; NaN where unavailable
    /// (fixed parameters, singular curvature or active bounds).
    pub uncertainties: Vec<f64>,
    pub residual_rms: f64,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// False when the curvature at the optimum is singular or extremely
    /// ill-conditioned (non-identifiable directions).
    pub curvature_ok: bool,
}

impl FitResult {
    pub fn value(&self, problem_params: &[Parameter], name: &str) -> Option<f64> {
        problem_params
            .iter()
            .position(|p| p.name == name)
            .map(|i| self.values[i])
    }
}

fn fd_step(p: f64, lo: f64, hi: f64) -> f64 {
    let scale = if hi.is_finite() && lo.is_finite() && hi > lo {
        0.01 * (hi - lo)
    } else {
        1.0
    };
    1e-6 * p.abs().max(scale)
}

/// Forward-difference Jacobian of the weighted residual vector with respect
/// to the free parameters.
fn forward_jacobian<M: FitModel>(
    problem: &FitProblem<M>,
    free: &[usize],
    full: &[f64],
    r0: &[f64],
) -> Result<DMatrix<f64>> {
    let m = r0.len();
    let n = free.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut work = vec![0.0; m];
    let mut trial = full.to_vec();
    for (col, &pi) in free.iter().enumerate() {
        let p = full[pi];
        let mut h = fd_step(p, problem.params[pi].lower, problem.params[pi].upper);
        if p + h > problem.params[pi].upper {
            h = -h;
        }
        trial[pi] = p + h;
        problem.residuals(&trial, &mut work)?;
        trial[pi] = p;
        for row in 0..m {
            jac[(row, col)] = (work[row] - r0[row]) / h;
        }
    }
    Ok(jac)
}

struct StartOutcome {
    free_values: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn run_single_start<M: FitModel>(
    problem: &FitProblem<M>,
    config: &FitConfig,
    free: &[usize],
    start_free: &[f64],
) -> Result<StartOutcome> {
    let m = problem.x.len();
    let n = free.len();
    let mut full: Vec<f64> = problem.params.iter().map(|p| p.initial).collect();
    for (k, &pi) in free.iter().enumerate() {
        full[pi] = start_free[k];
    }
    let mut r = vec![0.0; m];
    problem.residuals(&full, &mut r)?;
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut mu = 0.0;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        iterations += 1;
        let jac = forward_jacobian(problem, free, &full, &r)?;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0f64, f64::max);
        if max_diag <= 0.0 {
            converged = true; // flat residual surface: nothing to do
            break;
        }
        if mu == 0.0 {
            mu = 1e-3 * max_diag;
        }

        let mut stepped = false;
        for _ in 0..25 {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += mu * jtj[(i, i)].max(1e-12 * max_diag);
            }
            let delta = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => {
                    mu *= nu;
                    nu *= 2.0;
                    continue;
                }
            };
            let mut trial = full.clone();
            for (k, &pi) in free.iter().enumerate() {
                trial[pi] =
                    (full[pi] + delta[k]).clamp(problem.params[pi].lower, problem.params[pi].upper);
            }
            let mut r_trial = vec![0.0; m];
            problem.residuals(&trial, &mut r_trial)?;
            let cost_trial: f64 = r_trial.iter().map(|v| v * v).sum();
            if cost_trial < cost {
                let improvement = cost - cost_trial;
                let step_small = free.iter().enumerate().all(|(k, &pi)| {
                    (trial[pi] - full[pi]).abs() <= config.step_tol * (full[pi].abs() + config.step_tol)
                });
                full = trial;
                r = r_trial;
                cost = cost_trial;
                mu *= 1.0 / 3.0;
                nu = 2.0;
                stepped = true;
                if improvement <= config.rel_tol * cost.max(1e-300) || step_small {
                    converged = true;
                }
                break;
            }
            mu *= nu;
            nu *= 2.0;
            if mu > 1e16 * max_diag {
                break;
            }
        }
        if converged || !stepped {
            // no acceptable step at any damping: local stationarity
            if !stepped {
                converged = true;
            }
            break;
        }
    }

    Ok(StartOutcome {
        free_values: free.iter().map(|&pi| full[pi]).collect(),
        cost,
        converged,
        iterations,
    })
}

/// Minimize the weighted sum of squared residuals.
///
/// Deterministic for a fixed config: multi-start points come from the
/// seeded generator and the best (lowest-cost, then lowest start index)
/// outcome wins.
pub fn least_squares<M: FitModel>(problem: &FitProblem<M>, config: &FitConfig) -> Result<FitResult> {
    let free = problem.free_indices();
    let n = free.len();
    let m = problem.x.len();

    // start points: the supplied initial values, then seeded uniform samples
    let mut starts: Vec<Vec<f64>> = vec![free.iter().map(|&i| problem.params[i].initial).collect()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 1..config.restarts.max(1) {
        let s: Vec<f64> = free
            .iter()
            .map(|&i| {
                let p = &problem.params[i];
                if p.lower.is_finite() && p.upper.is_finite() && p.upper > p.lower {
                    rng.gen_range(p.lower..=p.upper)
                } else {
                    p.initial
                }
            })
            .collect();
        starts.push(s);
    }

    let outcomes: Vec<Result<StartOutcome>> = starts
        .par_iter()
        .map(|s| run_single_start(problem, config, &free, s))
        .collect();
    let mut best: Option<(usize, StartOutcome)> = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        let o = o?;
        let better = match &best {
            None => true,
            Some((_, b)) => o.cost < b.cost,
        };
        if better {
            best = Some((i, o));
        }
    }
    let (_, best) = best.expect("at least one start");

    let mut values: Vec<f64> = problem.params.iter().map(|p| p.initial).collect();
    for (k, &pi) in free.iter().enumerate() {
        values[pi] = best.free_values[k];
    }

    // curvature-based uncertainties at the optimum
    let mut r = vec![0.0; m];
    problem.residuals(&values, &mut r)?;
    let jac = forward_jacobian(problem, &free, &values, &r)?;
    let jtj = jac.transpose() * &jac;
    let dof = (m - n).max(1) as f64;
    let s2 = best.cost / dof;
    let mut uncertainties = vec![f64::NAN; problem.params.len()];
    let mut curvature_ok = false;
    if let Some(ch) = jtj.clone().cholesky() {
        let cov = ch.inverse() * s2;
        curvature_ok = true;
        for (k, &pi) in free.iter().enumerate() {
            let var = cov[(k, k)];
            if var.is_finite() && var >= 0.0 {
                uncertainties[pi] = var.sqrt();
            } else {
                curvature_ok = false;
            }
        }
        // an eigenvalue spread beyond ~1e12 means a practically flat direction
        let eig = jtj.symmetric_eigen();
        let max_e = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let min_e = eig.eigenvalues.iter().fold(f64::MAX, |a, &b| a.min(b));
        if !(min_e > 0.0 && max_e / min_e < 1e12) {
            curvature_ok = false;
        }
    }

    Ok(FitResult {
        values,
        uncertainties,
        residual_rms: (best.cost / m as f64).sqrt(),
        cost: best.cost,
        converged: best.converged,
        iterations: best.iterations,
        curvature_ok,
    })
}

/// Central-difference Jacobian — the independent check used by the gradient
/// tests (the optimizer itself uses forward differences).
pub fn central_jacobian<M: FitModel>(
    problem_model: &M,
    params: &[f64],
    x: &[f64],
    scales: &[f64],
) -> Result<DMatrix<f64>> {
    let m = x.len();
    let n = params.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut lo = vec![0.0; m];
    let mut hi = vec![0.0; m];
    let mut trial = params.to_vec();
    for col in 0..n {
        let h = 1e-6 * params[col].abs().max(scales[col]);
        trial[col] = params[col] + h;
        problem_model.eval(&trial, x, &mut hi)?;
        trial[col] = params[col] - h;
        problem_model.eval(&trial, x, &mut lo)?;
        trial[col] = params[col];
        for row in 0..m {
            jac[(row, col)] = (hi[row] - lo[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_model() -> impl FitModel {
        |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = p[0] * xi;
            }
            Ok(())
        }
    }

    #[test]
    fn linear_model_recovered_exactly() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|&v| 1.7321 * v).collect();
        let problem = FitProblem::new(
            linear_model(),
            x,
            y,
            vec![Parameter::free("a", 0.1, -10.0, 10.0)],
        )
        .unwrap();
        let result = least_squares(&problem, &FitConfig::default()).unwrap();
        assert!(result.converged);
        assert_relative_eq!(result.values[0], 1.7321, epsilon = 1e-10);
        assert!(result.curvature_ok);
        assert!(result.uncertainties[0].is_finite());
    }

    #[test]
    fn rejects_structurally_bad_problems() {
        let x = vec![1.0, 2.0];
        let y = vec![1.0, 2.0];
        // more free parameters than points
        let err = FitProblem::new(
            |_: &[f64], x: &[f64], out: &mut [f64]| {
                out.copy_from_slice(&x[..out.len()]);
                Ok(())
            },
            x.clone(),
            y.clone(),
            vec![
                Parameter::free("a", 0.0, -1.0, 1.0),
                Parameter::free("b", 0.0, -1.0, 1.0),
            ],
        )
        .err()
        .unwrap();
        assert!(matches!(err, Error::FitProblem(_)));
        // initial outside bounds
        assert!(FitProblem::new(
            linear_model(),
            x.clone(),
            y.clone(),
            vec![Parameter::free("a", 5.0, -1.0, 1.0)]
        )
        .is_err());
        // no free parameters
        assert!(FitProblem::new(linear_model(), x, y, vec![Parameter::fixed("a", 1.0)]).is_err());
    }

    #[test]
    fn non_finite_model_is_reported() {
        let x = vec![0.0, 1.0, 2.0];
        let y = vec![0.0, 1.0, 2.0];
        let problem = FitProblem::new(
            |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = (p[0] * xi).ln();
                }
                Ok(())
            },
            x,
            y,
            vec![Parameter::free("a", -0.5, -1.0, 1.0)],
        )
        .unwrap();
        let err = least_squares(&problem, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteModel { .. }));
    }

    #[test]
    fn bounds_are_respected() {
        // unconstrained optimum at a = 2, box caps it at 1
        let x: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.0 * v).collect();
        let problem = FitProblem::new(
            linear_model(),
            x,
            y,
            vec![Parameter::free("a", 0.5, 0.0, 1.0)],
        )
        .unwrap();
        let result = least_squares(&problem, &FitConfig::default()).unwrap();
        assert!(result.values[0] <= 1.0 + 1e-12);
        assert_relative_eq!(result.values[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn data_order_does_not_matter() {
        let x: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| (-0.7 * v).exp()).collect();
        let model = |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = (-p[0] * xi).exp();
            }
            Ok(())
        };
        let fit = |x: Vec<f64>, y: Vec<f64>| {
            let problem = FitProblem::new(
                model,
                x,
                y,
                vec![Parameter::free("k", 0.2, 0.0, 5.0)],
            )
            .unwrap();
            least_squares(&problem, &FitConfig::default()).unwrap().values[0]
        };
        let a = fit(x.clone(), y.clone());
        let mut xr = x;
        let mut yr = y;
        xr.reverse();
        yr.reverse();
        let b = fit(xr, yr);
        assert_relative_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_across_runs() {
        let x: Vec<f64> = (0..30).map(|i| 0.05 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| 0.8 * (-1.3 * v).exp() + 0.1 * (2.0 * v).sin())
            .collect();
        let model = |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = p[0] * (-p[1] * xi).exp();
            }
            Ok(())
        };
        let run = || {
            let problem = FitProblem::new(
                model,
                x.clone(),
                y.clone(),
                vec![
                    Parameter::free("a", 0.5, 0.0, 5.0),
                    Parameter::free("k", 0.5, 0.0, 5.0),
                ],
            )
            .unwrap();
            least_squares(&problem, &FitConfig::default()).unwrap()
        };
        let r1 = run();
        let r2 = run();
        assert_eq!(r1.values, r2.values);
        assert_eq!(r1.cost, r2.cost);
    }

    #[test]
    fn forward_and_central_jacobians_agree() {
        // gradient check on a smooth nonlinear model at interior points
        let model = |p: &[f64], x: &[f64], out: &mut [f64]| -> Result<()> {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = p[0] * (-p[1] * xi).exp() + p[2] * xi * xi;
            }
            Ok(())
        };
        let x: Vec<f64> = (0..25).map(|i| 0.1 + 0.07 * i as f64).collect();
        let y = vec![0.0; x.len()];
        let params = vec![
            Parameter::free("a", 0.9, 0.0, 5.0),
            Parameter::free("k", 1.1, 0.0, 5.0),
            Parameter::free("c", 0.3, -2.0, 2.0),
        ];
        let problem = FitProblem::new(model, x.clone(), y, params).unwrap();
        let full = vec![0.9, 1.1, 0.3];
        let mut r0 = vec![0.0; x.len()];
        problem.residuals(&full, &mut r0).unwrap();
        let fwd = forward_jacobian(&problem, &[0, 1, 2], &full, &r0).unwrap();
        let cen = central_jacobian(&model, &full, &x, &[0.05, 0.05, 0.04]).unwrap();
        for i in 0..fwd.nrows() {
            for j in 0..fwd.ncols() {
                assert_relative_eq!(fwd[(i, j)], cen[(i, j)], max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }
}
