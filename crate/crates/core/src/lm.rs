//! A compact Levenberg-Marquardt minimizer with a forward-difference
//! Jacobian. Only accepted steps change the parameters, so the residual norm
//! decreases monotonically.

use crate::linalg::solve_linear_system;

#[derive(Clone, Copy, Debug)]
pub struct LevMarOptions {
    pub max_iterations: usize,
    /// Converged when an accepted step reduces the cost by less than this
    /// relative amount.
    pub relative_tolerance: f64,
}

impl Default for LevMarOptions {
    fn default() -> Self {
        LevMarOptions {
            max_iterations: 500,
            relative_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevMarFit {
    pub params: Vec<f64>,
    /// Final sum of squared residuals.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes the sum of squared residuals over `params`.
///
/// `residuals` fills the residual slice for a parameter vector and returns
/// false when the parameters are outside the model's domain; such trial steps
/// are rejected.
pub fn fit<F>(residuals: F, n_residuals: usize, initial: &[f64], options: LevMarOptions) -> LevMarFit
where
    F: Fn(&[f64], &mut [f64]) -> bool,
{
    let n_params = initial.len();
    let mut params = initial.to_vec();
    let mut r = vec![0.0; n_residuals];
    let mut r_trial = vec![0.0; n_residuals];

    if !residuals(&params, &mut r) {
        // Nowhere to start from; report the initial guess unconverged.
        return LevMarFit {
            params,
            cost: f64::INFINITY,
            converged: false,
            iterations: 0,
        };
    }
    let mut cost: f64 = r.iter().map(|v| v * v).sum();

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..options.max_iterations {
        iterations = iter + 1;
        if cost < 1e-30 {
            converged = true;
            break;
        }

        // Forward-difference Jacobian, column per parameter.
        let mut jac = vec![vec![0.0; n_params]; n_residuals];
        let mut valid = true;
        for j in 0..n_params {
            let h = 1.5e-8 * params[j].abs().max(1e-4);
            let mut shifted = params.clone();
            shifted[j] += h;
            if !residuals(&shifted, &mut r_trial) {
                shifted[j] = params[j] - h;
                if !residuals(&shifted, &mut r_trial) {
                    valid = false;
                    break;
                }
                for i in 0..n_residuals {
                    jac[i][j] = (r[i] - r_trial[i]) / h;
                }
            } else {
                for i in 0..n_residuals {
                    jac[i][j] = (r_trial[i] - r[i]) / h;
                }
            }
        }
        if !valid {
            break;
        }

        // Normal equations J'J and gradient J'r.
        let mut jtj = vec![vec![0.0; n_params]; n_params];
        let mut jtr = vec![0.0; n_params];
        for i in 0..n_residuals {
            for a in 0..n_params {
                jtr[a] += jac[i][a] * r[i];
                for b in a..n_params {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        for a in 0..n_params {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let mut improved = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for a in 0..n_params {
                damped[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_linear_system(damped, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
            if residuals(&trial, &mut r_trial) {
                let trial_cost: f64 = r_trial.iter().map(|v| v * v).sum();
                if trial_cost < cost {
                    let relative_drop = (cost - trial_cost) / cost.max(1e-300);
                    params = trial;
                    std::mem::swap(&mut r, &mut r_trial);
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if relative_drop < options.relative_tolerance {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }

        if converged {
            break;
        }
        if !improved {
            // Damping exhausted without progress: local minimum to working
            // precision.
            converged = cost.is_finite();
            break;
        }
    }

    LevMarFit {
        params,
        cost,
        converged,
        iterations,
    }
}
