//! Thin wrapper over argmin's Nelder-Mead for closures on `&[f64]`.

use argmin::core::{CostFunction, Executor, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;

pub(crate) struct LocalMinimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: u64,
    pub converged: bool,
}

struct Objective<'a, F>(&'a F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge
/// `step`.
pub(crate) fn minimize<F>(f: &F, x0: &[f64], step: f64, max_iters: u64, tol: f64) -> LocalMinimum
where
    F: Fn(&[f64]) -> f64,
{
    if x0.is_empty() {
        return LocalMinimum {
            x: Vec::new(),
            f: f(x0),
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex = vec![x0.to_vec()];
    for k in 0..x0.len() {
        let mut v = x0.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(tol)
        .expect("tolerance is non-negative");
    let result = Executor::new(Objective(f), solver)
        .configure(|state| state.max_iters(max_iters))
        .run()
        .expect("objective never fails");
    let state = result.state;
    let converged = matches!(
        state.termination_status,
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    let x = state.best_param.unwrap_or_else(|| x0.to_vec());
    LocalMinimum {
        f: state.best_cost,
        x,
        iterations: state.iter,
        converged,
    }
}
