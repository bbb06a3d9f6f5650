//! Damped Newton iteration at fixed homotopy parameter.

use crate::error::Error;

use super::linsolve::solve_bordered;
use crate::grid::POLE;
use super::{max_norm, FailureKind, NewtonRecord, Problem, SolveConfig, SolveState};

fn failed(mut state: SolveState, kind: FailureKind) -> SolveState {
    state.converged = false;
    state.failure = Some(kind);
    state
}

/// Newton's method with Armijo backtracking on the residual max-norm.
/// Trial points that lose convexity are rejected like any other failed trial.
pub fn solve_at_t(problem: &Problem<'_>, t: f64, initial: &SolveState, config: &SolveConfig) -> SolveState {
    let n = problem.grid.len();
    let mut state = SolveState {
        u: initial.u.clone(),
        c: initial.c,
        t,
        residual_norm: f64::INFINITY,
        newton_history: Vec::new(),
        converged: false,
        failure: None,
    };
    let mut r = match problem.residual(&state.u, state.c, t) {
        Ok(r) => r,
        Err(Error::ConvexityLost { .. }) => return failed(state, FailureKind::ConvexityLost),
        Err(_) => return failed(state, FailureKind::SingularJacobian),
    };
    state.residual_norm = max_norm(&r);

    for iteration in 1..=config.max_newton_iters + 1 {
        if state.residual_norm <= config.newton_tol {
            state.converged = true;
            return state;
        }
        if iteration > config.max_newton_iters {
            break;
        }
        let jac = match problem.jacobian(&state.u, state.c, t) {
            Ok(j) => j,
            Err(_) => return failed(state, FailureKind::SingularJacobian),
        };
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = match solve_bordered(&jac, &rhs, POLE) {
            Ok(d) => d,
            Err(_) => return failed(state, FailureKind::SingularJacobian),
        };

        let mut alpha = 1.0;
        let mut all_nonconvex = true;
        let accepted = loop {
            let trial_u: Vec<f64> = state.u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let trial_c = state.c + alpha * delta[n];
            match problem.residual(&trial_u, trial_c, t) {
                Ok(tr) => {
                    all_nonconvex = false;
                    let norm = max_norm(&tr);
                    if norm <= (1.0 - config.armijo * alpha) * state.residual_norm {
                        break Some((trial_u, trial_c, tr, norm));
                    }
                }
                Err(Error::ConvexityLost { .. }) => {}
                Err(_) => all_nonconvex = false,
            }
            alpha *= 0.5;
            if alpha < config.min_step_length {
                break None;
            }
        };
        match accepted {
            Some((u, c, tr, norm)) => {
                state.u = u;
                state.c = c;
                r = tr;
                state.residual_norm = norm;
                state.newton_history.push(NewtonRecord {
                    iteration,
                    residual: norm,
                    step: alpha,
                });
            }
            None => {
                let kind = if all_nonconvex {
                    FailureKind::ConvexityLost
                } else {
                    FailureKind::LineSearchStall
                };
                return failed(state, kind);
            }
        }
    }
    failed(state, FailureKind::MaxIterations)
}
