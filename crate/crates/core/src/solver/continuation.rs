//! Continuation in `t` from the Hessian equation (`t = 0`) to the curvature
//! equation (`t = 1`).

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;

use super::{
    initial_constant, moment_matched_quadratic, quadratic_field, solve_at_t, FailureKind,
    HomotopyMode, Problem, SolveConfig, SolveState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub c: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

impl TracePoint {
    fn of(state: &SolveState) -> Self {
        TracePoint {
            t: state.t,
            c: state.c,
            newton_iters: state.newton_iters(),
            residual: state.residual_norm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationRun {
    pub state: SolveState,
    pub trace: Vec<TracePoint>,
    /// Converged state of every stage, in order.
    pub stages: Vec<SolveState>,
}

/// A run that stopped before `t = 1`; keeps everything computed so far.
#[derive(Debug, Clone)]
pub struct ContinuationFailure {
    pub kind: FailureKind,
    /// Last successfully reached `t`, if any.
    pub t_reached: Option<f64>,
    pub trace: Vec<TracePoint>,
    /// The failed stage's final iterate.
    pub last_attempt: SolveState,
    pub last_converged: Option<SolveState>,
}

impl ContinuationFailure {
    pub fn to_error(&self) -> Error {
        match self.kind {
            FailureKind::ConvexityLost => Error::ConvexityLost {
                node: 0,
                min_eig: f64::NAN,
            },
            kind => Error::Convergence(format!(
                "{kind:?} at t = {} (last converged t = {:?})",
                self.last_attempt.t, self.t_reached
            )),
        }
    }
}

/// Moment-matched quadratic initial state on `grid` for the image `target`.
pub fn initial_state(problem: &Problem<'_>, domain: &DomainSpec) -> Result<SolveState> {
    let (s, m) = moment_matched_quadratic(domain, problem.target);
    let mut u = quadratic_field(problem.grid, s, m);
    let shift: f64 = match problem.normalization {
        super::Normalization::MeanZero => problem
            .grid
            .interior_weights
            .iter()
            .zip(&u)
            .map(|(w, x)| w * x)
            .sum(),
        super::Normalization::PoleZero => u[crate::grid::POLE],
    };
    u.iter_mut().for_each(|x| *x -= shift);
    let c = initial_constant(problem, &u, 0.0)?;
    Ok(SolveState::initial(u, c, 0.0))
}

/// Solves at `t = 0` from the moment-matched guess, then marches to `t = 1`.
pub fn continuation_solve(
    source: &DomainSpec,
    target: &DomainSpec,
    grid: &Grid,
    config: &SolveConfig,
) -> std::result::Result<ContinuationRun, ContinuationFailure> {
    let problem = Problem {
        grid,
        target,
        kind: config.operator,
        normalization: config.normalization,
        convexity_guard: config.convexity_guard,
    };
    let start = match initial_state(&problem, source) {
        Ok(s) => s,
        Err(_) => {
            let u = vec![0.0; grid.len()];
            return Err(ContinuationFailure {
                kind: FailureKind::ConvexityLost,
                t_reached: None,
                trace: Vec::new(),
                last_attempt: SolveState::initial(u, 0.0, 0.0),
                last_converged: None,
            });
        }
    };
    continue_from(&problem, start, config)
}

/// Continuation from an explicit `t = 0` initial state.
pub fn continue_from(
    problem: &Problem<'_>,
    start: SolveState,
    config: &SolveConfig,
) -> std::result::Result<ContinuationRun, ContinuationFailure> {
    let mut trace = Vec::new();
    let mut stages = Vec::new();
    let first = solve_at_t(problem, 0.0, &start, config);
    if !first.converged {
        return Err(ContinuationFailure {
            kind: first.failure.unwrap_or(FailureKind::MaxIterations),
            t_reached: None,
            trace,
            last_attempt: first,
            last_converged: None,
        });
    }
    trace.push(TracePoint::of(&first));
    stages.push(first.clone());

    let mut current = first;
    let mut dt = 1.0 / config.homotopy_steps as f64;
    let mut easy = 0;
    let mut k = 0usize;
    while current.t < 1.0 {
        let t_next = match config.mode {
            HomotopyMode::Uniform => {
                k += 1;
                if k == config.homotopy_steps {
                    1.0
                } else {
                    k as f64 / config.homotopy_steps as f64
                }
            }
            HomotopyMode::Adaptive => (current.t + dt).min(1.0),
        };
        let attempt = solve_at_t(problem, t_next, &current, config);
        if attempt.converged {
            trace.push(TracePoint::of(&attempt));
            stages.push(attempt.clone());
            if attempt.newton_iters() <= 4 {
                easy += 1;
                if easy >= 2 && config.mode == HomotopyMode::Adaptive {
                    dt = (2.0 * dt).min(0.5);
                    easy = 0;
                }
            } else {
                easy = 0;
            }
            current = attempt;
            continue;
        }
        let kind = attempt.failure.unwrap_or(FailureKind::MaxIterations);
        let give_up = match config.mode {
            HomotopyMode::Uniform => true,
            HomotopyMode::Adaptive => {
                dt *= 0.5;
                easy = 0;
                dt < config.min_t_step
            }
        };
        if give_up {
            return Err(ContinuationFailure {
                kind,
                t_reached: Some(current.t),
                trace,
                last_attempt: attempt,
                last_converged: Some(current),
            });
        }
    }
    Ok(ContinuationRun {
        state: current,
        trace,
        stages,
    })
}
