//! Continuation in `h0`: each solve is seeded from the solutions already
//! found, and a failing increment is bisected before giving up.

use super::bvp::{solve_bvp_degenerate_with, solve_bvp_nondegenerate_with, BvpOptions, InitialGuess};
use super::BvpSolution;
use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::model::ModelParams;

/// Smallest admissible substep is the schedule increment over `2^depth`.
pub const MAX_BISECTION_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCase {
    /// `sigma0 = 0`: fourth-order problem in `x0`.
    Degenerate,
    /// `sigma0 > 0`: coupled second-order problem.
    NonDegenerate,
}

impl NoiseCase {
    pub fn of(params: &ModelParams) -> Self {
        if params.sigma0 == 0.0 {
            NoiseCase::Degenerate
        } else {
            NoiseCase::NonDegenerate
        }
    }

    pub fn solve(
        self,
        params: &ModelParams,
        t_final: f64,
        mesh_points: usize,
        guess: &InitialGuess,
        opts: &BvpOptions,
    ) -> Result<BvpSolution> {
        match self {
            NoiseCase::Degenerate => solve_bvp_degenerate_with(params, t_final, mesh_points, guess, opts),
            NoiseCase::NonDegenerate => solve_bvp_nondegenerate_with(params, t_final, mesh_points, guess, opts),
        }
    }
}

/// Linear extrapolation in `h0` through the last two solutions.
fn predict(history: &[(f64, BvpSolution)], h0: f64) -> Result<PathGrid> {
    let (h1, s1) = &history[history.len() - 1];
    if history.len() < 2 {
        return Ok(s1.grid.clone());
    }
    let (h_prev, s_prev) = &history[history.len() - 2];
    let w = (h0 - h1) / (h1 - h_prev);
    let mut grid = s1.grid.clone();
    let names: Vec<String> = s1.grid.names().map(str::to_owned).collect();
    for name in names {
        let (a, b) = (s1.grid.series(&name)?, s_prev.grid.series(&name)?);
        let extrapolated = a.iter().zip(b).map(|(a, b)| a + w * (a - b)).collect();
        grid.insert(&name, extrapolated)?;
    }
    Ok(grid)
}

/// Solves the transition problem at every `h0` of `schedule`, returning one
/// solution per entry. Each solve starts from a secant prediction through
/// the two previous solutions; a failing increment is halved, and the step
/// grows back after each success.
pub fn continue_in_h0(
    params: &ModelParams,
    t_final: f64,
    schedule: &[f64],
    mesh_points: usize,
) -> Result<Vec<BvpSolution>> {
    continue_in_h0_with(params, t_final, schedule, mesh_points, &BvpOptions::default())
}

pub fn continue_in_h0_with(
    params: &ModelParams,
    t_final: f64,
    schedule: &[f64],
    mesh_points: usize,
    opts: &BvpOptions,
) -> Result<Vec<BvpSolution>> {
    let (solutions, outcome) = continue_in_h0_partial(params, t_final, schedule, mesh_points, opts);
    outcome.map(|()| solutions)
}

/// Like [`continue_in_h0_with`], but keeps the solutions reached before a
/// failure. The second element carries the error that stopped the run.
pub fn continue_in_h0_partial(
    params: &ModelParams,
    t_final: f64,
    schedule: &[f64],
    mesh_points: usize,
    opts: &BvpOptions,
) -> (Vec<BvpSolution>, Result<()>) {
    let mut out = Vec::new();
    let Some(&first) = schedule.first() else {
        return (out, Err(Error::invalid("empty h0 schedule")));
    };
    if schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return (out, Err(Error::invalid("h0 schedule must be strictly increasing")));
    }
    let case = NoiseCase::of(params);
    let start = match case.solve(&params.with_h0(first), t_final, mesh_points, &InitialGuess::Auto, opts) {
        Ok(sol) => sol,
        Err(Error::NonConvergence(last)) => {
            let err = Error::Continuation {
                lo: first,
                hi: first,
                last: Some(last),
            };
            return (out, Err(err));
        }
        Err(e) => return (out, Err(e)),
    };
    out.push(start.clone());
    let mut history = vec![(first, start)];
    for w in schedule.windows(2) {
        let increment = w[1] - w[0];
        let min_step = increment / (1u64 << MAX_BISECTION_DEPTH) as f64;
        let mut step = increment;
        let mut current = w[0];
        while current < w[1] {
            let next = if w[1] - current <= step * (1.0 + 1e-12) { w[1] } else { current + step };
            let guess = match predict(&history, next) {
                Ok(g) => InitialGuess::Path(g),
                Err(e) => return (out, Err(e)),
            };
            match case.solve(&params.with_h0(next), t_final, mesh_points, &guess, opts) {
                Ok(sol) => {
                    if history.len() == 2 {
                        history.remove(0);
                    }
                    history.push((next, sol));
                    current = next;
                    step = (2.0 * step).min(increment);
                }
                Err(Error::NonConvergence(last)) => {
                    step *= 0.5;
                    if step < min_step * (1.0 - 1e-12) {
                        let err = Error::Continuation {
                            lo: current,
                            hi: next,
                            last: Some(last),
                        };
                        return (out, Err(err));
                    }
                }
                Err(e) => return (out, Err(e)),
            }
        }
        out.push(history[history.len() - 1].1.clone());
    }
    (out, Ok(()))
}
