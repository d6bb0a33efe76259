use rayon::prelude::*;

use sysrisk::control::{
    algebraic_residual, build_feedback, d_inf_closed_form, integrate_riccati, solve_algebraic_riccati,
};
use sysrisk::fluctuations::stationary_covariance;
use sysrisk::ldp::{continue_in_h0_partial, transition_probability, BvpOptions, BvpSolution};
use sysrisk::sde::{simulate_controlled, simulate_full, simulate_reduced, Record};
use sysrisk::stats::{batch_covariance, batch_variance, count_transitions, sample_covariance, DEFAULT_BATCHES};
use sysrisk::{ControlParams, ExperimentConfig, PathGrid};

use crate::error::{CliError, Result};
use crate::output::{num, Outputs, Table};
use crate::{Command, Context, SolverArgs};

/// Transition counting band for `xbar`.
const BAND: f64 = 0.5;
/// Target number of rows in thinned path files.
const PATH_ROWS: usize = 10_000;

pub fn dispatch(command: &Command, ctx: &Context, out: &mut Outputs) -> Result<()> {
    match command {
        Command::Simulate { stride } => simulate(ctx, *stride, out),
        Command::Fluctuations => fluctuations(ctx, out),
        Command::LdpPath { solver } => ldp_path(ctx, solver, out),
        Command::LdpSweep { solver, h0 } => ldp_sweep(ctx, solver, h0.as_deref(), out),
        Command::Riccati { stride } => riccati(ctx, *stride, out),
        Command::ControlDemo { stride } => control_demo(ctx, *stride, out),
    }
}

/// Every sweep point as `(value, config)`, or the base configuration alone.
fn points(ctx: &Context) -> Result<Vec<(Option<f64>, ExperimentConfig)>> {
    match &ctx.sweep {
        None => Ok(vec![(None, ctx.config)]),
        Some(s) => s
            .values()
            .into_iter()
            .map(|v| Ok((Some(v), s.apply(&ctx.raw, v)?.validate()?)))
            .collect(),
    }
}

/// Whether rows lead with the swept value; not when a column already holds it.
fn leading(ctx: &Context, cols: &[&str]) -> bool {
    ctx.sweep.as_ref().is_some_and(|s| !cols.contains(&s.name.as_str()))
}

fn header(ctx: &Context, cols: &[&str]) -> Table {
    let mut h: Vec<String> = ctx.sweep.iter().filter(|_| leading(ctx, cols)).map(|s| s.name.clone()).collect();
    h.extend(cols.iter().map(|c| c.to_string()));
    Table::new(h)
}

fn row(ctx: &Context, cols: &[&str], value: Option<f64>, cells: Vec<String>) -> Vec<String> {
    value.filter(|_| leading(ctx, cols)).map(num).into_iter().chain(cells).collect()
}

fn resolve_stride(requested: Option<usize>, steps: usize) -> Result<usize> {
    match requested {
        Some(0) => Err(CliError::Config("--stride must be at least 1".into())),
        Some(s) if steps % s != 0 => Err(CliError::Config(format!("--stride {s} does not divide T/dt = {steps}"))),
        Some(s) => Ok(s),
        // smallest divisor of the step count that keeps about PATH_ROWS rows
        None => Ok((steps.div_ceil(PATH_ROWS).max(1)..=steps)
            .find(|s| steps % s == 0)
            .unwrap_or(1)),
    }
}

fn thin(grid: &PathGrid, stride: usize) -> Result<PathGrid> {
    let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<f64>>();
    let mut out = PathGrid::from_times(pick(grid.t()))?;
    for name in grid.names() {
        out.insert(name, pick(grid.series(name)?))?;
    }
    Ok(out)
}

fn control_of(cfg: &ExperimentConfig) -> Result<ControlParams> {
    cfg.control
        .ok_or_else(|| CliError::Config("config key `theta_c`: required by this command".into()))
}

const SIMULATE_COLUMNS: [&str; 11] = [
    "seed",
    "var_z0",
    "var_z0_se",
    "var_zbar",
    "var_zbar_se",
    "cov",
    "cov_se",
    "exact_var_z0",
    "exact_var_zbar",
    "exact_cov",
    "transitions_xbar",
];

fn simulate(ctx: &Context, stride: Option<usize>, out: &mut Outputs) -> Result<()> {
    let pts = points(ctx)?;
    let stride = resolve_stride(stride, ctx.config.sim.n_steps())?;
    let results: Vec<Result<(Vec<String>, PathGrid)>> = pts
        .par_iter()
        .map(|&(value, cfg)| {
            let (p, sim) = (cfg.model, cfg.sim);
            // the two-dimensional system is exact in law only for h = 0
            let path = if p.h == 0.0 {
                simulate_reduced(&p, &sim)?
            } else {
                simulate_full(&p, &sim, &Record::every(1))?
            };
            let burn = sim.burn_in_steps();
            let scale = (p.n_agents as f64).sqrt();
            let z = |name: &str| -> Result<Vec<f64>> {
                Ok(path.series(name)?[burn..].iter().map(|x| scale * (x + 1.0)).collect())
            };
            let (z0, zb) = (z("x0")?, z("xbar")?);
            let v0 = batch_variance(&z0, DEFAULT_BATCHES)?;
            let vb = batch_variance(&zb, DEFAULT_BATCHES)?;
            let c = batch_covariance(&z0, &zb, DEFAULT_BATCHES)?;
            let exact = stationary_covariance(&p, -1.0)
                .map(|r| [r.var_z0, r.var_zbar, r.cov])
                .unwrap_or([f64::NAN; 3]);
            let transitions = count_transitions(path.series("xbar")?, BAND);
            let mut cells = vec![sim.seed.to_string()];
            for e in [v0, vb, c] {
                cells.push(num(e.value));
                cells.push(num(e.std_error));
            }
            cells.extend(exact.iter().map(|&v| num(v)));
            cells.push(transitions.to_string());
            Ok((row(ctx, &SIMULATE_COLUMNS, value, cells), path))
        })
        .collect();
    let mut table = header(ctx, &SIMULATE_COLUMNS);
    let mut paths = Vec::new();
    for r in results {
        let (cells, path) = r?;
        table.push(cells);
        paths.push(path);
    }
    if ctx.sweep.is_none() {
        let path = thin(&paths[0], stride)?;
        out.write("path", "csv", path.to_csv().as_bytes())?;
    }
    out.table("summary", &table)?;
    Ok(())
}

fn fluctuations(ctx: &Context, out: &mut Outputs) -> Result<()> {
    const COLUMNS: [&str; 6] = ["var_z0", "var_zbar", "cov", "limit_var_z0", "limit_var_zbar", "limit_cov"];
    let mut table = header(ctx, &COLUMNS);
    let rows: Vec<Result<Vec<String>>> = points(ctx)?
        .par_iter()
        .map(|&(value, cfg)| {
            let r = stationary_covariance(&cfg.model, -1.0)?;
            let cells = [r.var_z0, r.var_zbar, r.cov, r.limit_var_z0, r.limit_var_zbar, r.limit_cov]
                .iter()
                .map(|&v| num(v))
                .collect();
            Ok(row(ctx, &COLUMNS, value, cells))
        })
        .collect();
    for r in rows {
        table.push(r?);
    }
    out.table("summary", &table)?;
    Ok(())
}

fn options(solver: &SolverArgs) -> Result<BvpOptions> {
    if solver.max_iterations == 0 {
        return Err(CliError::Config("--max-iterations must be at least 1".into()));
    }
    let mut opts = BvpOptions::default();
    opts.newton.max_iterations = solver.max_iterations;
    Ok(opts)
}

/// Unit steps from `0` up to `h0`, ending exactly at `h0`.
fn schedule_to(h0: f64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..).map(f64::from).take_while(|&v| v < h0).collect();
    s.push(h0);
    s
}

const LDP_COLUMNS: [&str; 6] = [
    "h0",
    "rate_infimum",
    "converged",
    "iterations",
    "log_probability",
    "ode_residual",
];

fn ldp_cells(h0: f64, sol: Option<&BvpSolution>, n_agents: usize) -> Vec<String> {
    match sol {
        Some(s) => {
            let logp = transition_probability(s.rate_value.max(0.0), n_agents)
                .map_or(f64::NAN, |e| e.log_probability);
            vec![
                num(h0),
                num(s.rate_value),
                s.converged.to_string(),
                s.newton_iterations.to_string(),
                num(logp),
                num(s.ode_residual_norm),
            ]
        }
        None => vec![
            num(h0),
            num(f64::NAN),
            "false".into(),
            "0".into(),
            num(f64::NAN),
            num(f64::NAN),
        ],
    }
}

/// Outcome of one continuation run: solutions per requested `h0`, plus the
/// error and last iterate when it stopped early.
struct LdpRun {
    solutions: Vec<BvpSolution>,
    failure: Option<(sysrisk::Error, Option<BvpSolution>)>,
}

fn run_continuation(cfg: &ExperimentConfig, schedule: &[f64], solver: &SolverArgs) -> Result<LdpRun> {
    let opts = options(solver)?;
    // start from h0 = 0, where the preset guesses are reliable
    let prepend = schedule.first().is_some_and(|&h| h > 0.0);
    let full: Vec<f64> = prepend.then_some(0.0).into_iter().chain(schedule.iter().copied()).collect();
    let (mut solutions, outcome) =
        continue_in_h0_partial(&cfg.model, cfg.sim.t_final, &full, solver.mesh, &opts);
    if prepend && !solutions.is_empty() {
        solutions.remove(0);
    }
    let failure = match outcome {
        Ok(()) => None,
        Err(e @ sysrisk::Error::Continuation { .. }) => {
            let last = match &e {
                sysrisk::Error::Continuation { last, .. } => last.as_deref().cloned(),
                _ => None,
            };
            Some((e, last))
        }
        Err(e) => return Err(e.into()),
    };
    Ok(LdpRun { solutions, failure })
}

fn ldp_path(ctx: &Context, solver: &SolverArgs, out: &mut Outputs) -> Result<()> {
    if ctx.sweep.is_some() {
        return Err(CliError::Config("ldp-path takes no --sweep; use ldp-sweep".into()));
    }
    let cfg = ctx.config;
    let h0 = cfg.model.h0;
    let run = run_continuation(&cfg, &schedule_to(h0), solver)?;
    let mut table = Table::new(LDP_COLUMNS);
    match run.failure {
        None => {
            let sol = run.solutions.last().expect("schedule is non-empty");
            out.write("path", "csv", sol.grid.to_csv().as_bytes())?;
            table.push(ldp_cells(h0, Some(sol), cfg.model.n_agents));
            out.table("summary", &table)?;
            Ok(())
        }
        Some((err, last)) => {
            if let Some(last) = &last {
                out.write("last_iterate", "csv", last.grid.to_csv().as_bytes())?;
            }
            table.push(ldp_cells(h0, last.as_ref(), cfg.model.n_agents));
            out.table("summary", &table)?;
            Err(CliError::NonConvergence(err.to_string()))
        }
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| CliError::Config(format!("--h0: `{v}` is not a nonnegative number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config("--h0 values must be strictly increasing".into()));
    }
    Ok(values)
}

fn ldp_sweep(ctx: &Context, solver: &SolverArgs, h0_list: Option<&str>, out: &mut Outputs) -> Result<()> {
    let sweep_h0 = ctx.sweep.as_ref().filter(|s| s.name == "h0");
    let schedule = match (h0_list, sweep_h0, &ctx.sweep) {
        (Some(_), _, Some(_)) => {
            return Err(CliError::Config("give either --h0 or --sweep, not both".into()));
        }
        (Some(list), _, None) => Some(parse_list(list)?),
        (None, Some(s), _) => Some(s.values()),
        (None, None, Some(_)) => None,
        (None, None, None) => {
            return Err(CliError::Config("ldp-sweep needs --h0 LIST or --sweep".into()));
        }
    };
    let n_agents = ctx.config.model.n_agents;

    if let Some(schedule) = schedule {
        if schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config("h0 schedule must be strictly increasing".into()));
        }
        let run = run_continuation(&ctx.config, &schedule, solver)?;
        let mut table = Table::new(LDP_COLUMNS);
        for (i, &h0) in schedule.iter().enumerate() {
            table.push(ldp_cells(h0, run.solutions.get(i), n_agents));
        }
        out.table("summary", &table)?;
        return match run.failure {
            None => Ok(()),
            Some((err, last)) => {
                if let Some(last) = last {
                    out.write("last_iterate", "csv", last.grid.to_csv().as_bytes())?;
                }
                Err(CliError::NonConvergence(err.to_string()))
            }
        };
    }

    // another parameter swept: independent continuation to the configured h0
    let pts = points(ctx)?;
    let runs: Vec<Result<LdpRun>> = pts
        .par_iter()
        .map(|(_, cfg)| run_continuation(cfg, &schedule_to(cfg.model.h0), solver))
        .collect();
    let mut table = header(ctx, &LDP_COLUMNS);
    let mut failures = Vec::new();
    for ((value, cfg), run) in pts.iter().zip(runs) {
        let run = run?;
        let sol = run.solutions.last().filter(|_| run.failure.is_none());
        table.push(row(ctx, &LDP_COLUMNS, *value, ldp_cells(cfg.model.h0, sol, n_agents)));
        if let Some((err, _)) = run.failure {
            failures.push(format!("{}: {err}", value.map_or(String::new(), num)));
        }
    }
    out.table("summary", &table)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::NonConvergence(failures.join("; ")))
    }
}

const RICCATI_COLUMNS: [&str; 11] = [
    "a_ode",
    "b_ode",
    "d_ode",
    "e_ode",
    "ode_steady",
    "a_inf",
    "b_inf",
    "d_inf",
    "e_inf",
    "d_inf_closed_form",
    "algebraic_residual",
];

fn riccati(ctx: &Context, stride: Option<usize>, out: &mut Outputs) -> Result<()> {
    let pts = points(ctx)?;
    let stride = resolve_stride(stride, ctx.config.sim.n_steps())?;
    let results: Vec<Result<(Vec<String>, PathGrid)>> = pts
        .par_iter()
        .map(|&(value, cfg)| {
            let c = control_of(&cfg)?;
            let tr = integrate_riccati(&cfg.model, &c, cfg.sim.dt)?;
            let st = solve_algebraic_riccati(&cfg.model, &c)?;
            let mut cells: Vec<String> = tr.steady.as_array().iter().map(|&v| num(v)).collect();
            cells.push(tr.steady.converged.to_string());
            cells.extend(st.as_array().iter().map(|&v| num(v)));
            cells.push(num(d_inf_closed_form(cfg.model.theta, c.theta_c)));
            cells.push(num(algebraic_residual(&st, &cfg.model, &c)));
            Ok((row(ctx, &RICCATI_COLUMNS, value, cells), tr.grid))
        })
        .collect();
    let mut table = header(ctx, &RICCATI_COLUMNS);
    let mut grids = Vec::new();
    for r in results {
        let (cells, grid) = r?;
        table.push(cells);
        grids.push(grid);
    }
    if ctx.sweep.is_none() {
        out.write("trajectory", "csv", thin(&grids[0], stride)?.to_csv().as_bytes())?;
    }
    out.table("summary", &table)?;
    Ok(())
}

const CONTROL_COLUMNS: [&str; 9] = [
    "seed",
    "b_inf",
    "d_inf",
    "e_inf",
    "effective_coupling",
    "transitions_free",
    "transitions_controlled",
    "var_xbar_free",
    "var_xbar_controlled",
];

fn control_demo(ctx: &Context, stride: Option<usize>, out: &mut Outputs) -> Result<()> {
    let pts = points(ctx)?;
    let stride = resolve_stride(stride, ctx.config.sim.n_steps())?;
    let results: Vec<Result<(Vec<String>, PathGrid)>> = pts
        .par_iter()
        .map(|&(value, cfg)| {
            let (p, sim) = (cfg.model, cfg.sim);
            let c = control_of(&cfg)?;
            let steady = solve_algebraic_riccati(&p, &c)?;
            let law = build_feedback(&steady, c.theta_c)?;
            let free = simulate_reduced(&p, &sim)?;
            let ctrl = simulate_controlled(&p, &sim, &law)?;
            let burn = sim.burn_in_steps();
            let var = |g: &PathGrid| -> Result<f64> {
                let x = &g.series("xbar")?[burn..];
                Ok(sample_covariance(x, x).0)
            };
            let cells = vec![
                sim.seed.to_string(),
                num(law.b_inf()),
                num(law.d_inf()),
                num(law.e_inf()),
                num(law.effective_coupling(p.theta)),
                count_transitions(free.series("xbar")?, BAND).to_string(),
                count_transitions(ctrl.series("xbar")?, BAND).to_string(),
                num(var(&free)?),
                num(var(&ctrl)?),
            ];
            let paths = PathGrid::from_times(free.t().to_vec())?
                .with_series("x0_free", free.series("x0")?.to_vec())?
                .with_series("xbar_free", free.series("xbar")?.to_vec())?
                .with_series("x0_controlled", ctrl.series("x0")?.to_vec())?
                .with_series("xbar_controlled", ctrl.series("xbar")?.to_vec())?
                .with_series("control", ctrl.series("control")?.to_vec())?;
            Ok((row(ctx, &CONTROL_COLUMNS, value, cells), paths))
        })
        .collect();
    let mut table = header(ctx, &CONTROL_COLUMNS);
    let mut grids = Vec::new();
    for r in results {
        let (cells, grid) = r?;
        table.push(cells);
        grids.push(grid);
    }
    if ctx.sweep.is_none() {
        out.write("path", "csv", thin(&grids[0], stride)?.to_csv().as_bytes())?;
    }
    out.table("summary", &table)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_stride_divides_steps() {
        assert_eq!(resolve_stride(None, 1_000_000).unwrap(), 100);
        assert_eq!(resolve_stride(None, 500).unwrap(), 1);
        assert_eq!(resolve_stride(None, 10_007).unwrap(), 10_007);
        assert!(resolve_stride(Some(3), 100).is_err());
        assert!(resolve_stride(Some(0), 100).is_err());
    }

    #[test]
    fn schedule_ends_at_target() {
        assert_eq!(schedule_to(0.0), vec![0.0]);
        assert_eq!(schedule_to(2.0), vec![0.0, 1.0, 2.0]);
        assert_eq!(schedule_to(1.5), vec![0.0, 1.0, 1.5]);
    }

    #[test]
    fn h0_list_parsing() {
        assert_eq!(parse_list("0, 1,2.5").unwrap(), vec![0.0, 1.0, 2.5]);
        assert!(parse_list("1,1").is_err());
        assert!(parse_list("0,x").is_err());
        assert!(parse_list("-1").is_err());
    }
}
