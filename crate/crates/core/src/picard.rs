//! Damped Picard iteration: a linearised Darcy-Forchheimer solve followed by
//! a transport solve, repeated until the linearisation indicator falls below
//! a fraction of the discretisation indicator.

use crate::assembly::{assemble_darcy_step, assemble_transport_step, AssemblyOptions, Problem};
use crate::error::{Error, Result};
use crate::estimator::{estimate, stopping, EstimatorOptions, IndicatorTable};
use crate::linsolve::{gmres_solve, GmresConfig, SolveReport};
use crate::state::DiscreteState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// Stopping factor in `η^L ≤ γ̄ η^D`.
    pub gamma_bar: f64,
    pub max_iterations: usize,
    pub solver: GmresConfig,
    pub assembly: AssemblyOptions,
    pub estimator: EstimatorOptions,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            gamma_bar: 0.01,
            max_iterations: 50,
            solver: GmresConfig::default(),
            assembly: AssemblyOptions::default(),
            estimator: EstimatorOptions::default(),
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_bar > 0.0 && self.gamma_bar < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma_bar must lie in (0, 1), got {}", self.gamma_bar)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub flow: SolveReport,
    pub transport: SolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CriterionMet,
    MaxIterations,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::CriterionMet => "criterion-met",
            StopReason::MaxIterations => "max-iterations",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration counter, reset on every mesh.
    pub iteration: usize,
    pub eta_l: f64,
    pub eta_d: f64,
    pub solves: StepReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// True when `η^L` grew over each of the last three iterations, a hint
    /// that the damping `γ` is too small.
    pub fn is_diverging(&self) -> bool {
        let n = self.records.len();
        n >= 4 && (n - 3..n).all(|k| self.records[k].eta_l > self.records[k - 1].eta_l)
    }
}

fn solve(matrix: &crate::linsolve::CsrMatrix, rhs: &[f64], x0: &[f64], config: &GmresConfig) -> Result<(Vec<f64>, SolveReport)> {
    let (x, report) = gmres_solve(matrix, rhs, config, Some(x0))?;
    if !report.converged {
        return Err(Error::NotConverged { report });
    }
    Ok((x, report))
}

/// One Picard step: the flow system around `state`, then the transport
/// system with the new velocity.
pub fn picard_step(problem: &Problem, state: &DiscreteState, config: &PicardConfig) -> Result<(DiscreteState, StepReport)> {
    let dofmap = problem.dofmap;
    let flow_sys = assemble_darcy_step(problem, state, &config.assembly)?;
    let mut x0 = Vec::with_capacity(dofmap.n_flow_system());
    x0.extend_from_slice(&state.velocity);
    x0.extend_from_slice(&state.pressure);
    x0.push(0.0);
    let (x, flow) = solve(&flow_sys.matrix, &flow_sys.rhs, &x0, &config.solver)?;
    let nv = dofmap.n_velocity();
    let mut next = DiscreteState::from_parts(
        dofmap,
        x[..nv].to_vec(),
        x[nv..nv + dofmap.n_pressure()].to_vec(),
        state.concentration.clone(),
    )?;
    next.recenter_pressure(problem.mesh);

    let tr_sys = assemble_transport_step(problem, &next, &config.assembly)?;
    let (mut c, transport) = solve(&tr_sys.matrix, &tr_sys.rhs, &state.concentration, &config.solver)?;
    for (v, cv) in c.iter_mut().enumerate() {
        if dofmap.is_dirichlet(v) {
            *cv = dofmap.dirichlet_value(v);
        }
    }
    next.concentration = c;
    Ok((next, StepReport { flow, transport }))
}

/// Result of iterating on one mesh.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub state: DiscreteState,
    /// The iterate before `state`; `η^L` compares the two.
    pub previous: DiscreteState,
    /// Indicators of the last step.
    pub table: IndicatorTable,
    pub trace: IterationTrace,
}

/// Iterates from `state0` until `η^L ≤ γ̄ η^D` or the iteration budget is
/// spent. The first criterion compares the first iterate with `state0`.
pub fn run_to_convergence(problem: &Problem, state0: DiscreteState, config: &PicardConfig) -> Result<PicardOutcome> {
    run_to_convergence_with(problem, state0, config, |_, _, _| {})
}

/// As [`run_to_convergence`], calling `observer` after every step with the
/// record, the new iterate and its indicators.
pub fn run_to_convergence_with(
    problem: &Problem,
    state0: DiscreteState,
    config: &PicardConfig,
    mut observer: impl FnMut(&IterationRecord, &DiscreteState, &IndicatorTable),
) -> Result<PicardOutcome> {
    config.validate()?;
    problem.check_state(&state0)?;
    let mut state = state0;
    let mut records = Vec::new();
    for iteration in 1..=config.max_iterations {
        let (next, solves) = picard_step(problem, &state, config)?;
        let table = estimate(problem, &state, &next, &config.estimator)?;
        let record = IterationRecord { iteration, eta_l: table.eta_l, eta_d: table.eta_d, solves };
        observer(&record, &next, &table);
        records.push(record);
        let previous = std::mem::replace(&mut state, next);
        let met = stopping(table.eta_l, table.eta_d, config.gamma_bar);
        if met || iteration == config.max_iterations {
            let stop_reason = if met { StopReason::CriterionMet } else { StopReason::MaxIterations };
            return Ok(PicardOutcome { state, previous, table, trace: IterationTrace { records, stop_reason } });
        }
    }
    unreachable!("max_iterations >= 1 is validated")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofmap::build_dofmap;
    use crate::mesh::build_uniform_unit_square;
    use crate::problem::{PhysicalParams, ProblemData};
    use std::sync::Arc;

    fn setup(n: usize) -> (crate::mesh::Mesh, PhysicalParams, ProblemData) {
        let mesh = build_uniform_unit_square(n).unwrap();
        let mut params = PhysicalParams::unit();
        params.beta = 2.0;
        params.gamma = 5.0;
        let mut data = ProblemData::zero();
        data.f0 = Arc::new(|x| [x[1] - 0.5, 0.5 - x[0]]);
        data.f1 = Arc::new(|c| [c, 0.5 * c]);
        data.g = Arc::new(|x| 1.0 + x[0]);
        (mesh, params, data)
    }

    #[test]
    fn step_keeps_dirichlet_and_mean_zero_pressure() {
        let (mesh, params, mut data) = setup(4);
        data.concentration_boundary = Arc::new(|x| x[0] * x[1]);
        let dofmap = build_dofmap(&mesh, |x| x[0] * x[1]);
        let pb = Problem::new(&mesh, &dofmap, &params, &data).unwrap();
        let s0 = DiscreteState::initial(&dofmap);
        let (s1, rep) = picard_step(&pb, &s0, &PicardConfig::default()).unwrap();
        assert!(rep.flow.converged && rep.transport.converged);
        assert!(s1.pressure_mean_integral(&mesh).abs() < 1e-12);
        for v in 0..mesh.n_vertices() {
            if mesh.is_boundary_vertex(v) {
                let x = mesh.vertex(v);
                assert_eq!(s1.concentration[v], x[0] * x[1]);
            }
        }
    }

    #[test]
    fn converges_and_meets_criterion() {
        let (mesh, params, data) = setup(4);
        let dofmap = build_dofmap(&mesh, |_| 0.0);
        let pb = Problem::new(&mesh, &dofmap, &params, &data).unwrap();
        let out = run_to_convergence(&pb, DiscreteState::initial(&dofmap), &PicardConfig::default()).unwrap();
        assert_eq!(out.trace.stop_reason, StopReason::CriterionMet);
        let last = out.trace.records.last().unwrap();
        assert!(last.eta_l <= 0.01 * last.eta_d);
        assert!(!out.trace.is_diverging());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let (mesh, params, data) = setup(3);
        let dofmap = build_dofmap(&mesh, |_| 0.0);
        let pb = Problem::new(&mesh, &dofmap, &params, &data).unwrap();
        let config = PicardConfig { max_iterations: 1, gamma_bar: 1e-9, ..Default::default() };
        let out = run_to_convergence(&pb, DiscreteState::initial(&dofmap), &config).unwrap();
        assert_eq!(out.trace.stop_reason, StopReason::MaxIterations);
        assert_eq!(out.trace.iterations(), 1);
    }

    #[test]
    fn fixed_point_is_stationary() {
        let (mesh, params, data) = setup(3);
        let dofmap = build_dofmap(&mesh, |_| 0.0);
        let pb = Problem::new(&mesh, &dofmap, &params, &data).unwrap();
        let config = PicardConfig { gamma_bar: 1e-12, max_iterations: 200, ..Default::default() };
        let out = run_to_convergence(&pb, DiscreteState::initial(&dofmap), &config).unwrap();
        let (again, _) = picard_step(&pb, &out.state, &config).unwrap();
        let scale = out.state.velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in again.velocity.iter().zip(&out.state.velocity) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let (mesh, params, data) = setup(2);
        let dofmap = build_dofmap(&mesh, |_| 0.0);
        let pb = Problem::new(&mesh, &dofmap, &params, &data).unwrap();
        let config = PicardConfig { gamma_bar: 1.5, ..Default::default() };
        assert!(run_to_convergence(&pb, DiscreteState::initial(&dofmap), &config).is_err());
    }
}
