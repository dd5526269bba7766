//! Estimate-mark-refine loop.

use crate::assembly::Problem;
use crate::dofmap::{build_dofmap, DofMap};
use crate::error::{Error, Result};
use crate::estimator::IndicatorTable;
use crate::mesh::{refine, MarkSet, Mesh};
use crate::picard::{run_to_convergence_with, IterationRecord, PicardConfig, PicardOutcome, StopReason};
use crate::problem::{PhysicalParams, ProblemData};
use crate::state::DiscreteState;
use crate::verification::{discrete_norms, error_norms, relative_indicator_error, ErrorReport, ExactSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    /// Dörfler bulk fraction.
    pub theta: f64,
    /// Stop once `η^D` drops below this.
    pub eps_tol: f64,
    pub max_levels: usize,
    /// Refine every element twice per level instead of marking.
    pub uniform_mode: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig { theta: 0.5, eps_tol: 1e-8, max_levels: 6, uniform_mode: false }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("eps_tol must be positive, got {}", self.eps_tol)));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Smallest prefix of the elements sorted by decreasing value (ties by
/// index) whose squared sum reaches `θ²` of the total. Zero values are
/// never marked.
pub fn mark_dorfler(values: &[f64], theta: f64) -> MarkSet {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&t| values[t] * values[t]).sum();
    // rounding slack so an exact θ² share is accepted
    let target = theta * theta * total - 4.0 * f64::EPSILON * total;
    let mut marks = MarkSet::new();
    let mut acc = 0.0;
    for &t in &order {
        if (!marks.is_empty() && acc >= target) || values[t] <= 0.0 {
            break;
        }
        acc += values[t] * values[t];
        marks.insert(t);
    }
    marks
}

/// Summary of one level of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub dof: usize,
    pub eta_l: f64,
    pub eta_d: f64,
    pub picard_iterations: usize,
    pub stop_reason: StopReason,
    /// `η^D` relative to the norms of the discrete solution.
    pub e_tot: f64,
    pub errors: Option<ErrorReport>,
}

impl LevelRecord {
    /// The Picard budget ran out before the stopping criterion held.
    pub fn flagged(&self) -> bool {
        self.stop_reason == StopReason::MaxIterations
    }

    pub fn effectivity_index(&self) -> Option<f64> {
        self.errors.map(|e| e.effectivity_index(self.eta_l, self.eta_d))
    }
}

/// Everything known about a finished level.
pub struct LevelView<'a> {
    pub record: &'a LevelRecord,
    pub mesh: &'a Mesh,
    pub dofmap: &'a DofMap,
    pub outcome: &'a PicardOutcome,
    /// Elements marked for refinement; `None` on the last level.
    pub marks: Option<&'a MarkSet>,
}

/// Hooks into the loop, e.g. for streaming output.
pub trait AdaptObserver {
    fn iteration(&mut self, _level: usize, _record: &IterationRecord, _state: &DiscreteState, _table: &IndicatorTable) {}

    fn level(&mut self, _view: &LevelView) -> Result<()> {
        Ok(())
    }
}

impl AdaptObserver for () {}

/// Runs Picard to the stopping criterion on each mesh, then marks and
/// refines until `η^D < ε` or `max_levels` meshes were solved. The state is
/// transferred between meshes and the Picard counter restarts at 1.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_loop(
    initial: Mesh,
    params: &PhysicalParams,
    data: &ProblemData,
    picard: &PicardConfig,
    adapt: &AdaptConfig,
    exact: Option<&ExactSolution>,
    observer: &mut dyn AdaptObserver,
) -> Result<Vec<LevelRecord>> {
    adapt.validate()?;
    picard.validate()?;
    params.validate()?;
    data.validate()?;
    let boundary = data.concentration_boundary.clone();
    let dirichlet = move |x| boundary(x);
    let mut mesh = initial;
    let mut dofmap = build_dofmap(&mesh, &dirichlet);
    let mut state = DiscreteState::initial(&dofmap);
    let mut records = Vec::new();
    for level in 0..adapt.max_levels {
        let problem = Problem::new(&mesh, &dofmap, params, data)?;
        let outcome = run_to_convergence_with(&problem, state, picard, |rec, s, t| observer.iteration(level, rec, s, t))?;
        let degree = picard.estimator.degree;
        let norms = discrete_norms(&mesh, &dofmap, &outcome.state, degree)?;
        let errors = exact.map(|ex| error_norms(&mesh, &dofmap, &outcome.state, ex, degree)).transpose()?;
        let record = LevelRecord {
            level,
            vertices: mesh.n_vertices(),
            triangles: mesh.n_triangles(),
            dof: dofmap.total_dof(),
            eta_l: outcome.table.eta_l,
            eta_d: outcome.table.eta_d,
            picard_iterations: outcome.trace.iterations(),
            stop_reason: outcome.trace.stop_reason,
            e_tot: relative_indicator_error(outcome.table.eta_d, &norms),
            errors,
        };
        let last = level + 1 == adapt.max_levels || record.eta_d < adapt.eps_tol;
        let marks = if last {
            None
        } else if adapt.uniform_mode {
            Some(MarkSet::all(&mesh))
        } else {
            Some(mark_dorfler(&outcome.table.eta_d_elem, adapt.theta))
        };
        observer.level(&LevelView { record: &record, mesh: &mesh, dofmap: &dofmap, outcome: &outcome, marks: marks.as_ref() })?;
        records.push(record);
        let Some(marks) = marks.filter(|m| !m.is_empty()) else { break };

        let sweeps = if adapt.uniform_mode { 2 } else { 1 };
        let mut next_state = outcome.state;
        let mut marks = marks;
        for _ in 0..sweeps {
            let r = refine(&mesh, &marks)?;
            let next_dofmap = build_dofmap(&r.mesh, &dirichlet);
            next_state = next_state.prolongate(&r, &dofmap, &next_dofmap)?;
            mesh = r.mesh;
            dofmap = next_dofmap;
            marks = MarkSet::all(&mesh);
        }
        state = next_state;
    }
    Ok(records)
}
