//! The two numerical studies: a manufactured Gaussian vortex and a
//! lid-driven cavity, with CSV output per level and per Picard iteration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};

use crate::adapt::{adaptive_loop, AdaptConfig, AdaptObserver, LevelRecord, LevelView};
use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::estimator::{Aggregation, IndicatorTable};
use crate::mesh::{build_uniform_unit_square, Mesh, Point};
use crate::output::{write_state, write_vtk};
use crate::picard::{IterationRecord, PicardConfig};
use crate::problem::{PhysicalParams, ProblemData};
use crate::state::DiscreteState;
use crate::verification::{manufactured_data, manufactured_params, ExactSolution, ForceCoupling, MANUFACTURED_DELTA};

/// Top-lid concentration of the cavity, as printed.
pub const CAVITY_TOP_DEFAULT: &str = "20*x*(x-1)*y*(y-1)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Manufactured,
    Cavity,
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manufactured" => Ok(Case::Manufactured),
            "cavity" => Ok(Case::Cavity),
            other => Err(Error::InvalidConfig(format!("unknown case '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Uniform,
    Adaptive,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "adaptive" => Ok(Mode::Adaptive),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: Case,
    /// Cells per side of the initial grid.
    pub n: usize,
    pub mode: Mode,
    pub theta: f64,
    /// Damping; the case default when `None`.
    pub gamma: Option<f64>,
    /// Forchheimer coefficient; the case default when `None`.
    pub beta: Option<f64>,
    pub gamma_bar: f64,
    pub eps_tol: f64,
    pub max_levels: usize,
    pub max_picard: usize,
    pub aggregation: Aggregation,
    /// Replacement for the cavity lid profile, an expression in `x`, `y`.
    pub cavity_top_expr: Option<String>,
    pub out: PathBuf,
    /// Write VTK, state and indicator files per level.
    pub dump: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            case: Case::Manufactured,
            n: 10,
            mode: Mode::Adaptive,
            theta: 0.5,
            gamma: None,
            beta: None,
            gamma_bar: 0.01,
            eps_tol: 1e-8,
            max_levels: 6,
            max_picard: 50,
            aggregation: Aggregation::ElementSum,
            cavity_top_expr: None,
            out: PathBuf::from("out"),
            dump: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("bad value '{value}' for '{key}'"))),
    }
}

impl ExperimentConfig {
    /// Sets one field from a `key=value` pair; keys match the long flags.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "case" => self.case = value.parse()?,
            "n" => self.n = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "theta" => self.theta = parse(key, value)?,
            "gamma" => self.gamma = Some(parse(key, value)?),
            "beta" => self.beta = Some(parse(key, value)?),
            "gamma-bar" => self.gamma_bar = parse(key, value)?,
            "eps" => self.eps_tol = parse(key, value)?,
            "max-levels" => self.max_levels = parse(key, value)?,
            "max-picard" => self.max_picard = parse(key, value)?,
            "aggregation" => self.aggregation = value.parse()?,
            "cavity-top-expr" => self.cavity_top_expr = Some(value.to_string()),
            "out" => self.out = PathBuf::from(value),
            "dump" => self.dump = parse_bool(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.cavity_top_expr.is_some() && self.case != Case::Cavity {
            return Err(Error::InvalidConfig("cavity-top-expr only applies to the cavity case".into()));
        }
        self.adapt_config().validate()?;
        self.picard_config().validate()
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        AdaptConfig {
            theta: self.theta,
            eps_tol: self.eps_tol,
            max_levels: self.max_levels,
            uniform_mode: self.mode == Mode::Uniform,
        }
    }

    pub fn picard_config(&self) -> PicardConfig {
        let mut c = PicardConfig { gamma_bar: self.gamma_bar, max_iterations: self.max_picard, ..Default::default() };
        c.estimator.aggregation = self.aggregation;
        c
    }
}

/// Everything needed to start the loop.
pub struct Setup {
    pub mesh: Mesh,
    pub params: PhysicalParams,
    pub data: ProblemData,
    pub exact: Option<ExactSolution>,
}

/// Compiles an expression in `x` and `y`.
pub fn compile_expression(expr: &str) -> Result<Arc<dyn Fn(Point) -> f64 + Send + Sync>> {
    let tree: Node<DefaultNumericTypes> =
        build_operator_tree(expr).map_err(|e| Error::InvalidConfig(format!("expression '{expr}': {e}")))?;
    let eval = move |x: Point| -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x[0])).map_err(|e| e.to_string())?;
        ctx.set_value("y".into(), Value::Float(x[1])).map_err(|e| e.to_string())?;
        tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    };
    eval([0.5, 1.0]).map_err(|e| Error::InvalidConfig(format!("expression '{expr}': {e}")))?;
    Ok(Arc::new(move |x| eval(x).unwrap_or(f64::NAN)))
}

/// Cavity data: `K = I`, `μ = ρ = α = r0 = 1`, `β = 20`, `γ = 10`, `f0 = 0`,
/// `f1(C) = (10C, 10C)`, `g = 0`, the lid profile on `y = 1` and zero
/// concentration on the other sides.
pub fn cavity_setup(top_expr: &str) -> Result<(PhysicalParams, ProblemData)> {
    let params = PhysicalParams { beta: 20.0, gamma: 10.0, ..PhysicalParams::unit() };
    let top = compile_expression(top_expr)?;
    let data = ProblemData {
        f1: Arc::new(|c| [10.0 * c, 10.0 * c]),
        f1_lipschitz: 10.0 * 2f64.sqrt(),
        concentration_boundary: Arc::new(move |x| if (x[1] - 1.0).abs() < 1e-12 { top(x) } else { 0.0 }),
        ..ProblemData::zero()
    };
    Ok((params, data))
}

/// Mesh, coefficients and data for a configuration.
pub fn setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let mesh = build_uniform_unit_square(config.n)?;
    let (mut params, exact) = match config.case {
        Case::Manufactured => (manufactured_params(), Some(ExactSolution::new(MANUFACTURED_DELTA))),
        Case::Cavity => (cavity_setup(CAVITY_TOP_DEFAULT)?.0, None),
    };
    if let Some(g) = config.gamma {
        params.gamma = g;
    }
    if let Some(b) = config.beta {
        params.beta = b;
    }
    params.validate()?;
    let data = match (&exact, config.case) {
        (Some(ex), _) => manufactured_data(&params, ex, ForceCoupling::Standard),
        (None, _) => cavity_setup(config.cavity_top_expr.as_deref().unwrap_or(CAVITY_TOP_DEFAULT))?.1,
    };
    Ok(Setup { mesh, params, data, exact })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRACE_HEADER: &str = "level,iteration,eta_L,eta_D,ratio,flow_iters,transport_iters";

pub fn levels_header(case: Case) -> &'static str {
    match case {
        Case::Manufactured => {
            "level,vertices,triangles,dof,eta_L,eta_D,picard_iters,stop_reason,err_u_L3,err_p_W13_2,err_C_H1,Err,EI,rate"
        }
        Case::Cavity => "level,vertices,triangles,dof,eta_L,eta_D,picard_iters,stop_reason,E_tot",
    }
}

/// Streams the CSV files and per-level dumps; rows are flushed as written so
/// partial output survives a failing level.
pub struct CsvWriter {
    case: Case,
    dir: PathBuf,
    dump: bool,
    levels: BufWriter<File>,
    trace: BufWriter<File>,
    previous_err: Option<(usize, f64)>,
    error: Option<std::io::Error>,
}

impl CsvWriter {
    pub fn create(dir: &Path, case: Case, dump: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut levels = BufWriter::new(File::create(dir.join("levels.csv"))?);
        let mut trace = BufWriter::new(File::create(dir.join("trace.csv"))?);
        writeln!(levels, "{}", levels_header(case))?;
        writeln!(trace, "{TRACE_HEADER}")?;
        levels.flush()?;
        trace.flush()?;
        Ok(CsvWriter { case, dir: dir.to_path_buf(), dump, levels, trace, previous_err: None, error: None })
    }

    fn level_row(&mut self, r: &LevelRecord) -> String {
        let mut row = format!(
            "{},{},{},{},{},{},{},{}",
            r.level,
            r.vertices,
            r.triangles,
            r.dof,
            fmt(r.eta_l),
            fmt(r.eta_d),
            r.picard_iterations,
            r.stop_reason
        );
        match self.case {
            Case::Manufactured => {
                if let Some(e) = &r.errors {
                    let rate = self
                        .previous_err
                        .map(|(dof, err)| fmt((e.err.log10() - err.log10()) / ((r.dof as f64).log10() - (dof as f64).log10())))
                        .unwrap_or_default();
                    self.previous_err = Some((r.dof, e.err));
                    let ei = e.effectivity_index(r.eta_l, r.eta_d);
                    row += &format!(
                        ",{},{},{},{},{},{rate}",
                        fmt(e.err_u_l3),
                        fmt(e.err_grad_p_l32),
                        fmt(e.err_c_h1),
                        fmt(e.err),
                        fmt(ei)
                    );
                } else {
                    row += ",,,,,,";
                }
            }
            Case::Cavity => row += &format!(",{}", fmt(r.e_tot)),
        }
        row
    }

    fn dump_level(&self, view: &LevelView) -> Result<()> {
        let k = view.record.level;
        view.mesh.write_text(BufWriter::new(File::create(self.dir.join(format!("mesh_level{k}.txt")))?))?;
        if !self.dump {
            return Ok(());
        }
        let title = format!("level {k}");
        write_vtk(
            view.mesh,
            view.dofmap,
            &view.outcome.state,
            Some(&view.outcome.table),
            &title,
            BufWriter::new(File::create(self.dir.join(format!("level{k}.vtk")))?),
        )?;
        view.outcome
            .table
            .write_csv(view.mesh, BufWriter::new(File::create(self.dir.join(format!("indicators_level{k}.csv")))?))?;
        write_state(&view.outcome.state, BufWriter::new(File::create(self.dir.join(format!("state_level{k}.txt")))?))?;
        write_state(&view.outcome.previous, BufWriter::new(File::create(self.dir.join(format!("previous_level{k}.txt")))?))?;
        Ok(())
    }

    /// Flushes both files and reports any error swallowed by the
    /// per-iteration hook.
    pub fn finish(&mut self) -> Result<()> {
        self.levels.flush()?;
        self.trace.flush()?;
        match self.error.take() {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

impl AdaptObserver for CsvWriter {
    fn iteration(&mut self, level: usize, r: &IterationRecord, _: &DiscreteState, _: &IndicatorTable) {
        let res = writeln!(
            self.trace,
            "{level},{},{},{},{},{},{}",
            r.iteration,
            fmt(r.eta_l),
            fmt(r.eta_d),
            fmt(r.eta_l / r.eta_d),
            r.solves.flow.iterations,
            r.solves.transport.iterations
        )
        .and_then(|_| self.trace.flush());
        if let (Err(e), None) = (res, &self.error) {
            self.error = Some(e);
        }
    }

    fn level(&mut self, view: &LevelView) -> Result<()> {
        let row = self.level_row(view.record);
        writeln!(self.levels, "{row}")?;
        self.levels.flush()?;
        self.dump_level(view)
    }
}

/// Observer that forwards to two others.
pub struct Tee<'a>(pub &'a mut dyn AdaptObserver, pub &'a mut dyn AdaptObserver);

impl AdaptObserver for Tee<'_> {
    fn iteration(&mut self, level: usize, r: &IterationRecord, s: &DiscreteState, t: &IndicatorTable) {
        self.0.iteration(level, r, s, t);
        self.1.iteration(level, r, s, t);
    }

    fn level(&mut self, view: &LevelView) -> Result<()> {
        self.0.level(view)?;
        self.1.level(view)
    }
}

/// Runs one experiment and writes its output under `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<LevelRecord>> {
    run_observed(config, &mut ())
}

/// As [`run`], also feeding `extra` with every iteration and level.
pub fn run_observed(config: &ExperimentConfig, extra: &mut dyn AdaptObserver) -> Result<Vec<LevelRecord>> {
    let s = setup(config)?;
    let mut csv = CsvWriter::create(&config.out, config.case, config.dump)?;
    let result = adaptive_loop(
        s.mesh,
        &s.params,
        &s.data,
        &config.picard_config(),
        &config.adapt_config(),
        s.exact.as_ref(),
        &mut Tee(&mut csv, extra),
    );
    let flushed = csv.finish();
    let records = result?;
    flushed?;
    Ok(records)
}

/// Reads a level's dumped fields back: mesh text, and the two states.
pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    let w: Vec<&str> = header.split_whitespace().collect();
    if w.len() != 6 || w[1] != "vertices" || w[3] != "triangles" || w[5] != "edges" {
        return Err(Error::Parse(format!("bad mesh header '{header}'")));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    let (nv, nt) = (count(w[0])?, count(w[2])?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated vertices".into()))?;
        let c: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("'{s}': {e}"))))
            .collect::<Result<_>>()?;
        if c.len() != 2 {
            return Err(Error::Parse(format!("bad vertex row '{line}'")));
        }
        vertices.push([c[0], c[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated triangles".into()))?;
        let c: Vec<usize> = line.split_whitespace().map(count).collect::<Result<_>>()?;
        if c.len() != 3 {
            return Err(Error::Parse(format!("bad triangle row '{line}'")));
        }
        triangles.push([c[0], c[1], c[2]]);
    }
    Mesh::from_triangles(vertices, triangles, crate::mesh::RefinementEdgeRule::AsGiven)
}

/// Dirichlet data used by [`setup`], for rebuilding a dumped level's dofmap.
pub fn build_level_dofmap(mesh: &Mesh, data: &ProblemData) -> DofMap {
    let b = data.concentration_boundary.clone();
    crate::dofmap::build_dofmap(mesh, move |x| b(x))
}
