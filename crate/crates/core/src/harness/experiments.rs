//! Experiment drivers: plain runs with on-disk artifacts, PML error against an
//! enlarged-domain reference, convergence studies, PML-versus-ABC seismogram
//! comparison and the operator self-check.

use std::path::Path;

use super::config::{InitialCondition, RunConfig};
use super::output::{
    seismogram_header, write_convergence, write_metadata, write_seismogram, write_series, write_snapshot,
    ConvergenceRow,
};
use super::simulation::Simulation;
use crate::diagnostics::{
    check_reference_margin, check_reflection_paths, convergence_rates, discrete_energy, linf_velocity,
    plane_wave_state, relative_misfit, NodeMatching,
};
use crate::error::{Error, Result};
use crate::operators::{build_operators, QuadratureKind};
use crate::solver::{Observer, Solver, State, Workspace};
use crate::sources::Receiver;

struct SeriesObserver {
    interval: f64,
    energy: Option<Vec<(f64, f64)>>,
    linf: Option<Vec<(f64, f64)>>,
}

impl Observer for SeriesObserver {
    fn interval(&self) -> f64 {
        self.interval
    }

    fn observe(&mut self, solver: &Solver, state: &State) -> Result<()> {
        if let Some(e) = &mut self.energy {
            e.push((state.time, discrete_energy(solver, state).value));
        }
        if let Some(l) = &mut self.linf {
            l.push((state.time, linf_velocity(solver, state)));
        }
        Ok(())
    }
}

struct ReceiverObserver {
    interval: f64,
    receivers: Vec<Receiver>,
}

impl Observer for ReceiverObserver {
    fn interval(&self) -> f64 {
        self.interval
    }

    fn observe(&mut self, solver: &Solver, state: &State) -> Result<()> {
        for r in &mut self.receivers {
            r.record(state.time, solver.q_block(&state.data, r.element));
        }
        Ok(())
    }
}

struct SnapshotObserver<'a> {
    interval: f64,
    dir: &'a Path,
    format: super::config::SnapshotFormat,
    count: usize,
}

impl Observer for SnapshotObserver<'_> {
    fn interval(&self) -> f64 {
        self.interval
    }

    fn observe(&mut self, solver: &Solver, state: &State) -> Result<()> {
        write_snapshot(self.dir, self.count, solver, state, self.format)?;
        self.count += 1;
        Ok(())
    }
}

/// Everything a plain run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub energy: Vec<(f64, f64)>,
    pub linf: Vec<(f64, f64)>,
    pub receivers: Vec<Receiver>,
    pub final_state: State,
    pub steps: usize,
}

impl RunOutput {
    /// The L∞ sample closest to time `t`.
    pub fn linf_at(&self, t: f64) -> Option<f64> {
        self.linf
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|s| s.1)
    }

    /// Largest L∞ sample with time in `[t0, t1]`.
    pub fn linf_max(&self, t0: f64, t1: f64) -> f64 {
        self.linf.iter().filter(|s| s.0 >= t0 && s.0 <= t1).map(|s| s.1).fold(0.0, f64::max)
    }
}

/// Runs the configured simulation to `t_end`. With an output directory the
/// metadata, series, seismograms and snapshots are written there; outputs
/// gathered so far are written even if the run diverges.
pub fn run_simulation(sim: &Simulation, out_dir: Option<&Path>) -> Result<RunOutput> {
    let cfg = &sim.config;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_metadata(&dir.join("metadata.txt"), &sim.metadata)?;
        std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    let mut series = SeriesObserver {
        interval: cfg.output.interval,
        energy: cfg.output.energy.then(Vec::new),
        linf: cfg.output.linf.then(Vec::new),
    };
    let mut recorders = ReceiverObserver { interval: cfg.output.seismogram_interval, receivers: sim.receivers.clone() };
    let snapshot_dir = out_dir.map(|d| d.join("snapshots"));
    let mut snapshots = snapshot_dir.as_deref().filter(|_| cfg.output.snapshot_interval > 0.0).map(|dir| SnapshotObserver {
        interval: cfg.output.snapshot_interval,
        dir,
        format: cfg.output.snapshot_format,
        count: 0,
    });
    let mut state = sim.initial_state()?;
    let result = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut series, &mut recorders];
        if let Some(s) = snapshots.as_mut() {
            observers.push(s);
        }
        sim.solver.run(&mut state, cfg.t_end, sim.dt, &mut observers)
    };
    let output = RunOutput {
        energy: series.energy.unwrap_or_default(),
        linf: series.linf.unwrap_or_default(),
        receivers: recorders.receivers,
        final_state: state,
        steps: *result.as_ref().unwrap_or(&0),
    };
    if let Some(dir) = out_dir {
        if cfg.output.energy {
            write_series(&dir.join("energy.csv"), &output.energy)?;
        }
        if cfg.output.linf {
            write_series(&dir.join("linf.csv"), &output.linf)?;
        }
        for r in &output.receivers {
            write_seismogram(&dir.join("seismograms").join(format!("{}.csv", r.name)), r, cfg.dim)?;
        }
        let mut meta = sim.metadata.clone();
        meta.push(("steps".into(), output.steps.to_string()));
        meta.push((
            "status".into(),
            match &result {
                Ok(_) => "completed".into(),
                Err(e) => format!("failed: {e}"),
            },
        ));
        write_metadata(&dir.join("metadata.txt"), &meta)?;
    }
    result?;
    Ok(output)
}

/// Marches several solvers with the same step sequence as [`Solver::run`],
/// calling `sample` at step 0, every `stride` steps and at the end.
fn march_lockstep(
    solvers: &[&Solver],
    states: &mut [State],
    t_end: f64,
    dt: f64,
    stride: usize,
    mut sample: impl FnMut(&[State]) -> Result<()>,
) -> Result<()> {
    sample(states)?;
    let span = t_end - states[0].time;
    let steps = if span <= 0.0 { 0 } else { ((span / dt) * (1.0 - 1e-12)).ceil() as usize };
    let mut workspaces: Vec<Workspace> = solvers.iter().map(|_| Workspace::default()).collect();
    for step in 1..=steps {
        for ((solver, state), ws) in solvers.iter().zip(states.iter_mut()).zip(&mut workspaces) {
            let h = if step == steps { t_end - state.time } else { dt };
            solver.ader_step(state, h, ws)?;
            if step == steps {
                state.time = t_end;
            }
        }
        if step % stride == 0 || step == steps {
            sample(states)?;
        }
    }
    Ok(())
}

fn stride_for(interval: f64, dt: f64) -> usize {
    if interval > 0.0 {
        ((interval / dt).round() as usize).max(1)
    } else {
        1
    }
}

/// Grows the mesh box outward on the flagged sides, whole elements at a time,
/// until `accept(axis, side, lo, hi)` holds for each side. Material regions
/// touching a moved face follow it.
fn extend_box(
    cfg: &RunConfig,
    sides: [[bool; 2]; 3],
    accept: impl Fn(usize, usize, [f64; 3], [f64; 3]) -> bool,
) -> Result<RunConfig> {
    let mut out = cfg.clone();
    let h = cfg.spacing();
    for a in 0..cfg.dim {
        for side in 0..2 {
            if !sides[a][side] {
                continue;
            }
            let mut k = 0usize;
            loop {
                let (mut lo, mut hi) = (out.lo, out.hi);
                if side == 0 {
                    lo[a] = cfg.lo[a] - k as f64 * h[a];
                } else {
                    hi[a] = cfg.hi[a] + k as f64 * h[a];
                }
                if accept(a, side, lo, hi) {
                    break;
                }
                k += 1;
                if k > 100_000 {
                    return Err(Error::GeometryInsufficient("reference enlargement did not terminate".into()));
                }
            }
            out.elements[a] += k;
            if side == 0 {
                out.lo[a] = cfg.lo[a] - k as f64 * h[a];
            } else {
                out.hi[a] = cfg.hi[a] + k as f64 * h[a];
            }
            for m in &mut out.materials {
                if let Some((rlo, rhi)) = &mut m.region {
                    if side == 0 && rlo[a] <= cfg.lo[a] {
                        rlo[a] = out.lo[a];
                    }
                    if side == 1 && rhi[a] >= cfg.hi[a] {
                        rhi[a] = out.hi[a];
                    }
                }
            }
        }
    }
    Ok(out)
}

fn max_cp(cfg: &RunConfig) -> f64 {
    cfg.materials.iter().map(|m| m.cp).fold(0.0, f64::max)
}

/// PML error against an enlarged-domain reference.
#[derive(Clone, Debug)]
pub struct PmlErrorReport {
    /// Max over sampled times and interior nodes of the velocity difference.
    pub error: f64,
    /// `(t, error)` at each sampled time.
    pub series: Vec<(f64, f64)>,
    pub reference_lo: [f64; 3],
    pub reference_hi: [f64; 3],
    pub matched_elements: usize,
}

/// The reference configuration for [`pml_error`]: PML removed, every side that
/// carried a layer pushed out to at least `cp · t_end` beyond the interior,
/// rounded up to whole elements. Other sides are left untouched.
pub fn pml_reference_config(cfg: &RunConfig) -> Result<RunConfig> {
    let pml = cfg
        .pml
        .as_ref()
        .filter(|p| p.is_enabled())
        .ok_or_else(|| Error::Validation(vec!["pml error needs a configuration with a PML".into()]))?;
    let (ilo, ihi) = cfg.interior();
    let margin = max_cp(cfg) * cfg.t_end;
    let mut sides = [[false; 2]; 3];
    for a in 0..cfg.dim {
        for s in 0..2 {
            sides[a][s] = pml.width[a][s] > 0.0;
        }
    }
    let mut reference = extend_box(cfg, sides, |a, side, lo, hi| {
        let gap = if side == 0 { ilo[a] - lo[a] } else { hi[a] - ihi[a] };
        gap >= margin * (1.0 - 1e-12)
    })?;
    reference.pml = None;
    reference.receivers.clear();
    reference.name = format!("{}-reference", cfg.name);
    check_reference_margin(ilo, ihi, reference.lo, reference.hi, sides, cfg.dim, margin)?;
    Ok(reference)
}

/// Runs `cfg` and its enlarged reference in lockstep and measures the
/// velocity difference on the undamped interior every `output.interval`.
pub fn pml_error(cfg: &RunConfig) -> Result<PmlErrorReport> {
    let run = Simulation::new(cfg)?;
    let reference_cfg = pml_reference_config(cfg)?;
    let reference = Simulation::new(&reference_cfg)?;
    if (run.dt - reference.dt).abs() > 1e-14 * run.dt {
        return Err(Error::ShapeMismatch("run and reference time steps differ".into()));
    }
    let (ilo, ihi) = cfg.interior();
    let matching = NodeMatching::new(&run.solver, &reference.solver, ilo, ihi)?;
    let mut states = vec![run.initial_state()?, reference.initial_state()?];
    let mut series = Vec::new();
    let stride = stride_for(cfg.output.interval, run.dt);
    march_lockstep(&[&run.solver, &reference.solver], &mut states, cfg.t_end, run.dt, stride, |s| {
        series.push((s[0].time, matching.velocity_difference(&run.solver, &s[0], &reference.solver, &s[1])));
        Ok(())
    })?;
    let error = series.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(PmlErrorReport {
        error,
        series,
        reference_lo: reference_cfg.lo,
        reference_hi: reference_cfg.hi,
        matched_elements: matching.len(),
    })
}

/// Max-norm velocity error of a plane-wave run against the exact solution at
/// `t_end`.
pub fn plane_wave_error(cfg: &RunConfig) -> Result<f64> {
    let spec = match &cfg.initial {
        InitialCondition::PlaneWave(spec) => spec.clone(),
        _ => return Err(Error::Validation(vec!["plane-wave error needs planewave initial data".into()])),
    };
    let sim = Simulation::new(cfg)?;
    let mut state = sim.initial_state()?;
    sim.solver.run(&mut state, cfg.t_end, sim.dt, &mut [])?;
    let exact = plane_wave_state(&sim.solver, &spec, cfg.t_end)?;
    let matching = NodeMatching::new(&sim.solver, &sim.solver, cfg.lo, cfg.hi)?;
    Ok(matching.velocity_difference(&sim.solver, &state, &sim.solver, &exact))
}

fn level_error(cfg: &RunConfig) -> Result<f64> {
    match cfg.initial {
        InitialCondition::PlaneWave(_) => plane_wave_error(cfg),
        _ => pml_error(cfg).map(|r| r.error),
    }
}

/// h-convergence: error per element spacing (plane-wave error for planewave
/// initial data, PML error otherwise) with observed rates.
pub fn h_convergence(cfg: &RunConfig, spacings: &[f64]) -> Result<Vec<ConvergenceRow>> {
    let mut errors = Vec::with_capacity(spacings.len());
    for &h in spacings {
        let mut level = cfg.clone();
        level.set_spacing(h)?;
        level.desk_scaled = true;
        errors.push(level_error(&level)?);
    }
    rows(spacings, &errors, true)
}

/// p-convergence: error per polynomial degree; `rate` holds the error
/// reduction factor between adjacent degrees.
pub fn p_convergence(cfg: &RunConfig, degrees: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let mut errors = Vec::with_capacity(degrees.len());
    for &p in degrees {
        let mut level = cfg.clone();
        level.degree = p;
        errors.push(level_error(&level)?);
    }
    let levels: Vec<f64> = degrees.iter().map(|&p| p as f64).collect();
    rows(&levels, &errors, false)
}

fn rows(levels: &[f64], errors: &[f64], rates: bool) -> Result<Vec<ConvergenceRow>> {
    let second: Vec<Option<f64>> = if levels.len() < 2 {
        vec![]
    } else if rates {
        convergence_rates(errors, levels)?.into_iter().map(Some).collect()
    } else {
        errors.windows(2).map(|e| Some(e[0] / e[1])).collect()
    };
    Ok(levels
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (&level, &error))| ConvergenceRow { level, error, rate: if i == 0 { None } else { second[i - 1] } })
        .collect())
}

/// Writes a convergence table next to the run metadata.
pub fn write_convergence_report(dir: &Path, level_name: &str, rows: &[ConvergenceRow], cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    write_convergence(&dir.join("convergence.csv"), level_name, rows)
}

/// Seismogram misfits of a PML run and a pure-ABC run against a reference on
/// an enlarged box.
#[derive(Clone, Debug)]
pub struct AbcComparison {
    pub receiver: String,
    pub pml_misfit: f64,
    pub abc_misfit: f64,
    pub reference_lo: [f64; 3],
    pub reference_hi: [f64; 3],
    pub pml: RunOutput,
    pub abc: RunOutput,
    pub reference: RunOutput,
}

impl AbcComparison {
    pub fn ratio(&self) -> f64 {
        self.pml_misfit / self.abc_misfit
    }
}

/// The reference configuration for [`compare_abc_pml`]: PML removed and every
/// absorbing side pushed out until no reflection off it can travel from a
/// source to a receiver within `t_end`.
pub fn abc_reference_config(cfg: &RunConfig) -> Result<RunConfig> {
    if cfg.sources.is_empty() || cfg.receivers.is_empty() {
        return Err(Error::Validation(vec!["PML/ABC comparison needs sources and receivers".into()]));
    }
    let travel = max_cp(cfg) * cfg.t_end;
    let receivers: Vec<[f64; 3]> = cfg.receivers.iter().map(|r| r.location).collect();
    let mut sides = [[false; 2]; 3];
    for a in 0..cfg.dim {
        for s in 0..2 {
            sides[a][s] = cfg.boundary[a][s][..cfg.dim].iter().all(|g| *g == 0.0);
        }
    }
    let reference = extend_box(cfg, sides, |a, side, lo, hi| {
        let mut only = [[false; 2]; 3];
        only[a][side] = true;
        cfg.sources
            .iter()
            .all(|s| check_reflection_paths(s.location, &receivers, lo, hi, only, cfg.dim, travel).is_ok())
    })?;
    for s in &cfg.sources {
        check_reflection_paths(s.location, &receivers, reference.lo, reference.hi, sides, cfg.dim, travel)?;
    }
    let mut reference = reference;
    reference.pml = None;
    reference.name = format!("{}-reference", cfg.name);
    Ok(reference)
}

pub fn compare_abc_pml(cfg: &RunConfig, receiver: &str) -> Result<AbcComparison> {
    if !cfg.pml.as_ref().is_some_and(|p| p.is_enabled()) {
        return Err(Error::Validation(vec!["PML/ABC comparison needs a configuration with a PML".into()]));
    }
    let index = cfg
        .receivers
        .iter()
        .position(|r| r.name == receiver)
        .ok_or_else(|| Error::Validation(vec![format!("unknown receiver '{receiver}'")]))?;
    let mut abc_cfg = cfg.clone();
    abc_cfg.pml = None;
    abc_cfg.name = format!("{}-abc", cfg.name);
    let reference_cfg = abc_reference_config(cfg)?;
    let quiet = |c: &RunConfig| {
        let mut c = c.clone();
        c.output.energy = false;
        c.output.linf = false;
        c.output.snapshot_interval = 0.0;
        c
    };
    let pml = run_simulation(&Simulation::new(&quiet(cfg))?, None)?;
    let abc = run_simulation(&Simulation::new(&quiet(&abc_cfg))?, None)?;
    let reference = run_simulation(&Simulation::new(&quiet(&reference_cfg))?, None)?;
    let reference_samples = &reference.receivers[index].samples;
    let pml_misfit = relative_misfit(&pml.receivers[index].samples, reference_samples)?;
    let abc_misfit = relative_misfit(&abc.receivers[index].samples, reference_samples)?;
    Ok(AbcComparison {
        receiver: receiver.to_string(),
        pml_misfit,
        abc_misfit,
        reference_lo: reference_cfg.lo,
        reference_hi: reference_cfg.hi,
        pml,
        abc,
        reference,
    })
}

/// Writes the three seismogram sets and a misfit summary.
pub fn write_comparison(dir: &Path, cmp: &AbcComparison, dim: usize) -> Result<()> {
    for (label, out) in [("pml", &cmp.pml), ("abc", &cmp.abc), ("reference", &cmp.reference)] {
        for r in &out.receivers {
            write_seismogram(&dir.join(label).join(format!("{}.csv", r.name)), r, dim)?;
        }
    }
    write_metadata(
        &dir.join("comparison.txt"),
        &[
            ("receiver".into(), cmp.receiver.clone()),
            ("pml_misfit".into(), format!("{:e}", cmp.pml_misfit)),
            ("abc_misfit".into(), format!("{:e}", cmp.abc_misfit)),
            ("ratio".into(), format!("{:e}", cmp.ratio())),
            ("reference_lo".into(), format!("{:?}", &cmp.reference_lo[..dim])),
            ("reference_hi".into(), format!("{:?}", &cmp.reference_hi[..dim])),
        ],
    )
}

/// Header expected when ingesting a reference for a receiver of `cfg`.
pub fn receiver_header(cfg: &RunConfig, receiver: &Receiver) -> Vec<String> {
    seismogram_header(cfg.dim, &receiver.components)
}

/// Self-check of one operator family.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorCheck {
    pub degree: usize,
    pub kind: QuadratureKind,
    /// `‖Q + Qᵀ − B‖∞`.
    pub sbp_residual: f64,
    /// Max relative error of `D xᵏ` against `k xᵏ⁻¹` for `k ≤ P`.
    pub derivative_error: f64,
    /// `|Σ h − 2|`.
    pub weight_sum_error: f64,
}

pub fn check_operators(max_degree: usize) -> Result<Vec<OperatorCheck>> {
    let mut out = Vec::new();
    for degree in 1..=max_degree {
        for kind in QuadratureKind::ALL {
            let ops = build_operators(degree, kind)?;
            let n = ops.n();
            let mut sbp: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    sbp = sbp.max((ops.qmat[i * n + j] + ops.qmat[j * n + i] - ops.b[i * n + j]).abs());
                }
            }
            let x = ops.nodes();
            let mut deriv: f64 = 0.0;
            for k in 0..=degree {
                let f: Vec<f64> = x.iter().map(|v| v.powi(k as i32)).collect();
                let exact: Vec<f64> =
                    x.iter().map(|v| if k == 0 { 0.0 } else { k as f64 * v.powi(k as i32 - 1) }).collect();
                let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for i in 0..n {
                    let df: f64 = (0..n).map(|j| ops.d[i * n + j] * f[j]).sum();
                    deriv = deriv.max((df - exact[i]).abs() / scale);
                }
            }
            let weight_sum_error = (ops.h.iter().sum::<f64>() - 2.0).abs();
            out.push(OperatorCheck { degree, kind, sbp_residual: sbp, derivative_error: deriv, weight_sum_error });
        }
    }
    Ok(out)
}
