//! Turns a validated configuration into a ready-to-run solver.

use super::config::{with_unit, Damping, InitialCondition, Quantity, RunConfig};
use crate::diagnostics::plane_wave_state;
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, MeshSpec};
use crate::physics::MaterialModel;
use crate::pml::{d0_from_tol, resolve_tol, PmlConfig};
use crate::solver::{stable_dt, Solver, SolverOptions, State};
use crate::sources::{MomentTensorSource, Receiver};

const AXES: [&str; 3] = ["x", "y", "z"];

/// 2D default complex frequency shift (1/s).
pub const DEFAULT_ALPHA_2D: f64 = 0.15;

pub struct Simulation {
    pub config: RunConfig,
    pub solver: Solver,
    pub receivers: Vec<Receiver>,
    pub dt: f64,
    /// Resolved parameters in output order; defaulted values say so.
    pub metadata: Vec<(String, String)>,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        Self::with_options(config, SolverOptions::default())
    }

    pub fn with_options(config: &RunConfig, options: SolverOptions) -> Result<Self> {
        config.validate()?;
        let dim = config.dim;
        let mut meta: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| meta.push((k.to_string(), v));
        push("name", config.name.clone());
        push("dimension", dim.to_string());
        push("degree", config.degree.to_string());
        push("desk_scaled", config.desk_scaled.to_string());

        let mut counts = [1; 3];
        counts[..dim].copy_from_slice(&config.elements[..dim]);
        let (mut lo, mut hi) = ([0.0; 3], [0.0; 3]);
        lo[..dim].copy_from_slice(&config.lo[..dim]);
        hi[..dim].copy_from_slice(&config.hi[..dim]);
        let spec = MeshSpec { dim, counts, lo, hi, boundary: config.boundary };
        let materials: Vec<MaterialModel> = config
            .materials
            .iter()
            .map(|m| MaterialModel::from_velocities(m.rho, m.cp, m.cs))
            .collect::<Result<_>>()?;
        let mut mesh = build_mesh(&spec, materials[0].clone())?;
        if materials.len() > 1 {
            mesh.assign_materials(materials, |c| config.material_index(c).unwrap_or(0))?;
        }
        let cp_max = config.materials.iter().map(|m| m.cp).fold(0.0, f64::max);
        push("elements", counts[..dim].iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" x "));
        push(
            "spacing",
            mesh.spacing[..dim].iter().map(|h| with_unit(*h, Quantity::Length)).collect::<Vec<_>>().join(", "),
        );
        for m in &config.materials {
            push(
                &format!("material.{}", m.name),
                format!(
                    "rho = {}, cp = {}, cs = {}{}",
                    with_unit(m.rho, Quantity::Density),
                    with_unit(m.cp, Quantity::Speed),
                    with_unit(m.cs, Quantity::Speed),
                    match &m.region {
                        None => String::new(),
                        Some((l, h)) => format!(", region {:?} .. {:?} m", &l[..dim], &h[..dim]),
                    }
                ),
            );
        }

        let pml = build_pml(config, &mesh.spacing, cp_max, &mut push)?;
        for a in 0..dim {
            for side in 0..2 {
                let g = &config.boundary[a][side][..dim];
                let layer = if pml.width[a][side] > 0.0 {
                    format!("pml {}", with_unit(pml.width[a][side], Quantity::Length))
                } else {
                    "no pml".to_string()
                };
                push(&format!("boundary.{}{}", AXES[a], if side == 0 { "-" } else { "+" }), format!("gamma = {g:?}, {layer}"));
            }
        }

        let mut solver = Solver::with_options(mesh, config.degree, pml, options)?;
        for s in &config.sources {
            solver.add_source(&MomentTensorSource { moment: s.moment, location: s.location, stf: s.stf })?;
        }
        let receivers = config
            .receivers
            .iter()
            .map(|r| {
                let rec = Receiver::new(&r.name, r.location, solver.mesh(), solver.operators())?;
                Ok(if r.stress { rec.with_all_components(dim) } else { rec })
            })
            .collect::<Result<Vec<_>>>()?;
        let dt = stable_dt(solver.mesh(), config.degree, config.cfl())?;
        push(
            "cfl",
            if config.cfl.is_some() { config.cfl().to_string() } else { format!("{} (default)", config.cfl()) },
        );
        push("dt", with_unit(dt, Quantity::Time));
        push("t_end", with_unit(config.t_end, Quantity::Time));
        push("sources", config.sources.len().to_string());
        push("receivers", config.receivers.iter().map(|r| r.name.clone()).collect::<Vec<_>>().join(", "));
        Ok(Self { config: config.clone(), solver, receivers, dt, metadata: meta })
    }

    pub fn initial_state(&self) -> Result<State> {
        match &self.config.initial {
            InitialCondition::Zero => Ok(self.solver.zero_state()),
            InitialCondition::Gaussian { center, halfwidth, amplitude, components } => {
                let mut state = self.solver.zero_state();
                let nc = self.solver.num_components();
                let dim = self.config.dim;
                let k = std::f64::consts::LN_2 / (halfwidth * halfwidth);
                self.solver.set_initial(&mut state, |x| {
                    let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                    let g = amplitude * (-k * r2).exp();
                    let mut q = vec![0.0; nc];
                    for &c in components {
                        q[c] = g;
                    }
                    q
                });
                Ok(state)
            }
            InitialCondition::PlaneWave(spec) => plane_wave_state(&self.solver, spec, 0.0),
        }
    }
}

fn build_pml(
    config: &RunConfig,
    spacing: &[f64; 3],
    cp_max: f64,
    push: &mut impl FnMut(&str, String),
) -> Result<PmlConfig> {
    let dim = config.dim;
    let spec = match &config.pml {
        Some(p) if p.is_enabled() => p,
        _ => {
            push("pml", "disabled".into());
            return Ok(PmlConfig::disabled());
        }
    };
    let (ilo, ihi) = config.interior();
    let mut pml = PmlConfig::disabled();
    for a in 0..dim {
        pml.interior_lo[a] = ilo[a];
        pml.interior_hi[a] = ihi[a];
        pml.width[a] = spec.width[a];
    }
    pml.theta = spec.theta;
    pml.exponent = spec.exponent;
    let widest = |a: usize| spec.width[a][0].max(spec.width[a][1]);
    let tol = match spec.damping.as_ref().ok_or_else(|| Error::Validation(vec!["pml damping unspecified".into()]))? {
        Damping::D0(d0) => {
            pml.d0 = *d0;
            None
        }
        Damping::Tol(tol) => Some(*tol),
        Damping::Auto => {
            let extent = (0..dim).map(|a| ihi[a] - ilo[a]).fold(f64::INFINITY, f64::min);
            let h = spacing[..dim].iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = resolve_tol(config.degree, h, extent);
            push("pml.tol", format!("{tol:e} (resolution dependent: W = {})", with_unit(extent, Quantity::Length)));
            Some(tol)
        }
    };
    if let Some(tol) = tol {
        if matches!(spec.damping, Some(Damping::Tol(_))) {
            push("pml.tol", format!("{tol:e}"));
        }
        for a in 0..dim {
            if widest(a) > 0.0 {
                pml.d0[a] = d0_from_tol(cp_max, widest(a), tol)?;
            }
        }
    }
    push(
        "pml.d0",
        (0..dim).map(|a| with_unit(pml.d0[a], Quantity::Rate)).collect::<Vec<_>>().join(", "),
    );
    pml.alpha = match spec.alpha {
        Some(alpha) => {
            push("pml.alpha", with_unit(alpha, Quantity::Rate));
            alpha
        }
        None if dim == 2 => {
            push("pml.alpha", format!("{} (default for 2D runs)", with_unit(DEFAULT_ALPHA_2D, Quantity::Rate)));
            DEFAULT_ALPHA_2D
        }
        None => {
            let delta = (0..dim)
                .flat_map(|a| spec.width[a])
                .filter(|w| *w > 0.0)
                .fold(f64::INFINITY, f64::min);
            let alpha = cp_max / (10.0 * delta);
            push(
                "pml.alpha",
                format!("{} (default cp/(10 delta), delta = {})", with_unit(alpha, Quantity::Rate), with_unit(delta, Quantity::Length)),
            );
            alpha
        }
    };
    push("pml.theta", format!("{:?}", &pml.theta[..dim]));
    push("pml.exponent", pml.exponent.to_string());
    pml.validate()?;
    Ok(pml)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::{preset, PresetOverrides};

    fn lookup<'a>(sim: &'a Simulation, key: &str) -> &'a str {
        &sim.metadata.iter().find(|(k, _)| k == key).unwrap().1
    }

    #[test]
    fn strip_damping_strength() {
        let sim = Simulation::new(&preset("strip2d", &PresetOverrides::default()).unwrap()).unwrap();
        let pml = sim.solver.pml();
        assert_eq!((pml.d0[0] * 100.0).round() / 100.0, 16.58);
        assert_eq!(pml.d0[1], 0.0);
        assert_eq!(pml.alpha, 0.15);
        assert_eq!(pml.interior_lo[0], -50e3);
        assert!((sim.dt - 0.05905).abs() < 1e-5);
        assert_eq!(sim.receivers.len(), 2);
        assert_eq!(lookup(&sim, "boundary.y+"), "gamma = [0.0, 0.0], no pml");
    }

    #[test]
    fn three_dimensional_alpha_default_is_recorded() {
        let o = PresetOverrides { elements: Some(5), degree: Some(1), ..Default::default() };
        let sim = Simulation::new(&preset("hws3d", &o).unwrap()).unwrap();
        assert!((sim.solver.pml().alpha - 0.5).abs() < 1e-12);
        assert!(lookup(&sim, "pml.alpha").contains("default"));
        assert_eq!(lookup(&sim, "desk_scaled"), "true");
        assert_eq!(sim.solver.sources().len(), 1);
    }

    #[test]
    fn auto_tolerance_follows_resolution() {
        let o = PresetOverrides { damping: Some(Damping::Auto), ..Default::default() };
        let sim = Simulation::new(&preset("strip2d", &o).unwrap()).unwrap();
        let tol = resolve_tol(5, 5e3, 50e3);
        let expected = d0_from_tol(6000.0, 10e3, tol).unwrap();
        assert!((sim.solver.pml().d0[0] - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn gaussian_initial_data() {
        let sim = Simulation::new(&preset("strip2d", &PresetOverrides::default()).unwrap()).unwrap();
        let state = sim.initial_state().unwrap();
        let np = sim.solver.nodes_per_element();
        let mut max = 0.0f64;
        for e in 0..sim.solver.mesh().num_elements() {
            let q = sim.solver.q_block(&state.data, e);
            for idx in 0..np {
                let x = sim.solver.node_coords(e, idx);
                let expected = (-(2f64.ln()) * ((x[0] / 1e3).powi(2) + (x[1] / 1e3 - 25.0).powi(2)) / 9.0).exp();
                max = max.max((q[idx] - expected).abs()).max((q[np + idx] - expected).abs());
                assert_eq!(q[2 * np + idx], 0.0);
            }
        }
        assert!(max < 1e-14);
    }

    #[test]
    fn layered_materials_are_assigned() {
        let o = PresetOverrides { degree: Some(1), ..Default::default() };
        let sim = Simulation::new(&preset("loh1", &o).unwrap()).unwrap();
        let mesh = sim.solver.mesh();
        assert_eq!(mesh.materials.len(), 2);
        let shallow = mesh.locate_point([100.0, 0.0, 0.0]).unwrap().0;
        let deep = mesh.locate_point([8000.0, 0.0, 0.0]).unwrap().0;
        assert_eq!(mesh.material(shallow).rho, 2600.0);
        assert_eq!(mesh.material(deep).rho, 2700.0);
    }
}
