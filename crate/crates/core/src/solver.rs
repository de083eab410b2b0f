//! Semi-discrete DG operator with PML auxiliary fields and ADER time stepping.
//!
//! Per element and axis `ξ` the update is
//!
//! ```text
//! dQ/dt  = P Σ_ξ [ A_ξ D_ξ Q − d_ξ w_ξ − H_ξ⁻¹ (e(−1) FL_ξ + e(+1) FR_ξ) ]
//! dw_ξ/dt =        A_ξ D_ξ Q − (d_ξ + α) w_ξ − θ_ξ H_ξ⁻¹ (e(−1) FL_ξ + e(+1) FR_ξ)
//! ```
//!
//! where `w_ξ` only exists in elements with non-zero damping along `ξ`. The
//! state of each element is stored contiguously as `[Q, w_ξ1, w_ξ2, ...]`, each
//! block component-major with nodes in lexicographic order (x fastest).

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::flux::{fluctuation_scalar, hat_boundary_scalar, hat_interface_scalar};
use crate::mesh::{CartesianMesh, FaceKind};
use crate::operators::{build_operators, derivative_along, reference_point, ElementOperators, QuadratureKind};
use crate::physics::{ncomp, traction_component};
use crate::pml::PmlConfig;
use crate::sources::{locate_source, LocatedSource, MomentTensorSource, MAX_STF_ORDER};

/// Environment variable capping the number of worker threads (0 = automatic).
pub const THREADS_ENV: &str = "ELASTOWAVE_THREADS";

#[derive(Clone, Debug, Default)]
pub struct SolverOptions {
    /// Allocate auxiliary fields on every element and axis, damped or not.
    pub force_aux: bool,
    /// Worker threads; `None` reads `ELASTOWAVE_THREADS`.
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
struct ElementMaterial {
    rho: f64,
    lambda: f64,
    mu: f64,
    cp: f64,
    cs: f64,
}

impl ElementMaterial {
    #[inline]
    fn impedance(&self, xi: usize, eta: usize) -> f64 {
        self.rho * if xi == eta { self.cp } else { self.cs }
    }
}

/// Time and the flat state vector (wave field plus auxiliary fields).
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub time: f64,
    pub data: Vec<f64>,
}

/// Reused ADER buffers.
#[derive(Default)]
pub struct Workspace {
    current: Vec<f64>,
    next: Vec<f64>,
    sum: Vec<f64>,
}

struct Scratch {
    r: Vec<f64>,
    acc: Vec<f64>,
}

/// Something invoked during [`Solver::run`] at a fixed time interval.
pub trait Observer {
    /// Sampling interval in seconds; zero or negative samples every step.
    fn interval(&self) -> f64;
    fn observe(&mut self, solver: &Solver, state: &State) -> Result<()>;
}

pub struct Solver {
    mesh: CartesianMesh,
    ops: ElementOperators,
    pml: PmlConfig,
    dim: usize,
    n: usize,
    np: usize,
    nc: usize,
    materials: Vec<ElementMaterial>,
    aux_axes: Vec<Vec<usize>>,
    damping: Vec<Vec<Vec<f64>>>,
    /// Largest `d + α` over damped nodes (zero without damping).
    max_damping: f64,
    offsets: Vec<usize>,
    sources: Vec<LocatedSource>,
    pool: ThreadPool,
}

/// Required ratio between the Taylor stability interval and `Δt·max(d + α)`.
const STIFFNESS_MARGIN: f64 = 1.5;

/// Length of the stability interval `[−L, 0]` of `Σ_{k≤m} z^k/k!`.
fn taylor_real_limit(m: usize) -> f64 {
    let step = 1e-3;
    let mut z: f64 = 0.0;
    loop {
        let next = z - step;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=m {
            term *= next / k as f64;
            sum += term;
        }
        if sum.abs() > 1.0 || next < -100.0 {
            return -z;
        }
        z = next;
    }
}

fn thread_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(0)
}

/// `Δt = CFL · min Δ / (√(cp² + cs²) (2P + 1))` with the fastest speeds present.
pub fn stable_dt(mesh: &CartesianMesh, degree: usize, cfl: f64) -> Result<f64> {
    if degree == 0 {
        return Err(Error::UnsupportedDegree(degree));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Validation(vec![format!("CFL number {cfl} outside (0, 1]")]));
    }
    let (mut cp, mut cs) = (0.0f64, 0.0f64);
    for m in &mesh.materials {
        let (p, s) = m.wave_speeds()?;
        cp = cp.max(p);
        cs = cs.max(s);
    }
    Ok(cfl * mesh.min_spacing() / ((cp * cp + cs * cs).sqrt() * (2 * degree + 1) as f64))
}

impl Solver {
    pub fn new(mesh: CartesianMesh, degree: usize, pml: PmlConfig) -> Result<Self> {
        Self::with_options(mesh, degree, pml, SolverOptions::default())
    }

    pub fn with_options(mesh: CartesianMesh, degree: usize, pml: PmlConfig, options: SolverOptions) -> Result<Self> {
        pml.validate()?;
        let ops = build_operators(degree, QuadratureKind::Gll)?;
        let dim = mesh.dim;
        let n = ops.n();
        let np = n.pow(dim as u32);
        let nc = ncomp(dim);
        let mut materials = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let m = mesh.material(e);
            let (lambda, mu) = m.lame().ok_or(Error::AnisotropicUnsupported)?;
            let (cp, cs) = m.wave_speeds()?;
            materials.push(ElementMaterial { rho: m.rho, lambda, mu, cp, cs });
        }
        let mut aux_axes = Vec::with_capacity(mesh.num_elements());
        let mut damping = Vec::with_capacity(mesh.num_elements());
        let mut offsets = Vec::with_capacity(mesh.num_elements() + 1);
        let mut offset = 0;
        for e in 0..mesh.num_elements() {
            let mut axes = Vec::new();
            let mut profiles = Vec::new();
            for axis in 0..dim {
                let d = pml.element_damping(&mesh, e, axis, ops.nodes());
                if options.force_aux || d.iter().any(|v| *v > 0.0) {
                    axes.push(axis);
                    profiles.push(d);
                }
            }
            offsets.push(offset);
            offset += (1 + axes.len()) * nc * np;
            aux_axes.push(axes);
            damping.push(profiles);
        }
        offsets.push(offset);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(thread_count(options.threads))
            .build()
            .map_err(|e| Error::Validation(vec![format!("thread pool: {e}")]))?;
        let max_damping = damping
            .iter()
            .flatten()
            .flatten()
            .map(|d| d + pml.alpha)
            .fold(0.0, f64::max);
        Ok(Self {
            mesh,
            ops,
            pml,
            dim,
            n,
            np,
            nc,
            materials,
            aux_axes,
            damping,
            max_damping,
            offsets,
            sources: Vec::new(),
            pool,
        })
    }

    pub fn add_source(&mut self, source: &MomentTensorSource) -> Result<&LocatedSource> {
        let located = locate_source(&self.mesh, &self.ops, source)?;
        self.sources.push(located);
        Ok(self.sources.last().expect("just pushed"))
    }

    pub fn mesh(&self) -> &CartesianMesh {
        &self.mesh
    }

    pub fn operators(&self) -> &ElementOperators {
        &self.ops
    }

    pub fn pml(&self) -> &PmlConfig {
        &self.pml
    }

    pub fn sources(&self) -> &[LocatedSource] {
        &self.sources
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.n - 1
    }

    pub fn nodes_per_element(&self) -> usize {
        self.np
    }

    pub fn num_components(&self) -> usize {
        self.nc
    }

    pub fn state_len(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    /// Number of stored auxiliary values (zero without damped elements).
    pub fn aux_len(&self) -> usize {
        self.state_len() - self.mesh.num_elements() * self.nc * self.np
    }

    pub fn aux_axes(&self, e: usize) -> &[usize] {
        &self.aux_axes[e]
    }

    pub fn zero_state(&self) -> State {
        State { time: 0.0, data: vec![0.0; self.state_len()] }
    }

    pub fn q_block<'a>(&self, data: &'a [f64], e: usize) -> &'a [f64] {
        &data[self.offsets[e]..self.offsets[e] + self.nc * self.np]
    }

    pub fn q_block_mut<'a>(&self, data: &'a mut [f64], e: usize) -> &'a mut [f64] {
        &mut data[self.offsets[e]..self.offsets[e] + self.nc * self.np]
    }

    pub fn aux_block<'a>(&self, data: &'a [f64], e: usize, axis: usize) -> Option<&'a [f64]> {
        let slot = self.aux_axes[e].iter().position(|&a| a == axis)?;
        let block = self.nc * self.np;
        let start = self.offsets[e] + (1 + slot) * block;
        Some(&data[start..start + block])
    }

    /// Physical coordinates of node `idx` of element `e`.
    pub fn node_coords(&self, e: usize, idx: usize) -> [f64; 3] {
        self.mesh.map_to_physical(e, reference_point(idx, self.n, self.dim, self.ops.nodes()))
    }

    /// Sets the wave field from a function of position; auxiliary fields are zeroed.
    pub fn set_initial<F>(&self, state: &mut State, f: F)
    where
        F: Fn([f64; 3]) -> Vec<f64>,
    {
        state.data.iter_mut().for_each(|v| *v = 0.0);
        for e in 0..self.mesh.num_elements() {
            let np = self.np;
            for idx in 0..np {
                let values = f(self.node_coords(e, idx));
                let block = self.q_block_mut(&mut state.data, e);
                for (c, v) in values.iter().enumerate().take(self.nc) {
                    block[c * np + idx] = *v;
                }
            }
        }
    }

    /// The linear operator `L` applied to `input`; sources are not included.
    pub fn compute_rhs(&self, state: &State) -> Vec<f64> {
        let mut out = vec![0.0; self.state_len()];
        self.apply_operator(&state.data, &mut out);
        out
    }

    /// Adds the `k`-th time derivative of all source terms at time `t`.
    pub fn inject_sources(&self, rate: &mut [f64], t: f64, k: usize) -> Result<()> {
        for src in &self.sources {
            let block = self.q_block_mut(rate, src.element);
            src.inject(block, t, k)?;
        }
        Ok(())
    }

    pub fn apply_operator(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.state_len());
        debug_assert_eq!(out.len(), self.state_len());
        let mut chunks = Vec::with_capacity(self.mesh.num_elements());
        let mut rest = out;
        for e in 0..self.mesh.num_elements() {
            let (head, tail) = rest.split_at_mut(self.offsets[e + 1] - self.offsets[e]);
            chunks.push(head);
            rest = tail;
        }
        let block = self.nc * self.np;
        self.pool.install(|| {
            chunks.into_par_iter().enumerate().for_each_init(
                || Scratch { r: vec![0.0; block], acc: vec![0.0; block] },
                |scratch, (e, chunk)| self.element_rhs(e, input, chunk, scratch),
            );
        });
    }

    fn element_rhs(&self, e: usize, input: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        let (n, np, nc, dim) = (self.n, self.np, self.nc, self.dim);
        let block = nc * np;
        let base = self.offsets[e];
        let q = &input[base..base + block];
        let mat = self.materials[e];
        let alpha = self.pml.alpha;
        let (out_q, out_w) = out.split_at_mut(block);
        let Scratch { r, acc } = scratch;
        acc.iter_mut().for_each(|v| *v = 0.0);

        let mut aux_slot = 0;
        for xi in 0..dim {
            let scale = 2.0 / self.mesh.spacing[xi];
            let stride = n.pow(xi as u32);
            r.iter_mut().for_each(|v| *v = 0.0);
            for eta in 0..dim {
                let s = traction_component(dim, xi, eta);
                derivative_along(&q[s * np..(s + 1) * np], &mut r[eta * np..(eta + 1) * np], &self.ops.d, n, xi, scale);
                derivative_along(&q[eta * np..(eta + 1) * np], &mut r[s * np..(s + 1) * np], &self.ops.d, n, xi, scale);
            }

            let aux = match self.aux_axes[e].get(aux_slot) {
                Some(&a) if a == xi => {
                    let slot = aux_slot;
                    aux_slot += 1;
                    Some(slot)
                }
                _ => None,
            };

            let mut dw: Option<&mut [f64]> = None;
            match aux {
                None => {
                    for (a, v) in acc.iter_mut().zip(r.iter()) {
                        *a += v;
                    }
                }
                Some(slot) => {
                    let w = &input[base + (1 + slot) * block..base + (2 + slot) * block];
                    let target = &mut out_w[slot * block..(slot + 1) * block];
                    let d = &self.damping[e][slot];
                    for c in 0..nc {
                        for idx in 0..np {
                            let i = c * np + idx;
                            let dn = d[(idx / stride) % n];
                            target[i] = r[i] - (dn + alpha) * w[i];
                            acc[i] += r[i] - dn * w[i];
                        }
                    }
                    dw = Some(target);
                }
            }
            let theta = self.pml.theta[xi];

            for side in [-1i8, 1] {
                let (face_i, nb_i) = if side < 0 { (0, n - 1) } else { (n - 1, 0) };
                let pen = scale / self.ops.h[face_i];
                let face = self.mesh.face(e, xi, side);
                let neighbor = match face.kind {
                    FaceKind::Interior(nb) => Some((nb, &input[self.offsets[nb]..self.offsets[nb] + block], self.materials[nb])),
                    FaceKind::Boundary(_) => None,
                };
                let outer_count = np / (stride * n);
                for outer in 0..outer_count {
                    for inner in 0..stride {
                        let idx = inner + stride * face_i + stride * n * outer;
                        let nb_idx = inner + stride * nb_i + stride * n * outer;
                        for eta in 0..dim {
                            let s = traction_component(dim, xi, eta);
                            let z = mat.impedance(xi, eta);
                            let v = q[eta * np + idx];
                            let t = q[s * np + idx];
                            let (vh, th) = match (&face.kind, &neighbor) {
                                (FaceKind::Boundary(gamma), _) => hat_boundary_scalar(v, t, z, gamma[eta], side),
                                (FaceKind::Interior(_), Some((_, qn, mn))) => {
                                    let zn = mn.impedance(xi, eta);
                                    let vn = qn[eta * np + nb_idx];
                                    let tn = qn[s * np + nb_idx];
                                    if side > 0 {
                                        hat_interface_scalar(v, t, z, vn, tn, zn)
                                    } else {
                                        hat_interface_scalar(vn, tn, zn, v, t, z)
                                    }
                                }
                                _ => unreachable!("interior face without neighbour"),
                            };
                            let g = fluctuation_scalar(v, t, vh, th, z, side);
                            let fv = pen * g;
                            let fs = pen * f64::from(side) * g / z;
                            acc[eta * np + idx] -= fv;
                            acc[s * np + idx] -= fs;
                            if let Some(target) = dw.as_deref_mut() {
                                target[eta * np + idx] -= theta * fv;
                                target[s * np + idx] -= theta * fs;
                            }
                        }
                    }
                }
            }
        }

        // Multiply by the material matrix P = diag(ρ⁻¹ I, C).
        let inv_rho = 1.0 / mat.rho;
        for i in 0..dim * np {
            out_q[i] = inv_rho * acc[i];
        }
        let (lambda, mu) = (mat.lambda, mat.mu);
        let two_mu = 2.0 * mu;
        let s0 = dim * np;
        if dim == 3 {
            for idx in 0..np {
                let (exx, eyy, ezz) = (acc[s0 + idx], acc[s0 + np + idx], acc[s0 + 2 * np + idx]);
                let tr = lambda * (exx + eyy + ezz);
                out_q[s0 + idx] = tr + two_mu * exx;
                out_q[s0 + np + idx] = tr + two_mu * eyy;
                out_q[s0 + 2 * np + idx] = tr + two_mu * ezz;
                for k in 3..6 {
                    out_q[s0 + k * np + idx] = mu * acc[s0 + k * np + idx];
                }
            }
        } else {
            for idx in 0..np {
                let (exx, eyy) = (acc[s0 + idx], acc[s0 + np + idx]);
                let tr = lambda * (exx + eyy);
                out_q[s0 + idx] = tr + two_mu * exx;
                out_q[s0 + np + idx] = tr + two_mu * eyy;
                out_q[s0 + 2 * np + idx] = mu * acc[s0 + 2 * np + idx];
            }
        }
    }

    /// Number of Taylor terms used for a step of length `dt`: `P + 1`, raised
    /// when the layer damping is stiff so that `−Δt·max(d + α)` stays within
    /// two thirds of the truncated series' stability interval on the negative
    /// real axis. Without damped elements this is always `P + 1`.
    pub fn taylor_terms(&self, dt: f64) -> usize {
        let base = self.degree() + 1;
        let stiffness = STIFFNESS_MARGIN * dt * self.max_damping;
        let cap = MAX_STF_ORDER + 1;
        (base..=cap.max(base)).find(|&m| taylor_real_limit(m) >= stiffness).unwrap_or(cap.max(base))
    }

    /// One ADER step: `u ← Σ_{k=0}^{m} Δt^k/k! u^(k)` with
    /// `u^(k) = L u^(k−1) + f^(k−1)(t_n)` and `m` from [`Solver::taylor_terms`].
    pub fn ader_step(&self, state: &mut State, dt: f64, ws: &mut Workspace) -> Result<()> {
        let len = self.state_len();
        ws.current.clear();
        ws.current.extend_from_slice(&state.data);
        ws.next.resize(len, 0.0);
        ws.sum.clear();
        ws.sum.extend_from_slice(&state.data);
        let mut coef = 1.0;
        for k in 1..=self.taylor_terms(dt) {
            self.apply_operator(&ws.current, &mut ws.next);
            if !self.sources.is_empty() {
                self.inject_sources(&mut ws.next, state.time, k - 1)?;
            }
            coef *= dt / k as f64;
            for (s, v) in ws.sum.iter_mut().zip(&ws.next) {
                *s += coef * v;
            }
            std::mem::swap(&mut ws.current, &mut ws.next);
        }
        if !ws.sum.iter().all(|v| v.is_finite()) {
            return Err(Error::DivergenceDetected { time: state.time + dt });
        }
        std::mem::swap(&mut state.data, &mut ws.sum);
        state.time += dt;
        Ok(())
    }

    /// Marches with step `dt` to `t_end`, truncating the final step so the run
    /// lands exactly on `t_end`. Observers fire at the start, every `interval`
    /// (rounded to whole steps), and at the end. Returns the number of steps.
    pub fn run(&self, state: &mut State, t_end: f64, dt: f64, observers: &mut [&mut dyn Observer]) -> Result<usize> {
        if t_end < state.time {
            return Err(Error::Validation(vec![format!(
                "end time {t_end} precedes current time {}",
                state.time
            )]));
        }
        if !(dt > 0.0) {
            return Err(Error::Validation(vec![format!("time step {dt} must be positive")]));
        }
        let strides: Vec<usize> = observers
            .iter()
            .map(|o| {
                let interval = o.interval();
                if interval > 0.0 {
                    ((interval / dt).round() as usize).max(1)
                } else {
                    1
                }
            })
            .collect();
        for obs in observers.iter_mut() {
            obs.observe(self, state)?;
        }
        let t0 = state.time;
        let span = t_end - t0;
        let steps = if span <= 0.0 { 0 } else { ((span / dt) * (1.0 - 1e-12)).ceil() as usize };
        let mut ws = Workspace::default();
        for step in 1..=steps {
            let h = if step == steps { t_end - state.time } else { dt };
            self.ader_step(state, h, &mut ws)?;
            if step == steps {
                state.time = t_end;
            }
            for (obs, &stride) in observers.iter_mut().zip(&strides) {
                if step % stride == 0 || step == steps {
                    obs.observe(self, state)?;
                }
            }
        }
        Ok(steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};
    use crate::physics::MaterialModel;
    use rand::{Rng, SeedableRng};

    fn solver_2d(counts: [usize; 2], degree: usize, gamma: f64, pml: PmlConfig) -> Solver {
        let spec = MeshSpec::uniform(2, [counts[0], counts[1], 1], [0.0; 3], [4000.0, 3000.0, 0.0], gamma);
        let mesh = build_mesh(&spec, MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap()).unwrap();
        Solver::with_options(mesh, degree, pml, SolverOptions { threads: Some(1), ..Default::default() }).unwrap()
    }

    fn random_state(solver: &Solver, seed: u64) -> State {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut state = solver.zero_state();
        let dim = solver.dim();
        let np = solver.nodes_per_element();
        for e in 0..solver.mesh().num_elements() {
            let block = solver.q_block_mut(&mut state.data, e);
            for (i, v) in block.iter_mut().enumerate() {
                *v = if i < dim * np { rng.gen_range(-1.0..1.0) } else { rng.gen_range(-1e7..1e7) };
            }
        }
        state
    }

    #[test]
    fn stable_dt_example() {
        let spec = MeshSpec::uniform(2, [24, 10, 1], [-60e3, 0.0, 0.0], [60e3, 50e3, 0.0], 0.0);
        let mesh = build_mesh(&spec, MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap()).unwrap();
        let dt = stable_dt(&mesh, 5, 0.9).unwrap();
        assert!((dt - 0.05905).abs() < 1e-5, "{dt}");
        assert!((stable_dt(&mesh, 5, 0.45).unwrap() - 0.5 * dt).abs() < 1e-15);
        assert!(matches!(stable_dt(&mesh, 0, 0.9), Err(Error::UnsupportedDegree(0))));
        assert!((100.0 / dt).ceil() as usize == 1694);
    }

    #[test]
    fn taylor_stability_intervals() {
        // Known real-axis stability limits of truncated exponential series.
        for (m, limit) in [(1, 2.0), (2, 2.0), (4, 2.785), (6, 3.553), (8, 4.314)] {
            assert!((taylor_real_limit(m) - limit).abs() < 2e-3, "m = {m}: {}", taylor_real_limit(m));
        }
    }

    #[test]
    fn taylor_terms_follow_damping_stiffness() {
        let undamped = solver_2d([4, 3], 5, 0.0, PmlConfig::disabled());
        assert_eq!(undamped.taylor_terms(1e3), 6);
        let pml = PmlConfig {
            interior_lo: [1000.0, f64::NEG_INFINITY, 0.0],
            interior_hi: [3000.0, f64::INFINITY, 0.0],
            width: [[1000.0, 1000.0], [0.0; 2], [0.0; 2]],
            d0: [20.0, 0.0, 0.0],
            alpha: 0.5,
            theta: [1.0; 3],
            exponent: 3,
        };
        let damped = solver_2d([4, 3], 5, 0.0, pml);
        // max(d + α) = 20.5: 1.5·Δt·20.5 ≤ 3.553 keeps P + 1 terms.
        assert_eq!(damped.taylor_terms(0.1), 6);
        // 1.5·0.14·20.5 = 4.305 needs the 8-term series.
        assert_eq!(damped.taylor_terms(0.14), 8);
        assert_eq!(damped.taylor_terms(10.0), MAX_STF_ORDER + 1);
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let solver = solver_2d([3, 2], 3, 0.0, PmlConfig::disabled());
        let rhs = solver.compute_rhs(&solver.zero_state());
        assert!(rhs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_velocity_interior_is_steady() {
        let solver = solver_2d([4, 4], 3, 0.0, PmlConfig::disabled());
        let mut state = solver.zero_state();
        solver.set_initial(&mut state, |_| vec![0.3, -0.7, 0.0, 0.0, 0.0]);
        let rhs = solver.compute_rhs(&state);
        for e in 0..16 {
            let c = solver.mesh().element_coords(e);
            if c[0] == 0 || c[0] == 3 || c[1] == 0 || c[1] == 3 {
                continue;
            }
            assert!(solver.q_block(&rhs, e).iter().all(|v| v.abs() <= 1e-13 * 1e7));
        }
    }

    #[test]
    fn rhs_is_linear() {
        let solver = solver_2d([3, 3], 4, 0.5, PmlConfig::disabled());
        let (u, v) = (random_state(&solver, 1), random_state(&solver, 2));
        let (a, b) = (0.7, -1.3);
        let combo = State { time: 0.0, data: u.data.iter().zip(&v.data).map(|(x, y)| a * x + b * y).collect() };
        let (lu, lv, lc) = (solver.compute_rhs(&u), solver.compute_rhs(&v), solver.compute_rhs(&combo));
        let scale = lc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..lc.len() {
            assert!((a * lu[i] + b * lv[i] - lc[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn identity_step_for_zero_operator() {
        // zero state is a fixed point
        let solver = solver_2d([2, 2], 2, 0.0, PmlConfig::disabled());
        let mut state = solver.zero_state();
        let mut ws = Workspace::default();
        solver.ader_step(&mut state, 0.01, &mut ws).unwrap();
        assert!(state.data.iter().all(|v| *v == 0.0));
        assert_eq!(state.time, 0.01);
    }

    #[test]
    fn run_with_zero_span_fires_once() {
        struct Count(usize);
        impl Observer for Count {
            fn interval(&self) -> f64 {
                0.1
            }
            fn observe(&mut self, _: &Solver, _: &State) -> Result<()> {
                self.0 += 1;
                Ok(())
            }
        }
        let solver = solver_2d([2, 2], 2, 0.0, PmlConfig::disabled());
        let mut state = solver.zero_state();
        let mut count = Count(0);
        let steps = solver.run(&mut state, 0.0, 0.01, &mut [&mut count]).unwrap();
        assert_eq!((steps, count.0), (0, 1));
        let steps = solver.run(&mut state, 0.105, 0.01, &mut [&mut count]).unwrap();
        assert_eq!(steps, 11);
        assert_eq!(state.time, 0.105);
        assert_eq!(count.0, 1 + 1 + 2);
    }

    #[test]
    fn undamped_runs_ignore_theta_and_aux() {
        let base = solver_2d([3, 3], 3, 0.5, PmlConfig::disabled());
        assert_eq!(base.aux_len(), 0);
        let mut theta0 = PmlConfig::disabled();
        theta0.theta = [0.0; 3];
        theta0.alpha = 0.2;
        let spec = MeshSpec::uniform(2, [3, 3, 1], [0.0; 3], [4000.0, 3000.0, 0.0], 0.5);
        let mesh = build_mesh(&spec, MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap()).unwrap();
        let forced = Solver::with_options(mesh, 3, theta0, SolverOptions { force_aux: true, threads: Some(1) }).unwrap();
        assert!(forced.aux_len() > 0);
        let mut a = random_state(&base, 7);
        let mut b = forced.zero_state();
        for e in 0..9 {
            forced.q_block_mut(&mut b.data, e).copy_from_slice(base.q_block(&a.data, e));
        }
        let dt = 0.5 * stable_dt(base.mesh(), 3, 0.5).unwrap();
        let mut ws = Workspace::default();
        for _ in 0..5 {
            base.ader_step(&mut a, dt, &mut ws).unwrap();
            forced.ader_step(&mut b, dt, &mut ws).unwrap();
        }
        for e in 0..9 {
            assert_eq!(base.q_block(&a.data, e), forced.q_block(&b.data, e));
        }
    }

    #[test]
    fn aux_allocated_only_in_damped_elements() {
        let pml = PmlConfig {
            interior_lo: [1000.0, f64::NEG_INFINITY, 0.0],
            interior_hi: [3000.0, f64::INFINITY, 0.0],
            width: [[1000.0, 1000.0], [0.0; 2], [0.0; 2]],
            d0: [5.0, 0.0, 0.0],
            alpha: 0.1,
            theta: [1.0; 3],
            exponent: 3,
        };
        let solver = solver_2d([4, 3], 2, 0.0, pml);
        for e in 0..12 {
            let c = solver.mesh().element_coords(e);
            let damped = c[0] == 0 || c[0] == 3;
            assert_eq!(solver.aux_axes(e), if damped { &[0usize][..] } else { &[][..] });
            assert_eq!(solver.aux_block(&solver.zero_state().data, e, 0).is_some(), damped);
        }
        assert_eq!(solver.aux_len(), 6 * 5 * 9);
    }

    #[test]
    fn scalar_taylor_driver() {
        // For a single element with only absorbing faces, one ADER step equals the
        // truncated exponential of the operator matrix applied to the state.
        let solver = solver_2d([1, 1], 1, 0.0, PmlConfig::disabled());
        let len = solver.state_len();
        let mut columns = vec![vec![0.0; len]; len];
        for (j, col) in columns.iter_mut().enumerate() {
            let mut unit = solver.zero_state();
            unit.data[j] = 1.0;
            *col = solver.compute_rhs(&unit);
        }
        let u0 = random_state(&solver, 3);
        let dt = stable_dt(solver.mesh(), 1, 0.5).unwrap();
        let apply = |v: &[f64]| -> Vec<f64> { (0..len).map(|i| (0..len).map(|j| columns[j][i] * v[j]).sum()).collect() };
        let mut term = u0.data.clone();
        let mut expected = u0.data.clone();
        for k in 1..=2 {
            term = apply(&term).iter().map(|v| v * dt / k as f64).collect();
            for (e, t) in expected.iter_mut().zip(&term) {
                *e += t;
            }
        }
        let mut state = u0.clone();
        solver.ader_step(&mut state, dt, &mut Workspace::default()).unwrap();
        for (a, b) in state.data.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}
