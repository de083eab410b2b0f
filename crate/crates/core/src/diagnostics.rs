//! Discrete energy, velocity norms, manufactured plane waves, PML error against
//! an enlarged-domain reference, and convergence rates.

use crate::error::{Error, Result};
use crate::physics::{ncomp, traction_slot, MaterialModel, COMPONENTS_2D_IN_3D};
use crate::solver::{Solver, State};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub value: f64,
}

/// `½ Qᵀ H P⁻¹ Q` summed over elements in element-then-node order.
pub fn discrete_energy(solver: &Solver, state: &State) -> EnergySample {
    let mesh = solver.mesh();
    let dim = solver.dim();
    let ops = solver.operators();
    let n = ops.n();
    let np = solver.nodes_per_element();
    let ns = ncomp(dim) - dim;
    let compliance: Vec<Vec<f64>> = mesh
        .materials
        .iter()
        .map(|m| {
            let s = m.compliance(dim);
            (0..ns * ns).map(|i| s[(i / ns, i % ns)]).collect()
        })
        .collect();
    let weights: Vec<f64> = (0..np)
        .map(|idx| {
            let mut rest = idx;
            let mut w = mesh.jacobian();
            for _ in 0..dim {
                w *= ops.h[rest % n];
                rest /= n;
            }
            w
        })
        .collect();
    let mut total = 0.0;
    let mut sigma = [0.0; 6];
    for e in 0..mesh.num_elements() {
        let q = solver.q_block(&state.data, e);
        let rho = mesh.material(e).rho;
        let s = &compliance[mesh.material_id[e]];
        let mut element = 0.0;
        for (idx, w) in weights.iter().enumerate() {
            let mut kinetic = 0.0;
            for c in 0..dim {
                kinetic += q[c * np + idx] * q[c * np + idx];
            }
            for (k, value) in sigma.iter_mut().enumerate().take(ns) {
                *value = q[(dim + k) * np + idx];
            }
            let mut strain = 0.0;
            for i in 0..ns {
                let mut row = 0.0;
                for j in 0..ns {
                    row += s[i * ns + j] * sigma[j];
                }
                strain += sigma[i] * row;
            }
            element += 0.5 * w * (rho * kinetic + strain);
        }
        total += element;
    }
    EnergySample { t: state.time, value: total }
}

/// Maximum over all nodes of the velocity magnitude.
pub fn linf_velocity(solver: &Solver, state: &State) -> f64 {
    let dim = solver.dim();
    let np = solver.nodes_per_element();
    let mut max = 0.0f64;
    for e in 0..solver.mesh().num_elements() {
        let q = solver.q_block(&state.data, e);
        for idx in 0..np {
            let m2: f64 = (0..dim).map(|c| q[c * np + idx] * q[c * np + idx]).sum();
            max = max.max(m2.sqrt());
        }
    }
    max
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveMode {
    P,
    S,
}

/// A travelling eigenmode `Q(x, t) = Q₀ φ(n·x − c t − s₀)` with the compactly
/// supported profile `φ(s) = A (1 − (s/w)²)^6` for `|s| < w`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveSpec {
    pub direction: [f64; 3],
    pub mode: WaveMode,
    /// Polarization for S waves; projected orthogonal to the direction.
    pub polarization: [f64; 3],
    pub offset: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl PlaneWaveSpec {
    pub fn profile(&self, s: f64) -> f64 {
        let x = s / self.width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - x * x).powi(6)
        }
    }

    pub fn profile_derivative(&self, s: f64) -> f64 {
        let x = s / self.width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            -12.0 * self.amplitude * x * (1.0 - x * x).powi(5) / self.width
        }
    }

    fn unit_direction(&self) -> [f64; 3] {
        let norm = self.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.direction.map(|v| v / norm)
    }

    /// Wave speed and the 9-component eigenvector `Q₀` with `P A_n Q₀ = −c Q₀`.
    pub fn eigenvector(&self, material: &MaterialModel) -> Result<(f64, [f64; 9])> {
        let (cp, cs) = material.wave_speeds()?;
        let n = self.unit_direction();
        let (c, v) = match self.mode {
            WaveMode::P => (cp, n),
            WaveMode::S => {
                let d: f64 = (0..3).map(|i| self.polarization[i] * n[i]).sum();
                let mut v = [0.0; 3];
                for i in 0..3 {
                    v[i] = self.polarization[i] - d * n[i];
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::Validation(vec!["S polarization parallel to direction".into()]));
                }
                (cs, v.map(|x| x / norm))
            }
        };
        // e = a_nᵀ v, σ = −C e / c
        let mut e = [0.0; 6];
        for xi in 0..3 {
            for eta in 0..3 {
                e[traction_slot(3, xi, eta)] += n[xi] * v[eta];
            }
        }
        let mut q = [0.0; 9];
        q[..3].copy_from_slice(&v);
        for i in 0..6 {
            q[3 + i] = -(0..6).map(|j| material.c[i][j] * e[j]).sum::<f64>() / c;
        }
        Ok((c, q))
    }

    /// Exact state at `x`, `t` in the layout of dimension `dim`.
    pub fn evaluate(&self, material: &MaterialModel, dim: usize, x: [f64; 3], t: f64) -> Result<Vec<f64>> {
        let (c, q0) = self.eigenvector(material)?;
        let n = self.unit_direction();
        let s: f64 = (0..3).map(|i| n[i] * x[i]).sum::<f64>() - c * t - self.offset;
        let phi = self.profile(s);
        Ok(if dim == 3 {
            q0.iter().map(|q| q * phi).collect()
        } else {
            COMPONENTS_2D_IN_3D.iter().map(|&i| q0[i] * phi).collect()
        })
    }
}

/// Samples the exact plane wave at every node (auxiliary fields zero).
pub fn plane_wave_state(solver: &Solver, spec: &PlaneWaveSpec, t: f64) -> Result<State> {
    let mesh = solver.mesh();
    let material = &mesh.materials[0];
    if mesh.materials.iter().any(|m| m != material) {
        return Err(Error::Validation(vec!["plane waves require a homogeneous medium".into()]));
    }
    // Fails early on anisotropic media or a degenerate polarization.
    spec.eigenvector(material)?;
    let mut state = solver.zero_state();
    solver.set_initial(&mut state, |x| {
        spec.evaluate(material, solver.dim(), x, t).expect("eigenvector validated above")
    });
    state.time = t;
    Ok(state)
}

/// Max-norm difference of all wave-field components between two states of
/// the same solver.
pub fn max_field_difference(solver: &Solver, a: &State, b: &State) -> f64 {
    let mut max = 0.0f64;
    for e in 0..solver.mesh().num_elements() {
        for (x, y) in solver.q_block(&a.data, e).iter().zip(solver.q_block(&b.data, e)) {
            max = max.max((x - y).abs());
        }
    }
    max
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for adjacent levels.
pub fn convergence_rates(errors: &[f64], spacings: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != spacings.len() || errors.len() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "need at least two matching levels, got {} errors and {} spacings",
            errors.len(),
            spacings.len()
        )));
    }
    if errors.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::DegenerateError);
    }
    Ok(errors
        .windows(2)
        .zip(spacings.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Pairs of matching elements between a run and a reference discretization,
/// restricted to the elements lying entirely inside a box.
pub struct NodeMatching {
    pairs: Vec<(usize, usize)>,
}

impl NodeMatching {
    /// Matches every run element whose cell lies inside `[lo, hi]` to the
    /// reference element covering the same cell; the grids must be aligned.
    /// Elements that only touch the box (for instance layer elements sharing
    /// a face with the interior) are excluded: their traces are not part of
    /// the interior solution.
    pub fn new(run: &Solver, reference: &Solver, lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        let (rm, fm) = (run.mesh(), reference.mesh());
        if run.dim() != reference.dim() || run.degree() != reference.degree() {
            return Err(Error::ShapeMismatch("run and reference discretizations differ".into()));
        }
        let dim = run.dim();
        for a in 0..dim {
            if (rm.spacing[a] - fm.spacing[a]).abs() > 1e-9 * rm.spacing[a] {
                return Err(Error::ShapeMismatch(format!("element spacing differs on axis {a}")));
            }
        }
        let mut pairs = Vec::new();
        for e in 0..rm.num_elements() {
            let c = rm.centroid(e);
            let inside = (0..dim).all(|a| {
                let (half, tol) = (0.5 * rm.spacing[a], 1e-9 * rm.spacing[a]);
                c[a] - half >= lo[a] - tol && c[a] + half <= hi[a] + tol
            });
            if !inside {
                continue;
            }
            let (fe, r) = fm.locate_point(c)?;
            if (0..dim).any(|a| r[a].abs() > 1e-6) {
                return Err(Error::ShapeMismatch("run and reference grids are not aligned".into()));
            }
            pairs.push((e, fe));
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Max over matched nodes of the velocity-difference magnitude.
    pub fn velocity_difference(&self, run: &Solver, a: &State, reference: &Solver, b: &State) -> f64 {
        let dim = run.dim();
        let np = run.nodes_per_element();
        let mut max = 0.0f64;
        for &(e, fe) in &self.pairs {
            let qa = run.q_block(&a.data, e);
            let qb = reference.q_block(&b.data, fe);
            for idx in 0..np {
                let d2: f64 = (0..dim)
                    .map(|c| {
                        let d = qa[c * np + idx] - qb[c * np + idx];
                        d * d
                    })
                    .sum();
                max = max.max(d2.sqrt());
            }
        }
        max
    }
}

/// Checks that every truncated side of the reference domain lies at least
/// `margin` beyond the measured region.
pub fn check_reference_margin(
    region_lo: [f64; 3],
    region_hi: [f64; 3],
    reference_lo: [f64; 3],
    reference_hi: [f64; 3],
    truncated: [[bool; 2]; 3],
    dim: usize,
    margin: f64,
) -> Result<()> {
    for a in 0..dim {
        let gaps = [region_lo[a] - reference_lo[a], reference_hi[a] - region_hi[a]];
        for side in 0..2 {
            if truncated[a][side] && gaps[side] < margin * (1.0 - 1e-12) {
                return Err(Error::GeometryInsufficient(format!(
                    "axis {a} side {side}: reference extends {:.1} m beyond the region, {:.1} m required",
                    gaps[side], margin
                )));
            }
        }
    }
    Ok(())
}

/// Checks that a wave from `source` reflected at any truncated face of the
/// reference box reaches none of the `receivers` before `travel` (= c·T).
pub fn check_reflection_paths(
    source: [f64; 3],
    receivers: &[[f64; 3]],
    reference_lo: [f64; 3],
    reference_hi: [f64; 3],
    truncated: [[bool; 2]; 3],
    dim: usize,
    travel: f64,
) -> Result<()> {
    for a in 0..dim {
        for side in 0..2 {
            if !truncated[a][side] {
                continue;
            }
            let plane = if side == 0 { reference_lo[a] } else { reference_hi[a] };
            for r in receivers {
                let mut mirror = *r;
                mirror[a] = 2.0 * plane - r[a];
                let path = (0..dim).map(|i| (mirror[i] - source[i]).powi(2)).sum::<f64>().sqrt();
                if path < travel * (1.0 - 1e-12) {
                    return Err(Error::GeometryInsufficient(format!(
                        "reflection off axis {a} side {side} travels {path:.1} m < {travel:.1} m"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Relative L2 misfit `‖a − b‖ / ‖b‖` of two equally sampled series.
pub fn relative_misfit(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.iter().zip(y) {
            num += (u - v) * (u - v);
            den += v * v;
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateError);
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};
    use crate::physics::coefficient_matrix;
    use crate::pml::PmlConfig;
    use crate::solver::SolverOptions;

    fn hhs() -> MaterialModel {
        MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        let spec = MeshSpec::uniform(3, [1, 1, 1], [0.0; 3], [2.0; 3], 0.0);
        let mesh = build_mesh(&spec, MaterialModel::isotropic(2.0, 1.0, 1.0).unwrap()).unwrap();
        let solver = Solver::with_options(mesh, 2, PmlConfig::disabled(), SolverOptions { threads: Some(1), ..Default::default() }).unwrap();
        let mut state = solver.zero_state();
        assert_eq!(discrete_energy(&solver, &state).value, 0.0);
        // J = 1; the centre GLL node has weight 4/3 per axis.
        let centre = 1 + 3 * (1 + 3);
        state.data[centre] = 1.0;
        let e = discrete_energy(&solver, &state).value;
        assert!((e - 0.5 * 2.0 * (4.0f64 / 3.0).powi(3)).abs() < 1e-14);
        let doubled = State { time: 0.0, data: state.data.iter().map(|v| 2.0 * v).collect() };
        assert!((discrete_energy(&solver, &doubled).value - 4.0 * e).abs() < 1e-13);
    }

    #[test]
    fn linf_examples() {
        let spec = MeshSpec::uniform(2, [2, 1, 1], [0.0; 3], [2.0, 1.0, 0.0], 0.0);
        let mesh = build_mesh(&spec, hhs()).unwrap();
        let solver = Solver::with_options(mesh, 1, PmlConfig::disabled(), SolverOptions { threads: Some(1), ..Default::default() }).unwrap();
        let mut state = solver.zero_state();
        assert_eq!(linf_velocity(&solver, &state), 0.0);
        let np = 4;
        let block = solver.q_block_mut(&mut state.data, 1);
        block[2] = 3.0;
        block[np + 2] = 4.0;
        assert_eq!(linf_velocity(&solver, &state), 5.0);
    }

    #[test]
    fn rate_examples() {
        let r = convergence_rates(&[8.2513e-4, 1.3602e-5], &[10.0, 5.0]).unwrap();
        assert!((r[0] - 5.9228).abs() < 1e-4);
        let r = convergence_rates(&[1.1745e-7, 3.7712e-9], &[2.5, 1.25]).unwrap();
        assert!((r[0] - 4.9608).abs() < 1e-4);
        let r = convergence_rates(&[64.0, 1.0], &[2.0, 1.0]).unwrap();
        assert!((r[0] - 6.0).abs() < 1e-12);
        assert!(matches!(convergence_rates(&[1.0, 0.0], &[2.0, 1.0]), Err(Error::DegenerateError)));
    }

    #[test]
    fn plane_wave_eigen_residual() {
        let m = hhs();
        for (mode, dir) in [(WaveMode::P, [1.0, 0.3, -0.2]), (WaveMode::S, [0.2, -1.0, 0.5])] {
            let spec = PlaneWaveSpec { direction: dir, mode, polarization: [0.0, 0.0, 1.0], offset: 0.0, width: 1.0, amplitude: 1.0 };
            let (c, q0) = spec.eigenvector(&m).unwrap();
            let n = spec.unit_direction();
            let p = m.material_matrix(3);
            let a = (0..3).fold(nalgebra::DMatrix::zeros(9, 9), |acc, xi| acc + coefficient_matrix(3, xi) * n[xi]);
            let q = nalgebra::DVector::from_column_slice(&q0);
            let residual = &p * a * &q + &q * c;
            assert!(residual.amax() <= 1e-12 * (c * q.amax()), "{mode:?}");
        }
    }

    #[test]
    fn p_mode_along_x_structure() {
        let spec = PlaneWaveSpec { direction: [1.0, 0.0, 0.0], mode: WaveMode::P, polarization: [0.0; 3], offset: 0.0, width: 1.0, amplitude: 1.0 };
        let (_, q) = spec.eigenvector(&hhs()).unwrap();
        assert!(q[0] != 0.0);
        for i in [1, 2, 6, 7, 8] {
            assert_eq!(q[i], 0.0);
        }
    }

    #[test]
    fn plane_wave_state_at_zero_time() {
        let spec_mesh = MeshSpec::uniform(2, [2, 2, 1], [0.0; 3], [1000.0, 1000.0, 0.0], 0.0);
        let mesh = build_mesh(&spec_mesh, hhs()).unwrap();
        let solver = Solver::with_options(mesh, 3, PmlConfig::disabled(), SolverOptions { threads: Some(1), ..Default::default() }).unwrap();
        let spec = PlaneWaveSpec { direction: [1.0, 1.0, 0.0], mode: WaveMode::S, polarization: [0.0, 0.0, 1.0], offset: 700.0, width: 300.0, amplitude: 1.0 };
        let spec = PlaneWaveSpec { polarization: [1.0, -1.0, 0.0], ..spec };
        let state = plane_wave_state(&solver, &spec, 0.0).unwrap();
        let (_, q0) = spec.eigenvector(&hhs()).unwrap();
        let x = solver.node_coords(3, 5);
        let s = (x[0] + x[1]) / 2f64.sqrt() - 700.0;
        let np = 16;
        assert!((solver.q_block(&state.data, 3)[5] - q0[0] * spec.profile(s)).abs() < 1e-15);
        assert!((solver.q_block(&state.data, 3)[4 * np + 5] - q0[6] * spec.profile(s)).abs() < 1e-6);
    }

    #[test]
    fn reference_checks() {
        let ok = check_reference_margin([-50.0, 0.0, 0.0], [50.0, 50.0, 0.0], [-170.0, 0.0, 0.0], [170.0, 50.0, 0.0], [[true, true], [false, false], [false; 2]], 2, 120.0);
        assert!(ok.is_ok());
        let bad = check_reference_margin([-50.0, 0.0, 0.0], [50.0, 50.0, 0.0], [-160.0, 0.0, 0.0], [170.0, 50.0, 0.0], [[true, true], [false, false], [false; 2]], 2, 120.0);
        assert!(matches!(bad, Err(Error::GeometryInsufficient(_))));
        let path = check_reflection_paths([0.0; 3], &[[1.0, 0.0, 0.0]], [-2.0; 3], [2.0; 3], [[true; 2]; 3], 3, 2.9);
        assert!(path.is_ok());
        let path = check_reflection_paths([0.0; 3], &[[1.0, 0.0, 0.0]], [-2.0; 3], [2.0; 3], [[true; 2]; 3], 3, 3.1);
        assert!(path.is_err());
    }
}
