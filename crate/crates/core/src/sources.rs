//! Moment-tensor point sources with analytic source time functions, and
//! receivers sampling the nodal solution at arbitrary points.

use crate::error::{Error, Result};
use crate::mesh::CartesianMesh;
use crate::operators::ElementOperators;
use crate::physics::ncomp;

/// Highest time-derivative order available from a source time function.
pub const MAX_STF_ORDER: usize = 17;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SourceTimeFunction {
    /// Normalized Gaussian `exp(-(t-t0)²/2σ²) / (σ√(2π))`.
    Gaussian { sigma: f64, t0: f64 },
    /// `(t/T²) e^{-t/T}` for `t ≥ 0`, zero before.
    Ramp { period: f64 },
}

impl SourceTimeFunction {
    /// `g^(k)(t)` in closed form.
    pub fn eval(&self, t: f64, k: usize) -> Result<f64> {
        if k > MAX_STF_ORDER {
            return Err(Error::UnsupportedOrder(k));
        }
        Ok(match *self {
            SourceTimeFunction::Gaussian { sigma, t0 } => {
                let tau = (t - t0) / sigma;
                let g = (-0.5 * tau * tau).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                // g^(k) = g · (−1)^k He_k(τ) / σ^k with probabilists' Hermite He_k.
                let (mut he_prev, mut he) = (0.0, 1.0);
                for j in 0..k {
                    let next = tau * he - j as f64 * he_prev;
                    he_prev = he;
                    he = next;
                }
                let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
                g * sign * he / sigma.powi(k as i32)
            }
            SourceTimeFunction::Ramp { period } => {
                if t < 0.0 {
                    return Ok(0.0);
                }
                let a = -1.0 / period;
                let e = (-t / period).exp() / (period * period);
                let kf = k as f64;
                let lead = if k == 0 { 0.0 } else { kf * a.powi(k as i32 - 1) };
                e * (a.powi(k as i32) * t + lead)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTensorSource {
    /// Symmetric moment tensor (N·m).
    pub moment: [[f64; 3]; 3],
    pub location: [f64; 3],
    pub stf: SourceTimeFunction,
}

/// A source bound to its element: `weights[node] = Π L(r₀) / (J Π h)`, and the
/// moment entries feeding each stress component of the state.
#[derive(Clone, Debug)]
pub struct LocatedSource {
    pub source: MomentTensorSource,
    pub element: usize,
    pub reference: [f64; 3],
    pub weights: Vec<f64>,
    pub components: Vec<(usize, f64)>,
}

/// State index of the stress component paired with moment entry `(i, j)`.
fn moment_component(dim: usize, i: usize, j: usize) -> Option<usize> {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    match (dim, i, j) {
        (3, 0, 0) => Some(3),
        (3, 1, 1) => Some(4),
        (3, 2, 2) => Some(5),
        (3, 0, 1) => Some(6),
        (3, 0, 2) => Some(7),
        (3, 1, 2) => Some(8),
        (2, 0, 0) => Some(2),
        (2, 1, 1) => Some(3),
        (2, 0, 1) => Some(4),
        _ => None,
    }
}

/// Tensor-product Lagrange values at reference point `r`, lexicographic order.
pub fn tensor_basis(ops: &ElementOperators, dim: usize, r: [f64; 3]) -> Result<Vec<f64>> {
    let per_axis: Vec<Vec<f64>> = (0..dim).map(|a| ops.eval_basis_at(r[a])).collect::<Result<_>>()?;
    let n = ops.n();
    let np = n.pow(dim as u32);
    let mut out = vec![0.0; np];
    for (idx, value) in out.iter_mut().enumerate() {
        let mut rest = idx;
        let mut v = 1.0;
        for basis in &per_axis {
            v *= basis[rest % n];
            rest /= n;
        }
        *value = v;
    }
    Ok(out)
}

pub fn locate_source(
    mesh: &CartesianMesh,
    ops: &ElementOperators,
    source: &MomentTensorSource,
) -> Result<LocatedSource> {
    let dim = mesh.dim;
    let (element, reference) = mesh.locate_point(source.location)?;
    let n = ops.n();
    let jac = mesh.jacobian();
    let mut weights = tensor_basis(ops, dim, reference)?;
    for (idx, w) in weights.iter_mut().enumerate() {
        let mut rest = idx;
        let mut mass = jac;
        for _ in 0..dim {
            mass *= ops.h[rest % n];
            rest /= n;
        }
        *w /= mass;
    }
    let mut components = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            let m = 0.5 * (source.moment[i][j] + source.moment[j][i]);
            if let Some(c) = moment_component(dim, i, j) {
                if m != 0.0 {
                    components.push((c, m));
                }
            }
        }
    }
    Ok(LocatedSource { source: source.clone(), element, reference, weights, components })
}

impl LocatedSource {
    /// Adds `M g^(k)(t) δ_h` to the element block `rate` (component-major).
    pub fn inject(&self, rate: &mut [f64], t: f64, k: usize) -> Result<()> {
        let g = self.source.stf.eval(t, k)?;
        if g == 0.0 {
            return Ok(());
        }
        let np = self.weights.len();
        for &(c, m) in &self.components {
            let scale = m * g;
            for (r, w) in rate[c * np..(c + 1) * np].iter_mut().zip(&self.weights) {
                *r += scale * w;
            }
        }
        Ok(())
    }
}

/// A recording station. Samples are stored as `(t, values)`.
#[derive(Clone, Debug)]
pub struct Receiver {
    pub name: String,
    pub location: [f64; 3],
    pub element: usize,
    pub reference: [f64; 3],
    /// State components recorded (velocities by default).
    pub components: Vec<usize>,
    basis: Vec<f64>,
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl Receiver {
    pub fn new(name: &str, location: [f64; 3], mesh: &CartesianMesh, ops: &ElementOperators) -> Result<Self> {
        let (element, reference) = mesh.locate_point(location)?;
        let basis = tensor_basis(ops, mesh.dim, reference)?;
        Ok(Self {
            name: name.to_string(),
            location,
            element,
            reference,
            components: (0..mesh.dim).collect(),
            basis,
            times: Vec::new(),
            samples: Vec::new(),
        })
    }

    /// Records stresses as well as velocities.
    pub fn with_all_components(mut self, dim: usize) -> Self {
        self.components = (0..ncomp(dim)).collect();
        self
    }

    /// Interpolated values of the recorded components from an element block.
    pub fn sample(&self, element_block: &[f64]) -> Vec<f64> {
        let np = self.basis.len();
        self.components
            .iter()
            .map(|&c| {
                element_block[c * np..(c + 1) * np]
                    .iter()
                    .zip(&self.basis)
                    .map(|(q, l)| q * l)
                    .sum()
            })
            .collect()
    }

    /// Appends a sample; times that do not advance are ignored.
    pub fn record(&mut self, t: f64, element_block: &[f64]) {
        if self.times.last().is_some_and(|&last| t <= last) {
            return;
        }
        let values = self.sample(element_block);
        self.times.push(t);
        self.samples.push(values);
    }
}
