//! Perfectly matched layer parameters: damping profiles, complex frequency
//! shift and the stabilizing weight `θ` on the auxiliary flux term.

use crate::error::{Error, Result};
use crate::mesh::CartesianMesh;

#[derive(Clone, Debug, PartialEq)]
pub struct PmlConfig {
    /// Undamped box; damping is zero inside it.
    pub interior_lo: [f64; 3],
    pub interior_hi: [f64; 3],
    /// Layer width `δ` per `[axis][side]`; zero disables that layer.
    pub width: [[f64; 2]; 3],
    /// Damping strength `d0` per axis (1/s).
    pub d0: [f64; 3],
    /// Complex frequency shift (1/s).
    pub alpha: f64,
    /// Weight of the flux fluctuation in the auxiliary equations, per axis.
    pub theta: [f64; 3],
    /// Exponent of the monomial damping profile.
    pub exponent: i32,
}

impl PmlConfig {
    /// A configuration without any damping.
    pub fn disabled() -> Self {
        Self {
            interior_lo: [f64::NEG_INFINITY; 3],
            interior_hi: [f64::INFINITY; 3],
            width: [[0.0; 2]; 3],
            d0: [0.0; 3],
            alpha: 0.0,
            theta: [1.0; 3],
            exponent: 3,
        }
    }

    pub fn is_active(&self, axis: usize) -> bool {
        self.d0[axis] > 0.0 && self.width[axis].iter().any(|w| *w > 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            if !(self.d0[axis] >= 0.0) {
                return Err(Error::Validation(vec![format!("pml d0 on axis {axis} must be non-negative")]));
            }
            if self.width[axis].iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::Validation(vec![format!("pml width on axis {axis} must be non-negative")]));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Validation(vec!["pml alpha must be non-negative".into()]));
        }
        Ok(())
    }

    /// Damping `d_ξ(x)`: zero in the interior, `d0 (dist/δ)^n` in the layer,
    /// clamped to `d0` beyond the layer end.
    pub fn damping_at(&self, x: f64, axis: usize) -> f64 {
        let (dist, width) = if x < self.interior_lo[axis] {
            (self.interior_lo[axis] - x, self.width[axis][0])
        } else if x > self.interior_hi[axis] {
            (x - self.interior_hi[axis], self.width[axis][1])
        } else {
            return 0.0;
        };
        if width <= 0.0 {
            return 0.0;
        }
        self.d0[axis] * (dist / width).min(1.0).powi(self.exponent)
    }

    /// Nodal damping along `axis` for element `e`, one value per 1D node.
    pub fn element_damping(&self, mesh: &CartesianMesh, e: usize, axis: usize, nodes: &[f64]) -> Vec<f64> {
        nodes
            .iter()
            .map(|&r| {
                let mut reference = [0.0; 3];
                reference[axis] = r;
                self.damping_at(mesh.map_to_physical(e, reference)[axis], axis)
            })
            .collect()
    }
}

/// `d0 = (4 cp / 2δ) ln(1/tol)`.
pub fn d0_from_tol(cp: f64, width: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidTol(tol));
    }
    if !(cp > 0.0 && width > 0.0) {
        return Err(Error::InvalidExtent(format!("cp = {cp} and layer width = {width} must be positive")));
    }
    Ok(4.0 * cp / (2.0 * width) * (1.0 / tol).ln())
}

/// Resolution-dependent tolerance `tol = (W (P+1) / Δx)^{-(P+1)}`.
pub fn resolve_tol(degree: usize, spacing: f64, width: f64) -> f64 {
    let n = (degree + 1) as f64;
    (width * n / spacing).powf(-n)
}
