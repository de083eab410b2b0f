//! Hat variables, flux fluctuations and flux vectors on element faces.
//!
//! Each wave family `η` is an independent scalar Riemann problem. With
//! `q = (Zv + T)/2` and `p = (Zv − T)/2`, `p` leaves an element through its
//! `ξ = +1` face and `q` leaves through its `ξ = −1` face. Hat variables keep the
//! outgoing characteristic and set the ingoing one from the boundary or
//! interface condition:
//!
//! * boundary at `+1`: `q̂ = γ p`; boundary at `−1`: `p̂ = γ q`;
//! * interface: continuity of `v̂` and `T̂` across the face.

use crate::error::{Error, Result};
use crate::physics::{characteristics, from_characteristics, ncomp, traction_component};

/// Face data `(v̂, T̂)`, one entry per wave family (the third is unused in 2D).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TractionVelocityPair {
    pub v: [f64; 3],
    pub t: [f64; 3],
}

/// Boundary hat pair for one family.
#[inline]
pub fn hat_boundary_scalar(v: f64, t: f64, z: f64, gamma: f64, side: i8) -> (f64, f64) {
    let (q, p) = characteristics(v, t, z);
    if side > 0 {
        from_characteristics(gamma * p, p, z)
    } else {
        from_characteristics(q, gamma * q, z)
    }
}

/// Interface hat pair for one family; `−` is the element on the lower side of
/// the face (its `+1` face), `+` the element on the upper side.
#[inline]
pub fn hat_interface_scalar(vm: f64, tm: f64, zm: f64, vp: f64, tp: f64, zp: f64) -> (f64, f64) {
    let (_, p_minus) = characteristics(vm, tm, zm);
    let (q_plus, _) = characteristics(vp, tp, zp);
    let inv = 1.0 / (zm + zp);
    (2.0 * (p_minus + q_plus) * inv, 2.0 * (zm * q_plus - zp * p_minus) * inv)
}

/// `G = ½Z(v − v̂) ± ½(T − T̂)` with `+` at the `+1` face and `−` at `−1`.
#[inline]
pub fn fluctuation_scalar(v: f64, t: f64, vh: f64, th: f64, z: f64, side: i8) -> f64 {
    let s = if side > 0 { 0.5 } else { -0.5 };
    0.5 * z * (v - vh) + s * (t - th)
}

fn check_gamma(gamma: &[f64]) -> Result<()> {
    match gamma.iter().find(|g| !(g.abs() <= 1.0)) {
        Some(&g) => Err(Error::InvalidReflectionCoefficient(g)),
        None => Ok(()),
    }
}

/// Hat variables at an external face for every family in `v`.
pub fn hat_boundary(
    v: &[f64],
    t: &[f64],
    z: &[f64],
    gamma: &[f64],
    side: i8,
) -> Result<TractionVelocityPair> {
    check_gamma(gamma)?;
    let mut out = TractionVelocityPair::default();
    for eta in 0..v.len() {
        let (vh, th) = hat_boundary_scalar(v[eta], t[eta], z[eta], gamma[eta], side);
        out.v[eta] = vh;
        out.t[eta] = th;
    }
    Ok(out)
}

/// Hat variables at an interior face for every family in `vm`.
pub fn hat_interface(
    vm: &[f64],
    tm: &[f64],
    zm: &[f64],
    vp: &[f64],
    tp: &[f64],
    zp: &[f64],
) -> TractionVelocityPair {
    let mut out = TractionVelocityPair::default();
    for eta in 0..vm.len() {
        let (vh, th) = hat_interface_scalar(vm[eta], tm[eta], zm[eta], vp[eta], tp[eta], zp[eta]);
        out.v[eta] = vh;
        out.t[eta] = th;
    }
    out
}

/// Fluctuations for every family.
pub fn fluctuation(
    v: &[f64],
    t: &[f64],
    hat: &TractionVelocityPair,
    z: &[f64],
    side: i8,
) -> Vec<f64> {
    (0..v.len())
        .map(|eta| fluctuation_scalar(v[eta], t[eta], hat.v[eta], hat.t[eta], z[eta], side))
        .collect()
}

/// Flux vector `(G; ∓ a_ξᵀ Z⁻¹ G)` in the state layout of dimension `dim`:
/// `FL` (minus sign) at `side = −1`, `FR` (plus sign) at `side = +1`.
pub fn flux_vectors(g: &[f64], z: &[f64], dim: usize, xi: usize, side: i8) -> Vec<f64> {
    let mut f = vec![0.0; ncomp(dim)];
    let sign = if side > 0 { 1.0 } else { -1.0 };
    for eta in 0..dim {
        f[eta] = g[eta];
        f[traction_component(dim, xi, eta)] = sign * g[eta] / z[eta];
    }
    f
}

/// Residual of the boundary condition for a hat pair: `q̂ − γ p̂` at `+1`,
/// `p̂ − γ q̂` at `−1`.
pub fn boundary_residual(vh: f64, th: f64, z: f64, gamma: f64, side: i8) -> f64 {
    let (q, p) = characteristics(vh, th, z);
    if side > 0 {
        q - gamma * p
    } else {
        p - gamma * q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundary_special_cases() {
        for side in [-1i8, 1] {
            let (v, t, z) = (0.7, -3.1, 2.5);
            let (_, th) = hat_boundary_scalar(v, t, z, 1.0, side);
            assert!(th.abs() < 1e-15, "free surface must be traction free");
            let (vh, _) = hat_boundary_scalar(v, t, z, -1.0, side);
            assert!(vh.abs() < 1e-15, "clamped boundary must have zero velocity");
            let (vh, th) = hat_boundary_scalar(v, t, z, 0.0, side);
            let (q, p) = characteristics(vh, th, z);
            let ingoing = if side > 0 { q } else { p };
            assert_eq!(ingoing, 0.0);
            // outgoing characteristic preserved
            let (q0, p0) = characteristics(v, t, z);
            let (outgoing, outgoing0) = if side > 0 { (p, p0) } else { (q, q0) };
            assert!((outgoing - outgoing0).abs() < 1e-15);
        }
    }

    #[test]
    fn interface_examples() {
        let (vh, th) = hat_interface_scalar(0.3, 2.0, 4.0, 0.3, 2.0, 4.0);
        assert!((vh - 0.3).abs() < 1e-15 && (th - 2.0).abs() < 1e-15);
        // Velocity jump v⁻ = 1, v⁺ = 0 with Z = 2 on both sides: the outgoing
        // characteristics p⁻ = 1, q⁺ = 0 give v̂ = 1/2 and T̂ = −Z/2.
        let (vh, th) = hat_interface_scalar(1.0, 0.0, 2.0, 0.0, 0.0, 2.0);
        assert_eq!((vh, th), (0.5, -1.0));
    }

    #[test]
    fn fluctuation_examples() {
        assert_eq!(fluctuation_scalar(1.0, 2.0, 1.0, 2.0, 3.0, 1), 0.0);
        assert_eq!(fluctuation_scalar(1.0, 0.0, 0.0, 0.0, 2.0, 1), 1.0);
        assert_eq!(fluctuation_scalar(0.0, 2.0, 0.0, 0.0, 2.0, -1), -1.0);
    }

    #[test]
    fn flux_vector_examples() {
        assert!(flux_vectors(&[0.0; 3], &[1.0; 3], 3, 0, 1).iter().all(|v| *v == 0.0));
        let f = flux_vectors(&[1.0, 0.0, 0.0], &[2.0, 1.0, 1.0], 3, 0, 1);
        assert_eq!(f, vec![1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = flux_vectors(&[1.0, 0.0, 0.0], &[2.0, 1.0, 1.0], 3, 0, -1);
        assert_eq!(f[3], -0.5);
        let f = flux_vectors(&[0.0, 3.0], &[2.0, 1.5], 2, 1, 1);
        assert_eq!(f, vec![0.0, 3.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn gamma_validation() {
        assert!(matches!(
            hat_boundary(&[0.0], &[0.0], &[1.0], &[1.2], 1),
            Err(Error::InvalidReflectionCoefficient(_))
        ));
    }

    proptest! {
        #[test]
        fn boundary_residual_vanishes(
            v in -1.0f64..1.0, t in -1e7f64..1e7, z in 1e6f64..2e7,
            gi in 0usize..5, side in prop::sample::select(vec![-1i8, 1])
        ) {
            let gamma = [-1.0, -0.5, 0.0, 0.5, 1.0][gi];
            let (vh, th) = hat_boundary_scalar(v, t, z, gamma, side);
            let scale = z * v.abs() + t.abs();
            prop_assert!(boundary_residual(vh, th, z, gamma, side).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn interface_conditions_hold(
            vm in -1.0f64..1.0, tm in -1e7f64..1e7, zm in 1e6f64..2e7,
            vp in -1.0f64..1.0, tp in -1e7f64..1e7, zp in 1e6f64..2e7,
        ) {
            let (vh, th) = hat_interface_scalar(vm, tm, zm, vp, tp, zp);
            let scale = (zm + zp) * (vm.abs() + vp.abs()) + tm.abs() + tp.abs();
            // outgoing characteristic of each side is preserved
            let (_, pm) = characteristics(vm, tm, zm);
            let (_, pm_hat) = characteristics(vh, th, zm);
            let (qp, _) = characteristics(vp, tp, zp);
            let (qp_hat, _) = characteristics(vh, th, zp);
            prop_assert!((pm - pm_hat).abs() <= 1e-12 * scale);
            prop_assert!((qp - qp_hat).abs() <= 1e-12 * scale);
        }

        #[test]
        fn penalty_energy_identity(
            v in -1.0f64..1.0, t in -1e7f64..1e7, z in 1e6f64..2e7,
            gamma in -1.0f64..1.0, side in prop::sample::select(vec![-1i8, 1])
        ) {
            // v G ± T G / Z ∓ v T = |G|²/Z ∓ T̂ v̂
            let (vh, th) = hat_boundary_scalar(v, t, z, gamma, side);
            let g = fluctuation_scalar(v, t, vh, th, z, side);
            let s = f64::from(side);
            let lhs = v * g + s * t * g / z - s * v * t;
            let rhs = g * g / z - s * th * vh;
            let scale = (z * v * v).abs() + (t * t / z).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}
