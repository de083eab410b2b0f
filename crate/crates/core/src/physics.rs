//! The velocity-stress system: state layout, coefficient and material matrices,
//! wave speeds, impedances, tractions and characteristic variables.
//!
//! The 3D state is `(vx, vy, vz, σxx, σyy, σzz, σxy, σxz, σyz)`. The 2D mode is
//! the plane-strain P-SV restriction `(vx, vy, σxx, σyy, σxy)` with `∂/∂z = 0`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Stress slot (index into the stress block) of `T_η` on a face normal to `ξ`.
const TRACTION_SLOT_3D: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];
const TRACTION_SLOT_2D: [[usize; 2]; 2] = [[0, 2], [2, 1]];

/// Positions of the 2D components inside the 3D state vector.
pub const COMPONENTS_2D_IN_3D: [usize; 5] = [0, 1, 3, 4, 6];
/// Rows/columns of the 6×6 stiffness retained in plane strain.
pub const STRESS_2D_IN_3D: [usize; 3] = [0, 1, 3];

/// Number of state components for spatial dimension `dim` (2 or 3).
pub fn ncomp(dim: usize) -> usize {
    if dim == 2 {
        5
    } else {
        9
    }
}

/// Number of stress components for `dim`.
pub fn nstress(dim: usize) -> usize {
    if dim == 2 {
        3
    } else {
        6
    }
}

/// Stress slot carrying the traction component `η` on a face normal to `ξ`.
#[inline]
pub fn traction_slot(dim: usize, xi: usize, eta: usize) -> usize {
    if dim == 2 {
        TRACTION_SLOT_2D[xi][eta]
    } else {
        TRACTION_SLOT_3D[xi][eta]
    }
}

/// State index of the traction component `η` on a face normal to `ξ`.
#[inline]
pub fn traction_component(dim: usize, xi: usize, eta: usize) -> usize {
    dim + traction_slot(dim, xi, eta)
}

/// `T = a_ξ σ` for a full 3D stress vector `(σxx, σyy, σzz, σxy, σxz, σyz)`.
pub fn traction(sigma: &[f64; 6], xi: usize) -> [f64; 3] {
    let s = TRACTION_SLOT_3D[xi];
    [sigma[s[0]], sigma[s[1]], sigma[s[2]]]
}

/// Characteristic amplitudes `q = (Zv + T)/2`, `p = (Zv − T)/2`.
#[inline]
pub fn characteristics(v: f64, t: f64, z: f64) -> (f64, f64) {
    (0.5 * (z * v + t), 0.5 * (z * v - t))
}

/// Inverse of [`characteristics`]: `v = (q + p)/Z`, `T = q − p`.
#[inline]
pub fn from_characteristics(q: f64, p: f64, z: f64) -> (f64, f64) {
    ((q + p) / z, q - p)
}

/// Isotropic 6×6 stiffness in `(xx, yy, zz, xy, xz, yz)` ordering.
pub fn isotropic_stiffness(lambda: f64, mu: f64) -> Result<[[f64; 6]; 6]> {
    if !(mu > 0.0 && lambda > -mu && lambda.is_finite() && mu.is_finite()) {
        return Err(Error::InvalidLame { lambda, mu });
    }
    let mut c = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = if i == j { lambda + 2.0 * mu } else { lambda };
        }
        c[i + 3][i + 3] = mu;
    }
    if !is_spd(&c) {
        return Err(Error::NotSpd);
    }
    Ok(c)
}

fn stiffness_matrix(c: &[[f64; 6]; 6]) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| c[i][j])
}

fn is_spd(c: &[[f64; 6]; 6]) -> bool {
    stiffness_matrix(c).cholesky().is_some()
}

/// Density plus 6×6 stiffness, with the Lamé pair cached for isotropic media.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialModel {
    pub rho: f64,
    pub c: [[f64; 6]; 6],
    lame: Option<(f64, f64)>,
}

impl MaterialModel {
    pub fn isotropic(rho: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidExtent(format!("density {rho} must be positive")));
        }
        let c = isotropic_stiffness(lambda, mu)?;
        Ok(Self { rho, c, lame: Some((lambda, mu)) })
    }

    /// Builds an isotropic material from density and P/S wave speeds.
    pub fn from_velocities(rho: f64, cp: f64, cs: f64) -> Result<Self> {
        let mu = rho * cs * cs;
        let lambda = rho * cp * cp - 2.0 * mu;
        Self::isotropic(rho, lambda, mu)
    }

    /// General anisotropic material; only symmetry and definiteness are checked.
    pub fn anisotropic(rho: f64, c: [[f64; 6]; 6]) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidExtent(format!("density {rho} must be positive")));
        }
        let scale = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..6 {
            for j in 0..i {
                if (c[i][j] - c[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::NotSpd);
                }
            }
        }
        if !is_spd(&c) {
            return Err(Error::NotSpd);
        }
        Ok(Self { rho, c, lame: None })
    }

    pub fn lame(&self) -> Option<(f64, f64)> {
        self.lame
    }

    pub fn is_isotropic(&self) -> bool {
        self.lame.is_some()
    }

    pub fn wave_speeds(&self) -> Result<(f64, f64)> {
        let (lambda, mu) = self.lame.ok_or(Error::AnisotropicUnsupported)?;
        Ok((((2.0 * mu + lambda) / self.rho).sqrt(), (mu / self.rho).sqrt()))
    }

    /// `Z_η = ρ c_η` with `c_η = cp` for `η = ξ` and `cs` otherwise.
    pub fn impedance(&self, xi: usize, eta: usize) -> Result<f64> {
        let (cp, cs) = self.wave_speeds()?;
        Ok(self.rho * if xi == eta { cp } else { cs })
    }

    /// Stiffness restricted to the stress components of `dim`.
    pub fn stiffness(&self, dim: usize) -> DMatrix<f64> {
        if dim == 2 {
            DMatrix::from_fn(3, 3, |i, j| self.c[STRESS_2D_IN_3D[i]][STRESS_2D_IN_3D[j]])
        } else {
            stiffness_matrix(&self.c)
        }
    }

    /// Compliance `C⁻¹` on the stress components of `dim`.
    pub fn compliance(&self, dim: usize) -> DMatrix<f64> {
        self.stiffness(dim).try_inverse().expect("stiffness is positive definite")
    }

    /// Material matrix `P = diag(ρ⁻¹ I, C)`.
    pub fn material_matrix(&self, dim: usize) -> DMatrix<f64> {
        let n = ncomp(dim);
        let c = self.stiffness(dim);
        DMatrix::from_fn(n, n, |i, j| {
            if i < dim || j < dim {
                if i == j {
                    1.0 / self.rho
                } else {
                    0.0
                }
            } else {
                c[(i - dim, j - dim)]
            }
        })
    }

    /// Eigenvalues of `P·A_ξ` in ascending order.
    ///
    /// `P A` is similar to the symmetric `P^{1/2} A P^{1/2}`, whose spectrum is
    /// computed with a symmetric eigensolver.
    pub fn eigen_spectrum(&self, dim: usize, xi: usize) -> Vec<f64> {
        let p = self.material_matrix(dim);
        let sqrt_p = {
            let eig = SymmetricEigen::new(p);
            let d = eig.eigenvalues.map(f64::sqrt);
            &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
        };
        let a = coefficient_matrix(dim, xi);
        let sym = &sqrt_p * a * &sqrt_p;
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

/// The symmetric 0/1 coefficient matrix `A_ξ` of size `ncomp(dim)`.
pub fn coefficient_matrix(dim: usize, xi: usize) -> DMatrix<f64> {
    let n = ncomp(dim);
    let mut a = DMatrix::zeros(n, n);
    for eta in 0..dim {
        let s = traction_component(dim, xi, eta);
        a[(eta, s)] = 1.0;
        a[(s, eta)] = 1.0;
    }
    a
}

/// Restricts a 9×9 operator to the 5 plane-strain components.
pub fn restrict_to_2d(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(5, 5, |i, j| m[(COMPONENTS_2D_IN_3D[i], COMPONENTS_2D_IN_3D[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn unit_lame_stiffness() {
        let c = isotropic_stiffness(1.0, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[i][j], if i == j { 3.0 } else { 1.0 });
            }
            assert_eq!(c[i + 3][i + 3], 1.0);
        }
        let c = isotropic_stiffness(0.0, 1.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i != j { 0.0 } else if i < 3 { 2.0 } else { 1.0 };
                assert_eq!(c[i][j], expected);
            }
        }
    }

    #[test]
    fn lame_validation() {
        assert!(matches!(isotropic_stiffness(1.0, 0.0), Err(Error::InvalidLame { .. })));
        assert!(matches!(isotropic_stiffness(-1.5, 1.0), Err(Error::InvalidLame { .. })));
        // -μ < λ ≤ -2μ/3 passes the Lamé check but the bulk modulus is not positive.
        assert!(matches!(isotropic_stiffness(-0.8, 1.0), Err(Error::NotSpd)));
        assert!(isotropic_stiffness(-0.6, 1.0).is_ok());
    }

    #[test]
    fn lame_from_half_space_speeds() {
        let m = MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap();
        let (lambda, mu) = m.lame().unwrap();
        assert!(rel_close(mu, 3.2398e10, 1e-4));
        assert!(rel_close(lambda, 3.2404e10, 1e-4));
        let (cp, cs) = m.wave_speeds().unwrap();
        assert!(rel_close(cp, 6000.0, 1e-9) && rel_close(cs, 3464.0, 1e-9));
    }

    #[test]
    fn wave_speed_examples() {
        let m = MaterialModel::isotropic(1.0, 1.0, 1.0).unwrap();
        let (cp, cs) = m.wave_speeds().unwrap();
        assert!(rel_close(cp, 3f64.sqrt(), 1e-15) && cs == 1.0);
        let layer = MaterialModel::from_velocities(2600.0, 4000.0, 2000.0).unwrap();
        let (cp, cs) = layer.wave_speeds().unwrap();
        assert!(rel_close(cp, 4000.0, 1e-9) && rel_close(cs, 2000.0, 1e-9));
        let aniso = MaterialModel::anisotropic(1.0, isotropic_stiffness(1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(aniso.wave_speeds(), Err(Error::AnisotropicUnsupported)));
    }

    #[test]
    fn impedance_examples() {
        let m = MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap();
        assert!(rel_close(m.impedance(0, 0).unwrap(), 1.62e7, 1e-12));
        assert!(rel_close(m.impedance(0, 1).unwrap(), 9.3528e6, 1e-12));
        let unit = MaterialModel { rho: 1.0, c: [[0.0; 6]; 6], lame: Some((-1.0, 1.0)) };
        assert_eq!(unit.impedance(0, 0).unwrap(), 1.0);
        assert_eq!(unit.impedance(0, 2).unwrap(), 1.0);
    }

    #[test]
    fn traction_examples() {
        assert_eq!(traction(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0), [1.0, 0.0, 0.0]);
        assert_eq!(traction(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 1), [1.0, 0.0, 0.0]);
        assert_eq!(traction(&[0.0; 6], 2), [0.0; 3]);
        let s = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(traction(&s, 0), [1.0, 4.0, 5.0]);
        assert_eq!(traction(&s, 2), [5.0, 6.0, 3.0]);
        // 2D x-face traction is (σxx, σxy)
        assert_eq!([traction_slot(2, 0, 0), traction_slot(2, 0, 1)], [0, 2]);
    }

    #[test]
    fn characteristic_examples() {
        assert_eq!(characteristics(0.0, 0.0, 3.0), (0.0, 0.0));
        assert_eq!(characteristics(1.0, 0.0, 2.0), (1.0, 1.0));
    }

    #[test]
    fn coefficient_matrices_symmetric_zero_one() {
        for dim in [2, 3] {
            for xi in 0..dim {
                let a = coefficient_matrix(dim, xi);
                assert_eq!(a, a.transpose());
                assert!(a.iter().all(|&v| v == 0.0 || v == 1.0));
                assert_eq!(a.iter().sum::<f64>(), 2.0 * dim as f64);
            }
        }
    }

    #[test]
    fn restriction_matches_2d_matrices() {
        for xi in 0..2 {
            assert_eq!(restrict_to_2d(&coefficient_matrix(3, xi)), coefficient_matrix(2, xi));
        }
        let ax = coefficient_matrix(2, 0);
        // velocity rows pick (σxx, σxy)
        assert_eq!(ax[(0, 2)], 1.0);
        assert_eq!(ax[(1, 4)], 1.0);
        assert_eq!(ax.row(0).sum() + ax.row(1).sum(), 2.0);
    }

    #[test]
    fn plane_strain_subsystem_is_closed() {
        // For z-invariant fields the retained rows of P·A_x, P·A_y never read the
        // deleted components (vz, σzz, σxz, σyz).
        let m = MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap();
        let p = m.material_matrix(3);
        let deleted = [2usize, 5, 7, 8];
        for xi in 0..2 {
            let pa = &p * coefficient_matrix(3, xi);
            for &r in &COMPONENTS_2D_IN_3D {
                for &c in &deleted {
                    assert_eq!(pa[(r, c)], 0.0);
                }
            }
            let restricted = restrict_to_2d(&pa);
            let direct = m.material_matrix(2) * coefficient_matrix(2, xi);
            assert!((restricted - direct).abs().max() <= 1e-3);
        }
    }

    fn check_spectrum(m: &MaterialModel, dim: usize) {
        let (cp, cs) = m.wave_speeds().unwrap();
        let expected: Vec<f64> = if dim == 3 {
            vec![-cp, -cs, -cs, 0.0, 0.0, 0.0, cs, cs, cp]
        } else {
            vec![-cp, -cs, 0.0, cs, cp]
        };
        for xi in 0..dim {
            let got = m.eigen_spectrum(dim, xi);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() <= 1e-9 * cp, "xi={xi}: {got:?}");
            }
        }
    }

    #[test]
    fn spectrum_examples() {
        check_spectrum(&MaterialModel::from_velocities(2700.0, 6000.0, 3464.0).unwrap(), 3);
        check_spectrum(&MaterialModel::isotropic(1.0, 1.0, 1.0).unwrap(), 3);
        check_spectrum(&MaterialModel::from_velocities(2600.0, 4000.0, 2000.0).unwrap(), 2);
    }

    proptest! {
        #[test]
        fn characteristic_roundtrip(v in -1e3f64..1e3, t in -1e9f64..1e9, z in 1e3f64..1e8) {
            let (q, p) = characteristics(v, t, z);
            let (v2, t2) = from_characteristics(q, p, z);
            prop_assert!((v2 - v).abs() <= 1e-14 * (v.abs() + t.abs() / z));
            prop_assert!((t2 - t).abs() <= 1e-14 * (t.abs() + z * v.abs()));
        }

        #[test]
        fn spectrum_has_two_speeds_and_triple_kernel(
            rho in 1000.0f64..4000.0, cs in 1000.0f64..4000.0, ratio in 1.5f64..2.5
        ) {
            let m = MaterialModel::from_velocities(rho, ratio * cs, cs).unwrap();
            check_spectrum(&m, 3);
        }
    }
}
