//! Structured Cartesian element grid with affine reference mapping.
//!
//! Elements are numbered lexicographically with the x index fastest. Each
//! element is the image of `[-1, 1]^d` under `x = x_k + (1 + q) Δx / 2`.

use crate::error::{Error, Result};
use crate::physics::MaterialModel;

/// Reflection coefficients for one external face, one per wave family.
pub type FaceGamma = [f64; 3];

/// Boundary conditions for all external faces, indexed `[axis][side]` with
/// side 0 the lower (`ξ = −1`) face and side 1 the upper face.
pub type BoundarySpec = [[FaceGamma; 2]; 3];

#[derive(Clone, Debug)]
pub struct MeshSpec {
    pub dim: usize,
    pub counts: [usize; 3],
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub boundary: BoundarySpec,
}

impl MeshSpec {
    /// Uniform γ on every external face.
    pub fn uniform(dim: usize, counts: [usize; 3], lo: [f64; 3], hi: [f64; 3], gamma: f64) -> Self {
        Self { dim, counts, lo, hi, boundary: [[[gamma; 3]; 2]; 3] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaceKind {
    Interior(usize),
    Boundary(FaceGamma),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceRef {
    pub element: usize,
    pub axis: usize,
    /// −1 or +1.
    pub side: i8,
    pub kind: FaceKind,
}

#[derive(Clone, Debug)]
pub struct CartesianMesh {
    pub dim: usize,
    pub counts: [usize; 3],
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub spacing: [f64; 3],
    pub boundary: BoundarySpec,
    pub materials: Vec<MaterialModel>,
    pub material_id: Vec<usize>,
}

pub fn build_mesh(spec: &MeshSpec, material: MaterialModel) -> Result<CartesianMesh> {
    if spec.dim != 2 && spec.dim != 3 {
        return Err(Error::InvalidExtent(format!("dimension {} must be 2 or 3", spec.dim)));
    }
    let mut counts = spec.counts;
    let mut lo = spec.lo;
    let mut hi = spec.hi;
    let mut spacing = [1.0; 3];
    for axis in 0..3 {
        if axis >= spec.dim {
            counts[axis] = 1;
            lo[axis] = 0.0;
            hi[axis] = 1.0;
            continue;
        }
        if counts[axis] == 0 {
            return Err(Error::InvalidExtent(format!("axis {axis}: element count must be positive")));
        }
        if !(hi[axis] > lo[axis]) || !lo[axis].is_finite() || !hi[axis].is_finite() {
            return Err(Error::InvalidExtent(format!(
                "axis {axis}: [{}, {}] is not a positive interval",
                lo[axis], hi[axis]
            )));
        }
        spacing[axis] = (hi[axis] - lo[axis]) / counts[axis] as f64;
        for face in &spec.boundary[axis] {
            for &g in face {
                if !(g.abs() <= 1.0) {
                    return Err(Error::InvalidReflectionCoefficient(g));
                }
            }
        }
    }
    let n_el = counts.iter().product();
    Ok(CartesianMesh {
        dim: spec.dim,
        counts,
        lo,
        hi,
        spacing,
        boundary: spec.boundary,
        materials: vec![material],
        material_id: vec![0; n_el],
    })
}

impl CartesianMesh {
    pub fn num_elements(&self) -> usize {
        self.counts.iter().product()
    }

    /// Replaces the material table, assigning each element by its centroid.
    pub fn assign_materials<F>(&mut self, materials: Vec<MaterialModel>, select: F) -> Result<()>
    where
        F: Fn([f64; 3]) -> usize,
    {
        let mut ids = Vec::with_capacity(self.num_elements());
        for e in 0..self.num_elements() {
            let id = select(self.centroid(e));
            if id >= materials.len() {
                return Err(Error::ShapeMismatch(format!("material id {id} out of range")));
            }
            ids.push(id);
        }
        self.materials = materials;
        self.material_id = ids;
        Ok(())
    }

    pub fn material(&self, e: usize) -> &MaterialModel {
        &self.materials[self.material_id[e]]
    }

    /// Integer coordinates `(k, l, m)` of element `e`.
    pub fn element_coords(&self, e: usize) -> [usize; 3] {
        let [k, l, _] = self.counts;
        [e % k, (e / k) % l, e / (k * l)]
    }

    pub fn element_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.counts[0] * (c[1] + self.counts[1] * c[2])
    }

    /// Jacobian `Π (Δξ/2)` over the active axes.
    pub fn jacobian(&self) -> f64 {
        self.spacing[..self.dim].iter().map(|d| 0.5 * d).product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn element_lo(&self, e: usize) -> [f64; 3] {
        let c = self.element_coords(e);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = self.lo[a] + c[a] as f64 * self.spacing[a];
        }
        out
    }

    pub fn centroid(&self, e: usize) -> [f64; 3] {
        self.map_to_physical(e, [0.0; 3])
    }

    pub fn map_to_physical(&self, e: usize, r: [f64; 3]) -> [f64; 3] {
        let base = self.element_lo(e);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = base[a] + 0.5 * (1.0 + r[a]) * self.spacing[a];
        }
        out
    }

    pub fn neighbor(&self, e: usize, axis: usize, side: i8) -> Option<usize> {
        let mut c = self.element_coords(e);
        if side < 0 {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        } else {
            if c[axis] + 1 == self.counts[axis] {
                return None;
            }
            c[axis] += 1;
        }
        Some(self.element_index(c))
    }

    pub fn face(&self, e: usize, axis: usize, side: i8) -> FaceRef {
        let kind = match self.neighbor(e, axis, side) {
            Some(nb) => FaceKind::Interior(nb),
            None => FaceKind::Boundary(self.boundary[axis][usize::from(side > 0)]),
        };
        FaceRef { element: e, axis, side, kind }
    }

    /// Element owning `x` and the reference coordinates of `x` in it. Points on
    /// an element interface belong to the lower-index element.
    pub fn locate_point(&self, x: [f64; 3]) -> Result<(usize, [f64; 3])> {
        let mut c = [0usize; 3];
        let mut r = [0.0; 3];
        for a in 0..self.dim {
            let extent = self.hi[a] - self.lo[a];
            let tol = 1e-9 * extent;
            if !(x[a] >= self.lo[a] - tol && x[a] <= self.hi[a] + tol) {
                return Err(Error::PointOutsideDomain { x: x[0], y: x[1], z: x[2] });
            }
            let t = (x[a] - self.lo[a]) / self.spacing[a];
            let k = (t.ceil() as i64 - 1).clamp(0, self.counts[a] as i64 - 1) as usize;
            c[a] = k;
            r[a] = (2.0 * (t - k as f64) - 1.0).clamp(-1.0, 1.0);
        }
        Ok((self.element_index(c), r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_material() -> MaterialModel {
        MaterialModel::isotropic(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn strip_mesh_counts() {
        let spec = MeshSpec::uniform(2, [24, 10, 1], [-60e3, 0.0, 0.0], [60e3, 50e3, 0.0], 0.0);
        let mesh = build_mesh(&spec, unit_material()).unwrap();
        assert_eq!(mesh.num_elements(), 240);
        assert_eq!(mesh.spacing[0], 5e3);
        assert_eq!(mesh.spacing[1], 5e3);
    }

    #[test]
    fn unit_box_jacobian() {
        let spec = MeshSpec::uniform(3, [1, 1, 1], [0.0; 3], [1.0; 3], 0.0);
        let mesh = build_mesh(&spec, unit_material()).unwrap();
        assert_eq!(mesh.jacobian(), 0.125);
    }

    #[test]
    fn loh1_box() {
        let spec = MeshSpec::uniform(3, [25; 3], [0.0, -2287.0, -2287.0], [16333.0, 14046.0, 14046.0], 0.0);
        let mesh = build_mesh(&spec, unit_material()).unwrap();
        assert_eq!(mesh.num_elements(), 15625);
        let (e, r) = mesh.locate_point([2000.0, 0.0, 0.0]).unwrap();
        let back = mesh.map_to_physical(e, r);
        for a in 0..3 {
            assert!((back[a] - [2000.0, 0.0, 0.0][a]).abs() <= 1e-12 * 16333.0);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = MeshSpec::uniform(2, [2, 2, 1], [0.0; 3], [1.0; 3], 0.0);
        spec.boundary[1][0] = [1.5, 0.0, 0.0];
        assert!(matches!(build_mesh(&spec, unit_material()), Err(Error::InvalidReflectionCoefficient(_))));
        let spec = MeshSpec::uniform(2, [0, 2, 1], [0.0; 3], [1.0; 3], 0.0);
        assert!(matches!(build_mesh(&spec, unit_material()), Err(Error::InvalidExtent(_))));
        let spec = MeshSpec::uniform(2, [2, 2, 1], [0.0; 3], [0.0, 1.0, 1.0], 0.0);
        assert!(matches!(build_mesh(&spec, unit_material()), Err(Error::InvalidExtent(_))));
    }

    #[test]
    fn reference_mapping_edges() {
        let spec = MeshSpec::uniform(2, [2, 2, 1], [0.0; 3], [10.0, 10.0, 0.0], 0.0);
        let mesh = build_mesh(&spec, unit_material()).unwrap();
        assert_eq!(mesh.map_to_physical(1, [-1.0, 0.0, 0.0])[0], 5.0);
        assert_eq!(mesh.map_to_physical(1, [1.0, 0.0, 0.0])[0], 10.0);
        assert_eq!(mesh.map_to_physical(1, [0.0, 0.0, 0.0]), [7.5, 2.5, 0.0]);
    }

    #[test]
    fn locate_examples() {
        let spec = MeshSpec::uniform(2, [2, 2, 1], [0.0; 3], [10.0, 10.0, 0.0], 0.0);
        let mesh = build_mesh(&spec, unit_material()).unwrap();
        assert_eq!(mesh.locate_point([2.5, 2.5, 0.0]).unwrap(), (0, [0.0, 0.0, 0.0]));
        let (e, r) = mesh.locate_point([5.0, 2.5, 0.0]).unwrap();
        assert_eq!((e, r[0]), (0, 1.0));
        assert_eq!(mesh.locate_point([0.0, 0.0, 0.0]).unwrap(), (0, [-1.0, -1.0, 0.0]));
        assert_eq!(mesh.locate_point([10.0, 10.0, 0.0]).unwrap(), (3, [1.0, 1.0, 0.0]));
        assert!(matches!(mesh.locate_point([10.1, 0.0, 0.0]), Err(Error::PointOutsideDomain { .. })));
    }

    #[test]
    fn face_pairing_and_count() {
        let spec = MeshSpec::uniform(3, [3, 2, 4], [0.0; 3], [1.0, 2.0, 3.0], 0.0);
        let mesh = build_mesh(&spec, unit_material()).unwrap();
        let (mut interior, mut boundary) = (0, 0);
        for e in 0..mesh.num_elements() {
            for axis in 0..3 {
                for side in [-1i8, 1] {
                    match mesh.face(e, axis, side).kind {
                        FaceKind::Interior(nb) => {
                            interior += 1;
                            assert_eq!(mesh.face(nb, axis, -side).kind, FaceKind::Interior(e));
                        }
                        FaceKind::Boundary(_) => boundary += 1,
                    }
                }
            }
        }
        assert_eq!(interior + boundary, 6 * 24);
        assert_eq!(interior % 2, 0);
    }

    proptest! {
        #[test]
        fn locate_roundtrip(x in 0.0f64..16.0, y in -3.0f64..7.0, z in 1.0f64..2.0) {
            let spec = MeshSpec::uniform(3, [7, 5, 3], [0.0, -3.0, 1.0], [16.0, 7.0, 2.0], 0.0);
            let mesh = build_mesh(&spec, unit_material()).unwrap();
            let (e, r) = mesh.locate_point([x, y, z]).unwrap();
            let back = mesh.map_to_physical(e, r);
            prop_assert!((back[0] - x).abs() <= 1e-12 * 16.0);
            prop_assert!((back[1] - y).abs() <= 1e-12 * 10.0);
            prop_assert!((back[2] - z).abs() <= 1e-12 * 2.0);
        }
    }
}
