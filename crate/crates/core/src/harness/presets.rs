//! Built-in benchmark setups, written in the configuration text format.

use super::config::{parse_config, Damping, RunConfig};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 6] = ["strip2d", "halfplane2d", "hws3d", "hhs3d", "loh1", "planewave"];

/// Vertical PML strip: free surface on top, absorbing bottom wall, PML on
/// both vertical sides.
const STRIP2D: &str = "
[run]
name = strip2d
dimension = 2
degree = 5
cfl = 0.9
t_end = 100 s

[mesh]
lo = -60 km, 0 km
hi = 60 km, 50 km
spacing = 5 km

[material]
rho = 2.7 g/cm3
cp = 6 km/s
cs = 3.464 km/s

[boundary]
x- = absorbing
x+ = absorbing
y- = free
y+ = absorbing

[pml]
width.x = 10 km, 10 km
tol = 1e-6
alpha = 0.15 1/s
theta = 1
exponent = 3

[initial]
kind = gaussian
center = 0 km, 25 km
halfwidth = 3 km
amplitude = 1
components = vx, vy

[receiver.surface]
location = 20 km, 0 km

[receiver.interior]
location = 40 km, 25 km

[output]
interval = 0.5 s
seismogram_interval = 0 s
";

/// Half-plane closed by two vertical layers, a horizontal layer and corners.
const HALFPLANE2D: &str = "
[run]
name = halfplane2d
dimension = 2
degree = 5
cfl = 0.9
t_end = 100 s

[mesh]
lo = -60 km, 0 km
hi = 60 km, 60 km
spacing = 5 km

[material]
rho = 2.7 g/cm3
cp = 6 km/s
cs = 3.464 km/s

[boundary]
x- = absorbing
x+ = absorbing
y- = free
y+ = absorbing

[pml]
width.x = 10 km, 10 km
width.y = 0 km, 10 km
tol = 1e-6
alpha = 0.15 1/s
theta = 1
exponent = 3

[initial]
kind = gaussian
center = 0 km, 25 km
halfwidth = 3 km
amplitude = 1
components = vx, vy

[receiver.surface]
location = 20 km, 0 km

[receiver.interior]
location = 40 km, 25 km

[output]
interval = 0.5 s
seismogram_interval = 0 s
";

/// Explosive source in a homogeneous whole space. The PML lies inside the
/// cube, three elements of the 25-element grid thick.
const HWS3D: &str = "
[run]
name = hws3d
dimension = 3
degree = 5
cfl = 0.9
t_end = 3 s

[mesh]
lo = 0 km, 0 km, 0 km
hi = 10 km, 10 km, 10 km
elements = 25, 25, 25

[material]
rho = 2670 kg/m3
cp = 6000 m/s
cs = 3464 m/s

[boundary]
x- = absorbing
x+ = absorbing
y- = absorbing
y+ = absorbing
z- = absorbing
z+ = absorbing

[pml]
width.x = 1.2 km, 1.2 km
width.y = 1.2 km, 1.2 km
width.z = 1.2 km, 1.2 km
tol = 1e-3
theta = 1
exponent = 3

[source.explosion]
location = 3.4 km, 5 km, 5 km
mxx = 1e18 N*m
myy = 1e18 N*m
mzz = 1e18 N*m
stf = gaussian
sigma = 0.1149 s
t0 = 0.7 s

[receiver.r1]
location = 4.4 km, 5 km, 5 km

[receiver.r2]
location = 8.4 km, 5 km, 5 km

[output]
interval = 0.1 s
seismogram_interval = 0 s
";

/// Surface receivers of the half-space benchmarks, `(y, z)` in km at `x = 0`.
const SURFACE_RECEIVERS: [(f64, f64); 9] = [
    (0.0, 0.693),
    (0.0, 5.542),
    (0.0, 10.392),
    (0.490, 0.490),
    (3.919, 3.919),
    (7.348, 7.348),
    (0.577, 0.384),
    (4.612, 3.075),
    (8.647, 5.764),
];

fn half_space(name: &str, t_end: f64, source_depth: f64, layer: bool) -> String {
    let mut s = format!(
        "
[run]
name = {name}
dimension = 3
degree = 5
cfl = 0.9
t_end = {t_end} s

[mesh]
lo = 0 km, -2.287 km, -2.287 km
hi = 16.333 km, 14.046 km, 14.046 km
elements = 25, 25, 25

[material]
rho = 2700 kg/m3
cp = 6000 m/s
cs = 3464 m/s
"
    );
    if layer {
        s.push_str(
            "
[material.layer]
rho = 2600 kg/m3
cp = 4000 m/s
cs = 2000 m/s
region_lo = 0 km, -2.287 km, -2.287 km
region_hi = 1 km, 14.046 km, 14.046 km
",
        );
    }
    s.push_str(&format!(
        "
[boundary]
x- = free
x+ = absorbing
y- = absorbing
y+ = absorbing
z- = absorbing
z+ = absorbing

[pml]
elements.x = 0, 3
elements.y = 3, 3
elements.z = 3, 3
tol = 1e-3
theta = 1
exponent = 3

[source.double_couple]
location = {source_depth} km, 0 km, 0 km
myz = 1e18 N*m
stf = ramp
period = 0.1 s

[output]
interval = 0.1 s
seismogram_interval = 0 s
"
    ));
    for (i, (y, z)) in SURFACE_RECEIVERS.iter().enumerate() {
        s.push_str(&format!("\n[receiver.r{}]\nlocation = 0 km, {y} km, {z} km\n", i + 1));
    }
    s
}

/// Manufactured P wave travelling along x between mirror walls.
const PLANEWAVE: &str = "
[run]
name = planewave
dimension = 2
degree = 3
cfl = 0.9
t_end = 0.5 s

[mesh]
lo = 0 km, 0 km
hi = 10 km, 0.5 km
elements = 40, 2

[material]
rho = 2700 kg/m3
cp = 6000 m/s
cs = 3464 m/s

[boundary]
x- = absorbing
x+ = absorbing
y- = free, clamped
y+ = free, clamped

[initial]
kind = planewave
direction = 1, 0, 0
mode = p
offset = 3 km
width = 2 km
amplitude = 1

[output]
interval = 0.05 s
seismogram_interval = 0 s
";

/// Preset text before overrides.
pub fn preset_text(name: &str) -> Result<String> {
    Ok(match name {
        "strip2d" => STRIP2D.to_string(),
        "halfplane2d" => HALFPLANE2D.to_string(),
        "hws3d" => HWS3D.to_string(),
        "hhs3d" => half_space("hhs3d", 5.0, 0.693, false),
        "loh1" => half_space("loh1", 9.0, 2.0, true),
        "planewave" => PLANEWAVE.to_string(),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    })
}

/// Desk-scale adjustments applied on top of a preset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PresetOverrides {
    /// Elements along the shortest axis of the mesh box.
    pub elements: Option<usize>,
    pub degree: Option<usize>,
    pub theta: Option<f64>,
    pub t_end: Option<f64>,
    pub damping: Option<Damping>,
}

pub fn preset(name: &str, overrides: &PresetOverrides) -> Result<RunConfig> {
    let mut cfg = parse_config(&preset_text(name)?)?;
    apply_overrides(&mut cfg, overrides)?;
    Ok(cfg)
}

/// Applies overrides; changes of resolution, degree or duration mark the run
/// as desk-scaled.
pub fn apply_overrides(cfg: &mut RunConfig, o: &PresetOverrides) -> Result<()> {
    if let Some(n) = o.elements {
        let before = cfg.elements;
        cfg.set_element_count(n)?;
        cfg.desk_scaled |= cfg.elements != before;
    }
    if let Some(p) = o.degree {
        cfg.desk_scaled |= p != cfg.degree;
        cfg.degree = p;
    }
    if let Some(t) = o.t_end {
        cfg.desk_scaled |= t != cfg.t_end;
        cfg.t_end = t;
    }
    if o.theta.is_some() || o.damping.is_some() {
        let pml = cfg
            .pml
            .as_mut()
            .ok_or_else(|| Error::Validation(vec![format!("preset '{}' has no PML to adjust", cfg.name)]))?;
        if let Some(theta) = o.theta {
            pml.theta = [theta; 3];
        }
        if let Some(d) = &o.damping {
            pml.damping = Some(d.clone());
        }
    }
    cfg.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::WaveMode;
    use crate::harness::config::InitialCondition;
    use crate::sources::SourceTimeFunction;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn every_preset_parses() {
        for name in PRESET_NAMES {
            let cfg = preset(name, &PresetOverrides::default()).unwrap();
            assert_eq!(cfg.name, name);
            assert!(!cfg.desk_scaled);
        }
        assert!(matches!(preset("nope", &PresetOverrides::default()), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn strip2d_matches_setup() {
        let cfg = preset("strip2d", &PresetOverrides::default()).unwrap();
        let (lo, hi) = cfg.interior();
        assert_eq!((lo[0], hi[0], lo[1], hi[1]), (-50e3, 50e3, 0.0, 50e3));
        assert_eq!(cfg.elements[..2], [24, 10]);
        let pml = cfg.pml.as_ref().unwrap();
        assert_eq!(pml.width[0], [10e3, 10e3]);
        assert_eq!(pml.width[1], [0.0, 0.0]);
        assert_eq!(pml.alpha, Some(0.15));
        assert_eq!(pml.damping, Some(Damping::Tol(1e-6)));
        assert_eq!(cfg.boundary[1][0], [1.0; 3]);
        assert_eq!(cfg.boundary[1][1], [0.0; 3]);
        assert_eq!(cfg.boundary[0], [[0.0; 3]; 2]);
        let m = &cfg.materials[0];
        assert_eq!((m.rho, m.cp, m.cs), (2700.0, 6000.0, 3464.0));
        assert!(matches!(cfg.initial, InitialCondition::Gaussian { halfwidth, .. } if halfwidth == 3e3));
        assert_eq!(cfg.t_end, 100.0);
    }

    #[test]
    fn halfplane2d_adds_bottom_layer() {
        let cfg = preset("halfplane2d", &PresetOverrides::default()).unwrap();
        let (lo, hi) = cfg.interior();
        assert_eq!((lo[1], hi[1]), (0.0, 50e3));
        assert_eq!(cfg.pml.unwrap().width[1], [0.0, 10e3]);
    }

    #[test]
    fn hws3d_matches_setup() {
        let cfg = preset("hws3d", &PresetOverrides::default()).unwrap();
        assert_eq!(cfg.hi, [10e3; 3]);
        assert_eq!(cfg.lo, [0.0; 3]);
        let s = &cfg.sources[0];
        assert_eq!(s.location, [3.4e3, 5e3, 5e3]);
        assert_eq!(s.stf, SourceTimeFunction::Gaussian { sigma: 0.1149, t0: 0.7 });
        assert_eq!(s.moment, [[1e18, 0.0, 0.0], [0.0, 1e18, 0.0], [0.0, 0.0, 1e18]]);
        assert_eq!(cfg.receivers[0].location, [4.4e3, 5e3, 5e3]);
        assert_eq!(cfg.receivers[1].location, [8.4e3, 5e3, 5e3]);
        assert_eq!(cfg.materials[0].rho, 2670.0);
        assert_eq!(cfg.pml.as_ref().unwrap().alpha, None);
        assert_eq!(cfg.pml.as_ref().unwrap().damping, Some(Damping::Tol(1e-3)));
        assert_eq!(cfg.t_end, 3.0);
    }

    #[test]
    fn hhs3d_and_loh1_match_setup() {
        for (name, depth, t_end) in [("hhs3d", 693.0, 5.0), ("loh1", 2000.0, 9.0)] {
            let cfg = preset(name, &PresetOverrides::default()).unwrap();
            assert!(close(cfg.hi[0], 16333.0) && close(cfg.lo[1], -2287.0) && close(cfg.hi[2], 14046.0));
            assert_eq!(cfg.elements, [25, 25, 25]);
            let s = &cfg.sources[0];
            assert!(close(s.location[0], depth));
            assert_eq!(s.moment[1][2], 1e18);
            assert_eq!(s.moment[2][1], 1e18);
            assert_eq!(s.moment[0][0], 0.0);
            assert_eq!(s.stf, SourceTimeFunction::Ramp { period: 0.1 });
            assert_eq!(cfg.t_end, t_end);
            assert_eq!(cfg.receivers.len(), 9);
            assert!(cfg.receivers.iter().all(|r| r.location[0] == 0.0));
            assert!(close(cfg.receivers[8].location[1], 8647.0) && close(cfg.receivers[8].location[2], 5764.0));
            assert_eq!(cfg.boundary[0][0], [1.0; 3]);
            let pml = cfg.pml.as_ref().unwrap();
            assert_eq!(pml.width[0][0], 0.0);
            assert!(close(pml.width[1][0], 3.0 * 16333.0 / 25.0));
        }
        let loh1 = preset("loh1", &PresetOverrides::default()).unwrap();
        let layer = &loh1.materials[1];
        assert_eq!((layer.rho, layer.cp, layer.cs), (2600.0, 4000.0, 2000.0));
        assert_eq!(loh1.material_index([500.0, 0.0, 0.0]), Some(1));
        assert_eq!(loh1.material_index([1500.0, 0.0, 0.0]), Some(0));
    }

    #[test]
    fn planewave_is_axis_aligned_p_wave() {
        let cfg = preset("planewave", &PresetOverrides::default()).unwrap();
        match &cfg.initial {
            InitialCondition::PlaneWave(p) => assert_eq!((p.mode, p.direction), (WaveMode::P, [1.0, 0.0, 0.0])),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cfg.boundary[1][0][..2], [1.0, -1.0]);
        assert_eq!(cfg.elements[..2], [40, 2]);
        assert_eq!(cfg.spacing()[..2], [250.0, 250.0]);
    }

    #[test]
    fn overrides_mark_desk_scale() {
        let o = PresetOverrides { elements: Some(10), degree: Some(3), ..Default::default() };
        let cfg = preset("hws3d", &o).unwrap();
        assert_eq!(cfg.elements, [10, 10, 10]);
        assert_eq!(cfg.degree, 3);
        assert!(cfg.desk_scaled);
        let cfg = preset("strip2d", &PresetOverrides { elements: Some(5), theta: Some(0.0), ..Default::default() }).unwrap();
        assert_eq!(cfg.elements[..2], [12, 5]);
        assert_eq!(cfg.pml.unwrap().theta, [0.0; 3]);
        let cfg = preset("strip2d", &PresetOverrides { theta: Some(0.0), ..Default::default() }).unwrap();
        assert!(!cfg.desk_scaled);
        assert!(preset("planewave", &PresetOverrides { theta: Some(0.0), ..Default::default() }).is_err());
    }
}
