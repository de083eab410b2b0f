//! Run configuration: a sectioned `key = value` text format with unit tags.
//!
//! ```text
//! # comments start with '#'
//! [run]
//! dimension = 2
//! degree = 5
//! t_end = 100 s
//!
//! [mesh]
//! lo = -60 km, 0 km
//! hi = 60 km, 50 km
//! spacing = 5 km            # or: elements = 24, 10
//!
//! [material]                # background material
//! rho = 2.7 g/cm3
//! cp = 6 km/s
//! cs = 3.464 km/s
//!
//! [boundary]
//! y- = free                 # free | absorbing | clamped | γ | γx, γy, γz
//!
//! [pml]
//! width.x = 10 km, 10 km
//! tol = 1e-6                # or: tol = auto, d0 = 16.58 1/s
//! alpha = 0.15 1/s
//! ```
//!
//! Numbers without a unit tag are SI. Parsing reports the first syntax error
//! with its line number; validation reports every violated invariant at once.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diagnostics::{PlaneWaveSpec, WaveMode};
use crate::error::{Error, Result};
use crate::operators::MAX_DEGREE;
use crate::physics::ncomp;
use crate::sources::SourceTimeFunction;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Physical quantity expected by a key; decides which unit tags are accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Dimensionless,
    Length,
    Time,
    Density,
    Speed,
    Moment,
    Rate,
}

impl Quantity {
    fn scale(self, unit: &str) -> Option<f64> {
        let unit = unit.trim();
        let scale = match (self, unit) {
            (_, "") => 1.0,
            (Quantity::Length, "m") => 1.0,
            (Quantity::Length, "km") => 1e3,
            (Quantity::Time, "s") => 1.0,
            (Quantity::Time, "ms") => 1e-3,
            (Quantity::Density, "kg/m3") => 1.0,
            (Quantity::Density, "g/cm3") => 1e3,
            (Quantity::Speed, "m/s") => 1.0,
            (Quantity::Speed, "km/s") => 1e3,
            (Quantity::Moment, "N*m" | "Nm" | "N.m" | "N·m") => 1.0,
            (Quantity::Rate, "1/s" | "Hz") => 1.0,
            _ => return None,
        };
        Some(scale)
    }

    fn si_unit(self) -> &'static str {
        match self {
            Quantity::Dimensionless => "",
            Quantity::Length => " m",
            Quantity::Time => " s",
            Quantity::Density => " kg/m3",
            Quantity::Speed => " m/s",
            Quantity::Moment => " N*m",
            Quantity::Rate => " 1/s",
        }
    }
}

/// Parses `"<number> [unit]"` for the given quantity.
pub fn parse_quantity(text: &str, quantity: Quantity) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace() || (c.is_alphabetic() && c != 'e' && c != 'E'))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number.trim().parse().map_err(|_| format!("expected a number, found '{text}'"))?;
    let scale = quantity.scale(unit).ok_or_else(|| format!("unit '{}' is not a valid {quantity:?} unit", unit.trim()))?;
    Ok(value * scale)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialRegion {
    pub name: String,
    pub rho: f64,
    pub cp: f64,
    pub cs: f64,
    /// Box selecting elements by centroid; `None` covers the whole domain.
    pub region: Option<([f64; 3], [f64; 3])>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Damping {
    /// Derive `d0` per axis from a relative reflection tolerance.
    Tol(f64),
    /// Tolerance `(W (P+1)/Δx)^{-(P+1)}` with `W` the smallest interior extent.
    Auto,
    /// Explicit `d0` per axis (1/s).
    D0([f64; 3]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmlSpec {
    /// Layer width per `[axis][side]` inside the mesh box (m).
    pub width: [[f64; 2]; 3],
    pub damping: Option<Damping>,
    /// `None` selects the dimension-dependent default at build time.
    pub alpha: Option<f64>,
    pub theta: [f64; 3],
    pub exponent: i32,
}

impl PmlSpec {
    pub fn is_enabled(&self) -> bool {
        self.width.iter().flatten().any(|w| *w > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub name: String,
    pub location: [f64; 3],
    pub moment: [[f64; 3]; 3],
    pub stf: SourceTimeFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverSpec {
    pub name: String,
    pub location: [f64; 3],
    /// Record stresses in addition to velocities.
    pub stress: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// `A exp(−ln 2 |x − c|² / r²)` on the listed components (`r` is the half
    /// width at half maximum).
    Gaussian { center: [f64; 3], halfwidth: f64, amplitude: f64, components: Vec<usize> },
    PlaneWave(PlaneWaveSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    Binary,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    /// Sampling interval of the energy and L∞ series (s); 0 samples every step.
    pub interval: f64,
    /// Sampling interval of seismograms (s); 0 samples every step.
    pub seismogram_interval: f64,
    pub energy: bool,
    pub linf: bool,
    /// Snapshot interval (s); 0 disables snapshots.
    pub snapshot_interval: f64,
    pub snapshot_format: SnapshotFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            interval: 0.5,
            seismogram_interval: 0.0,
            energy: true,
            linf: true,
            snapshot_interval: 0.0,
            snapshot_format: SnapshotFormat::Binary,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub dim: usize,
    pub degree: usize,
    /// `None` selects 0.9.
    pub cfl: Option<f64>,
    pub t_end: f64,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub elements: [usize; 3],
    /// Materials in priority order: later regions override earlier ones.
    pub materials: Vec<MaterialRegion>,
    /// γ per `[axis][side][family]`.
    pub boundary: [[[f64; 3]; 2]; 3],
    pub pml: Option<PmlSpec>,
    pub sources: Vec<SourceSpec>,
    pub receivers: Vec<ReceiverSpec>,
    pub initial: InitialCondition,
    pub output: OutputSpec,
    /// Set when a run deviates from the configured full-scale setup.
    pub desk_scaled: bool,
}

pub const DEFAULT_CFL: f64 = 0.9;

impl RunConfig {
    pub fn spacing(&self) -> [f64; 3] {
        let mut h = [1.0; 3];
        for a in 0..self.dim {
            h[a] = (self.hi[a] - self.lo[a]) / self.elements[a] as f64;
        }
        h
    }

    pub fn cfl(&self) -> f64 {
        self.cfl.unwrap_or(DEFAULT_CFL)
    }

    /// Undamped interior box implied by the PML widths.
    pub fn interior(&self) -> ([f64; 3], [f64; 3]) {
        let (mut lo, mut hi) = (self.lo, self.hi);
        if let Some(pml) = &self.pml {
            for a in 0..self.dim {
                lo[a] += pml.width[a][0];
                hi[a] -= pml.width[a][1];
            }
        }
        (lo, hi)
    }

    /// Rebuilds the element counts for a uniform target spacing `h`; fails if an
    /// extent is not a whole number of elements.
    pub fn set_spacing(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0) {
            return Err(Error::InvalidExtent(format!("element spacing {h} must be positive")));
        }
        for a in 0..self.dim {
            let count = (self.hi[a] - self.lo[a]) / h;
            let rounded = count.round();
            if rounded < 1.0 || (count - rounded).abs() > 1e-6 * count.max(1.0) {
                return Err(Error::InvalidExtent(format!(
                    "extent {} m on axis {} is not a multiple of {h} m",
                    self.hi[a] - self.lo[a],
                    AXES[a]
                )));
            }
            self.elements[a] = rounded as usize;
        }
        Ok(())
    }

    /// Sets `n` elements along the shortest axis and the nearest whole number
    /// of elements of the same size along the others.
    pub fn set_element_count(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidExtent("element count must be positive".into()));
        }
        let shortest = (0..self.dim).map(|a| self.hi[a] - self.lo[a]).fold(f64::INFINITY, f64::min);
        let h = shortest / n as f64;
        for a in 0..self.dim {
            self.elements[a] = (((self.hi[a] - self.lo[a]) / h).round() as usize).max(1);
        }
        Ok(())
    }

    /// Every violated invariant, or `Ok` when the configuration is usable.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.dim != 2 && self.dim != 3 {
            errors.push(format!("run.dimension must be 2 or 3, got {}", self.dim));
        }
        let dim = self.dim.clamp(2, 3);
        if !(1..=MAX_DEGREE).contains(&self.degree) {
            errors.push(format!("run.degree must lie in [1, {MAX_DEGREE}], got {}", self.degree));
        }
        if let Some(cfl) = self.cfl {
            if !(cfl > 0.0 && cfl <= 1.0) {
                errors.push(format!("run.cfl must lie in (0, 1], got {cfl}"));
            }
        }
        if !(self.t_end > 0.0) {
            errors.push(format!("run.t_end must be positive, got {}", self.t_end));
        }
        for a in 0..dim {
            if !(self.hi[a] > self.lo[a]) {
                errors.push(format!("mesh extent on axis {} is empty", AXES[a]));
            }
            if self.elements[a] == 0 {
                errors.push(format!("mesh needs at least one element along {}", AXES[a]));
            }
        }
        if self.materials.is_empty() {
            errors.push("at least one [material] section is required".into());
        }
        for m in &self.materials {
            if !(m.rho > 0.0 && m.cp > 0.0 && m.cs > 0.0) {
                errors.push(format!("material '{}' needs positive rho, cp and cs", m.name));
            } else if m.cp * m.cp <= 4.0 / 3.0 * m.cs * m.cs {
                errors.push(format!("material '{}' has cp² ≤ 4/3 cs² (negative bulk modulus)", m.name));
            }
        }
        if !self.materials.is_empty() && self.materials.iter().all(|m| m.region.is_some()) && errors.is_empty() {
            if let Some(c) = self.uncovered_centroid() {
                errors.push(format!("no material region covers the element centred at {c:?}"));
            }
        }
        for (a, sides) in self.boundary.iter().enumerate().take(dim) {
            for (s, gammas) in sides.iter().enumerate() {
                for g in gammas {
                    if !(g.abs() <= 1.0) {
                        errors.push(format!("boundary {}{}: reflection coefficient {g} outside [-1, 1]", AXES[a], sign(s)));
                    }
                }
            }
        }
        if let Some(pml) = &self.pml {
            for a in 0..3 {
                for s in 0..2 {
                    if !(pml.width[a][s] >= 0.0) {
                        errors.push(format!("pml width on {}{} must be non-negative", AXES[a], sign(s)));
                    }
                }
                if a < dim && pml.width[a][0] + pml.width[a][1] >= self.hi[a] - self.lo[a] {
                    errors.push(format!("pml layers along {} leave no interior", AXES[a]));
                }
                if a >= dim && pml.width[a].iter().any(|w| *w > 0.0) {
                    errors.push(format!("pml width along {} in a {dim}D run", AXES[a]));
                }
            }
            if pml.is_enabled() {
                match &pml.damping {
                    None => errors.push("pml is enabled but neither tol nor d0 is given".into()),
                    Some(Damping::Tol(tol)) if !(*tol > 0.0 && *tol < 1.0) => {
                        errors.push(format!("pml tol must lie in (0, 1), got {tol}"))
                    }
                    Some(Damping::D0(d0)) if d0.iter().any(|d| !(*d >= 0.0)) => {
                        errors.push("pml d0 must be non-negative".into())
                    }
                    _ => {}
                }
            }
            if let Some(alpha) = pml.alpha {
                if !(alpha >= 0.0) {
                    errors.push(format!("pml alpha must be non-negative, got {alpha}"));
                }
            }
            if pml.theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
                errors.push("pml theta must lie in [0, 1]".into());
            }
            if pml.exponent < 0 {
                errors.push("pml exponent must be non-negative".into());
            }
        }
        let inside = |x: &[f64; 3]| (0..dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a]);
        for s in &self.sources {
            if !inside(&s.location) {
                errors.push(format!("source '{}' lies outside the domain", s.name));
            }
            match s.stf {
                SourceTimeFunction::Gaussian { sigma, .. } if !(sigma > 0.0) => {
                    errors.push(format!("source '{}' needs sigma > 0", s.name))
                }
                SourceTimeFunction::Ramp { period } if !(period > 0.0) => {
                    errors.push(format!("source '{}' needs period > 0", s.name))
                }
                _ => {}
            }
        }
        for r in &self.receivers {
            if !inside(&r.location) {
                errors.push(format!("receiver '{}' lies outside the domain", r.name));
            }
        }
        match &self.initial {
            InitialCondition::Gaussian { halfwidth, components, .. } => {
                if !(*halfwidth > 0.0) {
                    errors.push("initial halfwidth must be positive".into());
                }
                if components.iter().any(|c| *c >= ncomp(dim)) {
                    errors.push(format!("initial components exceed the {dim}D state"));
                }
            }
            InitialCondition::PlaneWave(spec) => {
                if !(spec.width > 0.0) {
                    errors.push("plane-wave width must be positive".into());
                }
                if spec.direction.iter().all(|d| *d == 0.0) {
                    errors.push("plane-wave direction must be non-zero".into());
                }
                if self.materials.len() != 1 {
                    errors.push("plane-wave initial data needs a single homogeneous material".into());
                }
            }
            InitialCondition::Zero => {}
        }
        let out = &self.output;
        for (key, v) in [("interval", out.interval), ("seismogram_interval", out.seismogram_interval), ("snapshot_interval", out.snapshot_interval)] {
            if !(v >= 0.0) {
                errors.push(format!("output.{key} must be non-negative"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    fn uncovered_centroid(&self) -> Option<[f64; 3]> {
        let h = self.spacing();
        let counts = [self.elements[0], self.elements[1], if self.dim == 3 { self.elements[2] } else { 1 }];
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let mut c = [0.0; 3];
                    for (a, idx) in [i, j, k].into_iter().enumerate().take(self.dim) {
                        c[a] = self.lo[a] + (idx as f64 + 0.5) * h[a];
                    }
                    if self.material_index(c).is_none() {
                        return Some(c);
                    }
                }
            }
        }
        None
    }

    /// Index of the material governing point `x`: the last region containing it.
    pub fn material_index(&self, x: [f64; 3]) -> Option<usize> {
        self.materials.iter().rposition(|m| match &m.region {
            None => true,
            Some((lo, hi)) => (0..self.dim).all(|a| x[a] >= lo[a] && x[a] <= hi[a]),
        })
    }

    /// Serializes to the text format; `parse_config(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let dim = self.dim;
        let list = |v: &[f64], unit: &str| v.iter().map(|x| format!("{}{unit}", fmt_num(*x))).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "dimension = {dim}");
        let _ = writeln!(s, "degree = {}", self.degree);
        if let Some(cfl) = self.cfl {
            let _ = writeln!(s, "cfl = {}", fmt_num(cfl));
        }
        let _ = writeln!(s, "t_end = {} s", fmt_num(self.t_end));
        if self.desk_scaled {
            let _ = writeln!(s, "desk_scaled = true");
        }
        let _ = writeln!(s, "\n[mesh]");
        let _ = writeln!(s, "lo = {}", list(&self.lo[..dim], " m"));
        let _ = writeln!(s, "hi = {}", list(&self.hi[..dim], " m"));
        let counts: Vec<String> = self.elements[..dim].iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "elements = {}", counts.join(", "));
        for m in &self.materials {
            let _ = writeln!(s, "\n[material.{}]", m.name);
            let _ = writeln!(s, "rho = {} kg/m3", fmt_num(m.rho));
            let _ = writeln!(s, "cp = {} m/s", fmt_num(m.cp));
            let _ = writeln!(s, "cs = {} m/s", fmt_num(m.cs));
            if let Some((lo, hi)) = &m.region {
                let _ = writeln!(s, "region_lo = {}", list(&lo[..dim], " m"));
                let _ = writeln!(s, "region_hi = {}", list(&hi[..dim], " m"));
            }
        }
        let _ = writeln!(s, "\n[boundary]");
        for a in 0..dim {
            for side in 0..2 {
                let _ = writeln!(s, "{}{} = {}", AXES[a], sign(side), list(&self.boundary[a][side], ""));
            }
        }
        if let Some(pml) = &self.pml {
            let _ = writeln!(s, "\n[pml]");
            for a in 0..dim {
                let _ = writeln!(s, "width.{} = {}", AXES[a], list(&pml.width[a], " m"));
            }
            match &pml.damping {
                Some(Damping::Tol(tol)) => {
                    let _ = writeln!(s, "tol = {}", fmt_num(*tol));
                }
                Some(Damping::Auto) => {
                    let _ = writeln!(s, "tol = auto");
                }
                Some(Damping::D0(d0)) => {
                    for a in 0..dim {
                        let _ = writeln!(s, "d0.{} = {} 1/s", AXES[a], fmt_num(d0[a]));
                    }
                }
                None => {}
            }
            if let Some(alpha) = pml.alpha {
                let _ = writeln!(s, "alpha = {} 1/s", fmt_num(alpha));
            }
            for a in 0..dim {
                let _ = writeln!(s, "theta.{} = {}", AXES[a], fmt_num(pml.theta[a]));
            }
            let _ = writeln!(s, "exponent = {}", pml.exponent);
        }
        for src in &self.sources {
            let _ = writeln!(s, "\n[source.{}]", src.name);
            let _ = writeln!(s, "location = {}", list(&src.location[..dim], " m"));
            for (i, j, key) in [(0, 0, "mxx"), (1, 1, "myy"), (2, 2, "mzz"), (0, 1, "mxy"), (0, 2, "mxz"), (1, 2, "myz")] {
                if src.moment[i][j] != 0.0 {
                    let _ = writeln!(s, "{key} = {} N*m", fmt_num(src.moment[i][j]));
                }
            }
            match src.stf {
                SourceTimeFunction::Gaussian { sigma, t0 } => {
                    let _ = writeln!(s, "stf = gaussian\nsigma = {} s\nt0 = {} s", fmt_num(sigma), fmt_num(t0));
                }
                SourceTimeFunction::Ramp { period } => {
                    let _ = writeln!(s, "stf = ramp\nperiod = {} s", fmt_num(period));
                }
            }
        }
        for r in &self.receivers {
            let _ = writeln!(s, "\n[receiver.{}]", r.name);
            let _ = writeln!(s, "location = {}", list(&r.location[..dim], " m"));
            if r.stress {
                let _ = writeln!(s, "stress = true");
            }
        }
        match &self.initial {
            InitialCondition::Zero => {}
            InitialCondition::Gaussian { center, halfwidth, amplitude, components } => {
                let names: Vec<&str> = components.iter().map(|&c| component_names(dim)[c]).collect();
                let _ = writeln!(s, "\n[initial]\nkind = gaussian");
                let _ = writeln!(s, "center = {}", list(&center[..dim], " m"));
                let _ = writeln!(s, "halfwidth = {} m", fmt_num(*halfwidth));
                let _ = writeln!(s, "amplitude = {}", fmt_num(*amplitude));
                let _ = writeln!(s, "components = {}", names.join(", "));
            }
            InitialCondition::PlaneWave(p) => {
                let _ = writeln!(s, "\n[initial]\nkind = planewave");
                let _ = writeln!(s, "direction = {}", list(&p.direction, ""));
                let _ = writeln!(s, "mode = {}", if p.mode == WaveMode::P { "p" } else { "s" });
                let _ = writeln!(s, "polarization = {}", list(&p.polarization, ""));
                let _ = writeln!(s, "offset = {} m", fmt_num(p.offset));
                let _ = writeln!(s, "width = {} m", fmt_num(p.width));
                let _ = writeln!(s, "amplitude = {}", fmt_num(p.amplitude));
            }
        }
        let o = &self.output;
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "interval = {} s", fmt_num(o.interval));
        let _ = writeln!(s, "seismogram_interval = {} s", fmt_num(o.seismogram_interval));
        let _ = writeln!(s, "energy = {}", o.energy);
        let _ = writeln!(s, "linf = {}", o.linf);
        let _ = writeln!(s, "snapshot_interval = {} s", fmt_num(o.snapshot_interval));
        let fmt = if o.snapshot_format == SnapshotFormat::Binary { "binary" } else { "csv" };
        let _ = writeln!(s, "snapshot_format = {fmt}");
        s
    }
}

/// Shortest decimal text that parses back to the same `f64`.
fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn sign(side: usize) -> &'static str {
    if side == 0 {
        "-"
    } else {
        "+"
    }
}

/// State component names in layout order.
pub fn component_names(dim: usize) -> &'static [&'static str] {
    if dim == 3 {
        &["vx", "vy", "vz", "sxx", "syy", "szz", "sxy", "sxz", "syz"]
    } else {
        &["vx", "vy", "sxx", "syy", "sxy"]
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Raw `section -> key -> value` table with line numbers.
struct Document {
    sections: Vec<(String, usize, BTreeMap<String, Entry>)>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<(String, usize, BTreeMap<String, Entry>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line, message: "unterminated section header".into() })?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || "._-".contains(c)) {
                    return Err(Error::Parse { line, message: format!("invalid section name '{name}'") });
                }
                if sections.iter().any(|(n, _, _)| n == name) {
                    return Err(Error::Parse { line, message: format!("duplicate section [{name}]") });
                }
                sections.push((name.to_string(), line, BTreeMap::new()));
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, message: format!("expected 'key = value', found '{content}'") })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Parse { line, message: "empty key".into() });
            }
            if value.is_empty() {
                return Err(Error::Parse { line, message: format!("key '{key}' has no value") });
            }
            let (_, _, map) = sections
                .last_mut()
                .ok_or_else(|| Error::Parse { line, message: "key outside of any [section]".into() })?;
            if map.contains_key(key) {
                return Err(Error::Parse { line, message: format!("duplicate key '{key}'") });
            }
            map.insert(key.to_string(), Entry { line, value: value.to_string(), used: false });
        }
        Ok(Self { sections })
    }
}

/// Typed access to one section, tracking consumed keys.
struct Section<'a> {
    name: &'a str,
    line: usize,
    map: &'a mut BTreeMap<String, Entry>,
}

impl Section<'_> {
    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn err(line: usize, key: &str, message: String) -> Error {
        Error::Parse { line, message: format!("{key}: {message}") }
    }

    fn number(&mut self, key: &str, q: Quantity) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => parse_quantity(&v, q).map(Some).map_err(|m| Self::err(line, key, m)),
        }
    }

    fn list(&mut self, key: &str, q: Quantity) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|item| parse_quantity(item, q))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|m| Self::err(line, key, m)),
        }
    }

    fn vector(&mut self, key: &str, q: Quantity, dim: usize) -> Result<Option<[f64; 3]>> {
        let line = self.map.get(key).map(|e| e.line).unwrap_or(self.line);
        match self.list(key, q)? {
            None => Ok(None),
            Some(v) if v.len() == dim || (v.len() == 3 && dim == 2) => {
                let mut out = [0.0; 3];
                out[..v.len()].copy_from_slice(&v);
                Ok(Some(out))
            }
            Some(v) => Err(Self::err(line, key, format!("expected {dim} values, found {}", v.len()))),
        }
    }

    fn integer(&mut self, key: &str) -> Result<Option<i64>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Self::err(line, key, format!("expected an integer, found '{v}'"))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(Self::err(line, key, format!("expected true or false, found '{v}'"))),
            },
        }
    }

    fn word(&mut self, key: &str) -> Option<(usize, String)> {
        self.raw(key).map(|(l, v)| (l, v.to_ascii_lowercase()))
    }

    fn finish(self) -> Result<()> {
        match self.map.iter().find(|(_, e)| !e.used) {
            Some((key, e)) => Err(Error::Parse { line: e.line, message: format!("unknown key '{key}' in [{}]", self.name) }),
            None => Ok(()),
        }
    }
}

fn gamma_value(text: &str) -> std::result::Result<f64, String> {
    match text.trim().to_ascii_lowercase().as_str() {
        "free" => Ok(1.0),
        "absorbing" => Ok(0.0),
        "clamped" => Ok(-1.0),
        t => t.parse().map_err(|_| format!("expected free, absorbing, clamped or a number, found '{t}'")),
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut doc = Document::parse(text)?;
    let mut cfg = RunConfig {
        name: "run".into(),
        dim: 0,
        degree: 0,
        cfl: None,
        t_end: 0.0,
        lo: [0.0; 3],
        hi: [0.0; 3],
        elements: [1; 3],
        materials: Vec::new(),
        boundary: [[[0.0; 3]; 2]; 3],
        pml: None,
        sources: Vec::new(),
        receivers: Vec::new(),
        initial: InitialCondition::Zero,
        output: OutputSpec::default(),
        desk_scaled: false,
    };
    let mut missing = Vec::new();

    // [run] first: the dimension decides how vectors are read.
    let run_index = doc.sections.iter().position(|(n, _, _)| n == "run");
    if let Some(i) = run_index {
        let (name, line, map) = &mut doc.sections[i];
        let mut s = Section { name, line: *line, map };
        if let Some((_, v)) = s.raw("name") {
            cfg.name = v;
        }
        match s.integer("dimension")? {
            Some(d) => cfg.dim = d.max(0) as usize,
            None => missing.push("run.dimension".to_string()),
        }
        match s.integer("degree")? {
            Some(p) => cfg.degree = p.max(0) as usize,
            None => missing.push("run.degree".to_string()),
        }
        cfg.cfl = s.number("cfl", Quantity::Dimensionless)?;
        match s.number("t_end", Quantity::Time)? {
            Some(t) => cfg.t_end = t,
            None => missing.push("run.t_end".to_string()),
        }
        cfg.desk_scaled = s.boolean("desk_scaled")?.unwrap_or(false);
        s.finish()?;
    } else {
        missing.push("[run] section".to_string());
    }
    let dim = if cfg.dim == 3 { 3 } else { 2 };

    for (name, line, map) in doc.sections.iter_mut() {
        let line = *line;
        let full = name.clone();
        let (kind, label) = match full.split_once('.') {
            Some((k, l)) => (k.to_string(), Some(l.to_string())),
            None => (full.clone(), None),
        };
        let mut s = Section { name: &full, line, map };
        match (kind.as_str(), &label) {
            ("run", None) => continue,
            ("mesh", None) => {
                match s.vector("lo", Quantity::Length, dim)? {
                    Some(v) => cfg.lo = v,
                    None => missing.push("mesh.lo".into()),
                }
                match s.vector("hi", Quantity::Length, dim)? {
                    Some(v) => cfg.hi = v,
                    None => missing.push("mesh.hi".into()),
                }
                let elements = s.raw("elements");
                let spacing = s.number("spacing", Quantity::Length)?;
                match (elements, spacing) {
                    (Some((l, _)), Some(_)) => {
                        return Err(Error::Parse { line: l, message: "give either elements or spacing, not both".into() })
                    }
                    (Some((l, v)), None) => {
                        let counts: Vec<usize> = v
                            .split(',')
                            .map(|c| c.trim().parse())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| Error::Parse { line: l, message: format!("elements: expected integers, found '{v}'") })?;
                        if counts.len() != dim {
                            return Err(Error::Parse { line: l, message: format!("elements: expected {dim} counts") });
                        }
                        cfg.elements[..dim].copy_from_slice(&counts);
                    }
                    (None, Some(h)) => {
                        if cfg.hi.iter().zip(&cfg.lo).take(dim).all(|(h, l)| h > l) {
                            let saved = cfg.dim;
                            cfg.dim = dim;
                            let result = cfg.set_spacing(h);
                            cfg.dim = saved;
                            result.map_err(|e| Error::Parse { line, message: e.to_string() })?;
                        }
                    }
                    (None, None) => missing.push("mesh.elements or mesh.spacing".into()),
                }
            }
            ("material", _) => {
                let mname = label.clone().unwrap_or_else(|| "background".into());
                let rho = s.number("rho", Quantity::Density)?;
                let cp = s.number("cp", Quantity::Speed)?;
                let cs = s.number("cs", Quantity::Speed)?;
                for (key, v) in [("rho", rho), ("cp", cp), ("cs", cs)] {
                    if v.is_none() {
                        missing.push(format!("{full}.{key}"));
                    }
                }
                let rlo = s.vector("region_lo", Quantity::Length, dim)?;
                let rhi = s.vector("region_hi", Quantity::Length, dim)?;
                let region = match (rlo, rhi) {
                    (Some(lo), Some(hi)) => Some((lo, hi)),
                    (None, None) => None,
                    _ => return Err(Error::Parse { line, message: format!("[{full}] needs both region_lo and region_hi") }),
                };
                cfg.materials.push(MaterialRegion {
                    name: mname,
                    rho: rho.unwrap_or(0.0),
                    cp: cp.unwrap_or(0.0),
                    cs: cs.unwrap_or(0.0),
                    region,
                });
            }
            ("boundary", None) => {
                for a in 0..3 {
                    for side in 0..2 {
                        let key = format!("{}{}", AXES[a], sign(side));
                        if let Some((l, v)) = s.raw(&key) {
                            let gammas: Vec<f64> = v
                                .split(',')
                                .map(gamma_value)
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|m| Error::Parse { line: l, message: format!("{key}: {m}") })?;
                            match gammas.len() {
                                1 => cfg.boundary[a][side] = [gammas[0]; 3],
                                n if n == dim || n == 3 => cfg.boundary[a][side][..n].copy_from_slice(&gammas),
                                _ => {
                                    return Err(Error::Parse {
                                        line: l,
                                        message: format!("{key}: expected 1 or {dim} reflection coefficients"),
                                    })
                                }
                            }
                        }
                    }
                }
            }
            ("pml", None) => {
                let mut pml = PmlSpec { width: [[0.0; 2]; 3], damping: None, alpha: None, theta: [1.0; 3], exponent: 3 };
                let h = cfg.spacing_hint(dim);
                for a in 0..3 {
                    let wkey = format!("width.{}", AXES[a]);
                    let ekey = format!("elements.{}", AXES[a]);
                    let wl = s.map.get(&wkey).map(|e| e.line);
                    if let Some(w) = s.list(&wkey, Quantity::Length)? {
                        pml.width[a] = two_sided(&w).ok_or_else(|| Section::err(wl.unwrap_or(line), &wkey, "expected 1 or 2 widths".into()))?;
                    }
                    let el = s.map.get(&ekey).map(|e| e.line);
                    if let Some(n) = s.list(&ekey, Quantity::Dimensionless)? {
                        let l = el.unwrap_or(line);
                        if pml.width[a] != [0.0; 2] {
                            return Err(Section::err(l, &ekey, format!("conflicts with {wkey}")));
                        }
                        let n = two_sided(&n).ok_or_else(|| Section::err(l, &ekey, "expected 1 or 2 counts".into()))?;
                        let h = h.ok_or_else(|| Section::err(l, &ekey, "needs [mesh] before [pml]".into()))?;
                        pml.width[a] = [n[0] * h[a], n[1] * h[a]];
                    }
                }
                let tol = s.raw("tol");
                let mut d0 = s.number("d0", Quantity::Rate)?.map(|d| [d; 3]);
                for a in 0..3 {
                    if let Some(v) = s.number(&format!("d0.{}", AXES[a]), Quantity::Rate)? {
                        d0.get_or_insert([0.0; 3])[a] = v;
                    }
                }
                pml.damping = match (tol, d0) {
                    (Some((l, _)), Some(_)) => {
                        return Err(Error::Parse { line: l, message: "give either tol or d0, not both".into() })
                    }
                    (Some((_, v)), None) if v.eq_ignore_ascii_case("auto") => Some(Damping::Auto),
                    (Some((l, v)), None) => Some(Damping::Tol(
                        parse_quantity(&v, Quantity::Dimensionless).map_err(|m| Section::err(l, "tol", m))?,
                    )),
                    (None, Some(d)) => Some(Damping::D0(d)),
                    (None, None) => None,
                };
                pml.alpha = s.number("alpha", Quantity::Rate)?;
                if let Some(t) = s.number("theta", Quantity::Dimensionless)? {
                    pml.theta = [t; 3];
                }
                for a in 0..3 {
                    if let Some(t) = s.number(&format!("theta.{}", AXES[a]), Quantity::Dimensionless)? {
                        pml.theta[a] = t;
                    }
                }
                if let Some(e) = s.integer("exponent")? {
                    pml.exponent = e as i32;
                }
                cfg.pml = Some(pml);
            }
            ("source", Some(sname)) => {
                let location = s.vector("location", Quantity::Length, dim)?;
                if location.is_none() {
                    missing.push(format!("{full}.location"));
                }
                let mut moment = [[0.0; 3]; 3];
                for (i, j, key) in [(0, 0, "mxx"), (1, 1, "myy"), (2, 2, "mzz"), (0, 1, "mxy"), (0, 2, "mxz"), (1, 2, "myz")] {
                    if let Some(m) = s.number(key, Quantity::Moment)? {
                        moment[i][j] = m;
                        moment[j][i] = m;
                    }
                }
                let stf = match s.word("stf") {
                    Some((_, w)) if w == "gaussian" => {
                        let sigma = s.number("sigma", Quantity::Time)?;
                        let t0 = s.number("t0", Quantity::Time)?;
                        if sigma.is_none() || t0.is_none() {
                            missing.push(format!("{full}.sigma and {full}.t0"));
                        }
                        SourceTimeFunction::Gaussian { sigma: sigma.unwrap_or(0.0), t0: t0.unwrap_or(0.0) }
                    }
                    Some((_, w)) if w == "ramp" => {
                        let period = s.number("period", Quantity::Time)?;
                        if period.is_none() {
                            missing.push(format!("{full}.period"));
                        }
                        SourceTimeFunction::Ramp { period: period.unwrap_or(0.0) }
                    }
                    Some((l, w)) => return Err(Error::Parse { line: l, message: format!("stf: unknown source time function '{w}'") }),
                    None => {
                        missing.push(format!("{full}.stf"));
                        SourceTimeFunction::Ramp { period: 1.0 }
                    }
                };
                cfg.sources.push(SourceSpec { name: sname.clone(), location: location.unwrap_or([0.0; 3]), moment, stf });
            }
            ("receiver", Some(rname)) => {
                let location = s.vector("location", Quantity::Length, dim)?;
                if location.is_none() {
                    missing.push(format!("{full}.location"));
                }
                let stress = s.boolean("stress")?.unwrap_or(false);
                cfg.receivers.push(ReceiverSpec { name: rname.clone(), location: location.unwrap_or([0.0; 3]), stress });
            }
            ("initial", None) => {
                cfg.initial = match s.word("kind") {
                    None => {
                        missing.push("initial.kind".into());
                        InitialCondition::Zero
                    }
                    Some((_, k)) if k == "zero" => InitialCondition::Zero,
                    Some((_, k)) if k == "gaussian" => {
                        let center = s.vector("center", Quantity::Length, dim)?.unwrap_or([0.0; 3]);
                        let halfwidth = s.number("halfwidth", Quantity::Length)?;
                        if halfwidth.is_none() {
                            missing.push("initial.halfwidth".into());
                        }
                        let amplitude = s.number("amplitude", Quantity::Dimensionless)?.unwrap_or(1.0);
                        let names = component_names(dim);
                        let components = match s.raw("components") {
                            None => (0..dim).collect(),
                            Some((l, v)) => v
                                .split(',')
                                .map(|c| {
                                    let c = c.trim();
                                    names.iter().position(|n| *n == c).ok_or_else(|| Error::Parse {
                                        line: l,
                                        message: format!("components: unknown component '{c}' (expected one of {})", names.join(", ")),
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?,
                        };
                        InitialCondition::Gaussian { center, halfwidth: halfwidth.unwrap_or(0.0), amplitude, components }
                    }
                    Some((_, k)) if k == "planewave" => {
                        let mode = match s.word("mode") {
                            None => WaveMode::P,
                            Some((_, m)) if m == "p" => WaveMode::P,
                            Some((_, m)) if m == "s" => WaveMode::S,
                            Some((l, m)) => return Err(Error::Parse { line: l, message: format!("mode: expected p or s, found '{m}'") }),
                        };
                        let direction = s.vector("direction", Quantity::Dimensionless, 3)?.unwrap_or([1.0, 0.0, 0.0]);
                        let polarization = s.vector("polarization", Quantity::Dimensionless, 3)?.unwrap_or([0.0, 1.0, 0.0]);
                        let offset = s.number("offset", Quantity::Length)?.unwrap_or(0.0);
                        let width = s.number("width", Quantity::Length)?;
                        if width.is_none() {
                            missing.push("initial.width".into());
                        }
                        let amplitude = s.number("amplitude", Quantity::Dimensionless)?.unwrap_or(1.0);
                        InitialCondition::PlaneWave(PlaneWaveSpec {
                            direction,
                            mode,
                            polarization,
                            offset,
                            width: width.unwrap_or(0.0),
                            amplitude,
                        })
                    }
                    Some((l, k)) => return Err(Error::Parse { line: l, message: format!("kind: unknown initial condition '{k}'") }),
                };
            }
            ("output", None) => {
                let o = &mut cfg.output;
                if let Some(v) = s.number("interval", Quantity::Time)? {
                    o.interval = v;
                }
                if let Some(v) = s.number("seismogram_interval", Quantity::Time)? {
                    o.seismogram_interval = v;
                }
                if let Some(v) = s.boolean("energy")? {
                    o.energy = v;
                }
                if let Some(v) = s.boolean("linf")? {
                    o.linf = v;
                }
                if let Some(v) = s.number("snapshot_interval", Quantity::Time)? {
                    o.snapshot_interval = v;
                }
                match s.word("snapshot_format") {
                    None => {}
                    Some((_, f)) if f == "binary" => o.snapshot_format = SnapshotFormat::Binary,
                    Some((_, f)) if f == "csv" => o.snapshot_format = SnapshotFormat::Csv,
                    Some((l, f)) => {
                        return Err(Error::Parse { line: l, message: format!("snapshot_format: expected binary or csv, found '{f}'") })
                    }
                }
            }
            _ => return Err(Error::Parse { line, message: format!("unknown section [{full}]") }),
        }
        s.finish()?;
    }
    if !missing.is_empty() {
        return Err(Error::Validation(missing.into_iter().map(|m| format!("missing {m}")).collect()));
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn spacing_hint(&self, dim: usize) -> Option<[f64; 3]> {
        if (0..dim).all(|a| self.hi[a] > self.lo[a] && self.elements[a] > 0) {
            let mut h = [1.0; 3];
            for a in 0..dim {
                h[a] = (self.hi[a] - self.lo[a]) / self.elements[a] as f64;
            }
            Some(h)
        } else {
            None
        }
    }
}

fn two_sided(v: &[f64]) -> Option<[f64; 2]> {
    match v {
        [w] => Some([*w, *w]),
        [a, b] => Some([*a, *b]),
        _ => None,
    }
}

/// Text form of a value with its SI unit, for metadata.
pub fn with_unit(value: f64, q: Quantity) -> String {
    format!("{}{}", fmt_num(value), q.si_unit())
}
