//! On-disk artifacts: CSV series and seismograms, snapshots, run metadata,
//! and ingestion of reference seismograms.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{component_names, SnapshotFormat};
use crate::error::{Error, Result};
use crate::solver::{Solver, State};
use crate::sources::Receiver;

/// 17 significant digits in scientific notation (round-trips every `f64`).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// `t,value` series.
pub fn write_series(path: &Path, series: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t,value")?;
    for (t, v) in series {
        writeln!(w, "{},{}", fmt17(*t), fmt17(*v))?;
    }
    w.flush()?;
    Ok(())
}

/// Header of a receiver file: `t` then the recorded component names.
pub fn seismogram_header(dim: usize, components: &[usize]) -> Vec<String> {
    let names = component_names(dim);
    std::iter::once("t".to_string()).chain(components.iter().map(|&c| names[c].to_string())).collect()
}

pub fn write_seismogram(path: &Path, receiver: &Receiver, dim: usize) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", seismogram_header(dim, &receiver.components).join(","))?;
    for (t, values) in receiver.times.iter().zip(&receiver.samples) {
        let row: Vec<String> = std::iter::once(*t).chain(values.iter().copied()).map(fmt17).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a convergence table; `rate` is absent on the first level.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: f64,
    pub error: f64,
    pub rate: Option<f64>,
}

/// Convergence table with header `<level_name>,error,rate`.
pub fn write_convergence(path: &Path, level_name: &str, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{level_name},error,rate")?;
    for r in rows {
        let rate = r.rate.map(fmt17).unwrap_or_default();
        writeln!(w, "{},{},{}", fmt17(r.level), fmt17(r.error), rate)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut w = create(path)?;
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes snapshot `index` of the wave field into `dir`.
///
/// Binary: one file `snapshot_NNNNN_<comp>.bin` per component holding
/// little-endian `f64`, element-major (elements in mesh order, nodes in
/// lexicographic order with x fastest), plus the text header
/// `snapshot_NNNNN.txt`. CSV: `snapshot_NNNNN.csv` with node coordinates.
pub fn write_snapshot(dir: &Path, index: usize, solver: &Solver, state: &State, format: SnapshotFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let dim = solver.dim();
    let names = component_names(dim);
    let np = solver.nodes_per_element();
    let mesh = solver.mesh();
    let stem = format!("snapshot_{index:05}");
    let mut written = Vec::new();
    match format {
        SnapshotFormat::Binary => {
            for (c, name) in names.iter().enumerate() {
                let path = dir.join(format!("{stem}_{name}.bin"));
                let mut w = create(&path)?;
                for e in 0..mesh.num_elements() {
                    for v in &solver.q_block(&state.data, e)[c * np..(c + 1) * np] {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                w.flush()?;
                written.push(path);
            }
            let path = dir.join(format!("{stem}.txt"));
            let mut w = create(&path)?;
            writeln!(w, "time = {}", fmt17(state.time))?;
            writeln!(w, "dimension = {dim}")?;
            writeln!(w, "degree = {}", solver.degree())?;
            writeln!(w, "elements = {}", mesh.counts[..dim].iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))?;
            writeln!(w, "lo = {}", mesh.lo[..dim].iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(", "))?;
            writeln!(w, "hi = {}", mesh.hi[..dim].iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(", "))?;
            writeln!(w, "nodes_per_element = {np}")?;
            writeln!(w, "reference_nodes = {}", solver.operators().nodes().iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(", "))?;
            writeln!(w, "components = {}", names.join(", "))?;
            writeln!(w, "dtype = f64")?;
            writeln!(w, "byte_order = little-endian")?;
            writeln!(w, "layout = element-major; elements x-fastest; nodes lexicographic x-fastest")?;
            w.flush()?;
            written.push(path);
        }
        SnapshotFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = create(&path)?;
            let coords = ["x", "y", "z"];
            let header: Vec<&str> = coords[..dim].iter().chain(names.iter()).copied().collect();
            writeln!(w, "# t = {}", fmt17(state.time))?;
            writeln!(w, "{}", header.join(","))?;
            for e in 0..mesh.num_elements() {
                let q = solver.q_block(&state.data, e);
                for idx in 0..np {
                    let x = solver.node_coords(e, idx);
                    let row: Vec<String> =
                        x[..dim].iter().copied().chain((0..names.len()).map(|c| q[c * np + idx])).map(fmt17).collect();
                    writeln!(w, "{}", row.join(","))?;
                }
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Where a reference seismogram came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    ExternalFile(PathBuf),
    EnlargedDomainRun,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSeismogram {
    pub receiver: String,
    pub components: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl ReferenceSeismogram {
    /// Values linearly interpolated at `times`, which must lie in the recorded span.
    pub fn interpolate(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::Format("reference seismogram is empty".into())),
        };
        let span = (last - first).abs().max(1.0);
        times
            .iter()
            .map(|&t| {
                if t < first - 1e-12 * span || t > last + 1e-12 * span {
                    return Err(Error::Format(format!("time {t} outside the reference span [{first}, {last}]")));
                }
                let k = self.times.partition_point(|&s| s <= t);
                if k == 0 {
                    return Ok(self.values[0].clone());
                }
                if k == self.times.len() {
                    return Ok(self.values[k - 1].clone());
                }
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                let w = (t - t0) / (t1 - t0);
                Ok(self.values[k - 1].iter().zip(&self.values[k]).map(|(a, b)| a + w * (b - a)).collect())
            })
            .collect()
    }
}

/// Reads a receiver CSV whose header must be exactly `expected`
/// (e.g. `t,vx,vy,vz`); times must increase strictly.
pub fn ingest_reference(path: &Path, expected: &[&str]) -> Result<ReferenceSeismogram> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    if header != expected {
        return Err(Error::Format(format!(
            "{}: header '{}' does not match the expected '{}'",
            path.display(),
            header.join(","),
            expected.join(",")
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("{}: row {}: non-numeric field", path.display(), i + 1)))?;
        if fields.len() != expected.len() {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 1,
                fields.len(),
                expected.len()
            )));
        }
        if let Some(&prev) = times.last() {
            if !(fields[0] > prev) {
                return Err(Error::Format(format!("{}: time does not increase at row {}", path.display(), i + 1)));
            }
        }
        times.push(fields[0]);
        values.push(fields[1..].to_vec());
    }
    let receiver = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(ReferenceSeismogram {
        receiver,
        components: expected[1..].iter().map(|s| s.to_string()).collect(),
        times,
        values,
        provenance: Provenance::ExternalFile(path.to_path_buf()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
        assert_eq!(fmt17(-0.1), "-1.0000000000000001e-1");
        for x in [std::f64::consts::PI, 1e-300, -7.25e12] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn ingest_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, "t,vx,vy\n0,1,2\n0,1,2\n").unwrap();
        assert!(matches!(ingest_reference(&p, &["t", "vx", "vy"]), Err(Error::Format(_))));
        fs::write(&p, "t,vx\n0,1\n").unwrap();
        match ingest_reference(&p, &["t", "vx", "vy"]) {
            Err(Error::Format(m)) => assert!(m.contains("t,vx,vy"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interpolation_is_linear() {
        let r = ReferenceSeismogram {
            receiver: "r".into(),
            components: vec!["vx".into()],
            times: vec![0.0, 1.0, 2.0],
            values: vec![vec![0.0], vec![2.0], vec![0.0]],
            provenance: Provenance::EnlargedDomainRun,
        };
        let v = r.interpolate(&[0.0, 0.25, 1.0, 1.5, 2.0]).unwrap();
        assert_eq!(v, vec![vec![0.0], vec![0.5], vec![2.0], vec![1.0], vec![0.0]]);
        assert!(r.interpolate(&[2.5]).is_err());
    }
}
