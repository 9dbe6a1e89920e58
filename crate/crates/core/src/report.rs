//! Artifact persistence: binary field dumps with JSON sidecars, the sweep
//! CSV with a self-describing schema header, JSON summaries, and atomic
//! writes (temp + rename).

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::asymptotics::SweepRow;
use crate::error::{Error, Result};
use crate::grid::{Field, GridMeta};

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| Error::Io(std::io::Error::other("path has no parent directory")))?;
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("artifact"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Binary field dump: row-major little-endian f64, with a JSON sidecar
/// holding the grid metadata.  Bit-exact on reload.
pub fn write_field(dir: &Path, name: &str, field: &Field, meta: &GridMeta) -> Result<PathBuf> {
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let bin = dir.join(format!("{name}.f64"));
    write_atomic(&bin, &bytes)?;
    write_json(&dir.join(format!("{name}.json")), meta)?;
    Ok(bin)
}

pub fn read_field(dir: &Path, name: &str) -> Result<Field> {
    let meta: GridMeta = serde_json::from_slice(&std::fs::read(dir.join(format!("{name}.json")))?)?;
    let grid = meta.rebuild()?;
    let bytes = std::fs::read(dir.join(format!("{name}.f64")))?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Shape(format!(
            "field dump {name}.f64 has {} bytes for a {} node grid",
            bytes.len(),
            grid.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::from_values(grid, values)
}

/// Column schema of the sweep CSV: (name, unit, description).
pub const SWEEP_COLUMNS: &[(&str, &str, &str)] = &[
    ("lambda", "1", "linear coefficient of the problem"),
    ("status", "-", "ok or an error tag; failed rows keep the sweep going"),
    ("converged_positive", "bool", "positive solve reached the residual tolerance"),
    ("iterations_positive", "1", "descent plus polish iterations of the positive solve"),
    ("residual_positive", "1", "weighted L2 norm of the positive-solution residual"),
    ("energy_positive", "1", "J_lambda of the positive solution (dimensionless)"),
    ("dirichlet", "1", "gradient part of the energy"),
    ("mass", "1", "linear part of the energy"),
    ("power", "1", "nonlinear part of the energy"),
    ("sup_norm_positive", "1", "max of the positive solution"),
    ("peak_rho", "domain", "|P_lambda|, radius of the peak"),
    ("peak_phi", "rad", "polar angle of the peak"),
    ("peak_gap", "domain", "|P_lambda| - R1, distance of the peak to the inner radius"),
    ("boundary_distance", "domain", "d(P_lambda, boundary)"),
    ("sqrt_lambda_d", "1", "sqrt(lambda) * boundary_distance"),
    ("peak_on_axis", "bool", "peak sits on the symmetry axis"),
    ("energy_ratio", "1", "lambda-normalized energy over sqrt(2 R1) I(z)"),
    ("sup_outside_ball", "1", "sup |v| outside the fixed ball around the limit peak"),
    ("mu1", "1", "smallest linearized eigenvalue (upstairs-equivalent weighting)"),
    ("mu1_bound", "1", "(1-p) lambda, the test-function bound for mu1"),
    ("morse_index_positive", "1", "negative eigenvalues at the positive solution"),
    ("phi_negative_count", "1", "#{k <= k_max : Q(Phi^k) < 0}"),
    ("q_phi_1", "1", "quadratic form on the first spherical-harmonic test function"),
    ("converged_nodal", "bool", "nodal solve reached the residual tolerance"),
    ("iterations_nodal", "1", "iterations of the nodal solve"),
    ("residual_nodal", "1", "weighted L2 norm of the nodal residual"),
    ("energy_nodal", "1", "J_lambda of the nodal solution"),
    ("nodal_regions", "1", "connected sign regions of the nodal solution"),
    ("nehari_defect_positive_part", "1", "<J'(v), v+> at the nodal solution"),
    ("nehari_defect_negative_part", "1", "<J'(v), -v-> at the nodal solution"),
    ("morse_index_nodal", "1", "negative eigenvalues at the nodal solution"),
    ("peak_positive_radius", "domain", "radius of the positive peak of the nodal solution"),
    ("peak_negative_radius", "domain", "radius of the negative peak of the nodal solution"),
    ("peak_separation", "domain", "distance between the two nodal peaks"),
    ("mu1_nodal", "1", "smallest linearized eigenvalue at the nodal solution"),
    ("mu2_nodal", "1", "second linearized eigenvalue at the nodal solution"),
];

/// Renders the sweep CSV: schema header comments, column row, one data row
/// per λ.  Byte-deterministic for identical inputs.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("# sweep report; one row per lambda\n");
    for (name, unit, desc) in SWEEP_COLUMNS {
        out.push_str(&format!("# {name} [{unit}]: {desc}\n"));
    }
    let names: Vec<&str> = SWEEP_COLUMNS.iter().map(|c| c.0).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in rows {
        let fields: Vec<String> = vec![
            r.lambda.to_string(),
            r.status.clone(),
            r.converged_positive.to_string(),
            r.iterations_positive.to_string(),
            r.residual_positive.to_string(),
            r.energy_positive.to_string(),
            r.dirichlet.to_string(),
            r.mass.to_string(),
            r.power.to_string(),
            r.sup_norm_positive.to_string(),
            r.peak.radius.to_string(),
            r.peak.polar_angle.to_string(),
            r.peak_gap.to_string(),
            r.peak.boundary_distance.to_string(),
            r.peak.scaled_distance.to_string(),
            r.peak.on_axis.to_string(),
            r.energy_ratio.to_string(),
            r.sup_outside_ball.to_string(),
            r.mu1.to_string(),
            r.mu1_bound.to_string(),
            r.morse_index_positive.to_string(),
            r.phi_negative_count.to_string(),
            r.q_phi_1.to_string(),
            r.converged_nodal.to_string(),
            r.iterations_nodal.to_string(),
            r.residual_nodal.to_string(),
            r.energy_nodal.to_string(),
            r.nodal_regions.to_string(),
            r.nehari_defect_positive_part.to_string(),
            r.nehari_defect_negative_part.to_string(),
            r.morse_index_nodal.to_string(),
            r.peak_positive_radius.to_string(),
            r.peak_negative_radius.to_string(),
            r.peak_separation.to_string(),
            r.mu1_nodal.to_string(),
            r.mu2_nodal.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Axis profile v(ρ, φ=0) and v(ρ, φ=π) as plain columns for plotting.
pub fn axis_profile_text(v: &Field) -> String {
    let g = v.grid();
    let na = g.n_angular();
    let mut out = String::from("# rho v_at_phi_0 v_at_phi_pi\n");
    for (i, &rho) in g.radial.iter().enumerate() {
        out.push_str(&format!("{} {} {}\n", rho, v.at(i, 0), v.at(i, na - 1)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::params::ReducedDomain;

    #[test]
    fn field_dump_roundtrip_is_bit_exact() {
        let dom = ReducedDomain {
            r1: 0.5,
            r2: 2.0,
            n_dim: 3,
        };
        let grid = Grid::reduced(&dom, 24, 16).unwrap();
        let f = Field::from_fn(grid.clone(), |x, y| (x * 17.3).sin() * (y + 0.1).ln());
        let dir = tempfile::tempdir().unwrap();
        let meta = GridMeta::reduced(&grid);
        write_field(dir.path(), "field", &f, &meta).unwrap();
        let g = read_field(dir.path(), "field").unwrap();
        assert_eq!(f.values(), g.values());
        assert_eq!(*f.grid().as_ref(), *g.grid().as_ref());
    }

    #[test]
    fn csv_header_matches_columns() {
        let csv = sweep_csv(&[]);
        let header_line = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header_line.split(',').count(), SWEEP_COLUMNS.len());
        // every column is documented
        for (name, _, _) in SWEEP_COLUMNS {
            assert!(csv.contains(&format!("# {name} [")), "missing doc for {name}");
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        // no temp leftovers
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
