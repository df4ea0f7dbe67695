//! Iteration logs and nodal fields.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use seqhom_core::fem::MeshP1;
use seqhom_core::homotopy::IterationRecord;

pub const ITERATION_HEADER: &str =
    "k,lambda,kappa,active_count,krylov_iters_step,krylov_iters_simplified,theta,accepted,step_norm,wall_ms";

/// One CSV row per trial. `theta` and `step_norm` stay empty when the
/// Newton solve of the trial failed.
pub fn iterations_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from(ITERATION_HEADER);
    s.push('\n');
    for r in records {
        let theta = r.theta.map(|t| format!("{t:e}")).unwrap_or_default();
        let step = if r.step_norm.is_finite() {
            format!("{:e}", r.step_norm)
        } else {
            String::new()
        };
        writeln!(
            s,
            "{},{:e},{:e},{},{},{},{},{},{},{:e}",
            r.k,
            r.lambda,
            r.kappa,
            r.active_count,
            r.krylov_iters_step,
            r.krylov_iters_simplified,
            theta,
            r.accepted,
            step,
            r.wall_ms
        )
        .unwrap();
    }
    s
}

/// Legacy ASCII VTK on the structured point lattice of the mesh. Node
/// numbering is already x-fastest, which is the order VTK expects.
pub fn vtk_structured_points(mesh: &MeshP1, name: &str, values: &[f64]) -> String {
    let side = mesh.n() + 1;
    let h = 1.0 / mesh.n() as f64;
    let (nz, hz) = if mesh.dim() == 3 { (side, h) } else { (1, 1.0) };
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    writeln!(s, "seqhom {name}").unwrap();
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    writeln!(s, "DIMENSIONS {side} {side} {nz}").unwrap();
    s.push_str("ORIGIN 0 0 0\n");
    writeln!(s, "SPACING {h} {h} {hz}").unwrap();
    writeln!(s, "POINT_DATA {}", values.len()).unwrap();
    writeln!(s, "SCALARS {name} double 1").unwrap();
    s.push_str("LOOKUP_TABLE default\n");
    for v in values {
        writeln!(s, "{v:e}").unwrap();
    }
    s
}

/// Whitespace-separated `x y [z] value` lines.
pub fn nodal_text(mesh: &MeshP1, values: &[f64]) -> String {
    let mut s = String::new();
    for (v, val) in values.iter().enumerate() {
        for c in mesh.coord(v) {
            write!(s, "{c} ").unwrap();
        }
        writeln!(s, "{val:e}").unwrap();
    }
    s
}

pub fn write_field(dir: &Path, mesh: &MeshP1, name: &str, values: &[f64]) -> io::Result<()> {
    fs::write(dir.join(format!("solution_{name}.vtk")), vtk_structured_points(mesh, name, values))?;
    fs::write(dir.join(format!("solution_{name}.txt")), nodal_text(mesh, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqhom_core::fem::build_mesh;

    fn record(theta: Option<f64>, step_norm: f64) -> IterationRecord {
        IterationRecord {
            k: 3,
            lambda: 0.25,
            kappa: 1e-4,
            active_count: 7,
            krylov_iters_step: 12,
            krylov_iters_simplified: 4,
            theta,
            accepted: theta.is_some(),
            step_norm,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn failed_trials_leave_fields_empty() {
        let csv = iterations_csv(&[record(Some(0.5), 2.0), record(None, f64::NAN)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], ITERATION_HEADER);
        assert_eq!(lines[1], "3,2.5e-1,1e-4,7,12,4,5e-1,true,2e0,0e0");
        assert_eq!(lines[2], "3,2.5e-1,1e-4,7,12,4,,false,,0e0");
    }

    #[test]
    fn vtk_point_count_matches_lattice() {
        let mesh = build_mesh(3, 2).unwrap();
        let vals = vec![1.0; mesh.num_nodes()];
        let s = vtk_structured_points(&mesh, "u", &vals);
        assert!(s.contains("DIMENSIONS 3 3 3\n"));
        assert!(s.contains("POINT_DATA 27\n"));
        assert_eq!(s.lines().count(), 10 + 27);
        let t = nodal_text(&build_mesh(2, 2).unwrap(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(t.lines().nth(1), Some("0.5 0 2e0"));
    }
}
