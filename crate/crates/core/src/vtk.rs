//! Legacy ASCII VTK output of a field state on the mesh vertices.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::slab_solver::{FieldState, Spaces};

/// Renders `state` as an unstructured grid of linear triangles. Only vertex
/// coefficients are written; higher-order DOFs are dropped.
pub fn render(spaces: &Spaces, state: &FieldState) -> String {
    let mesh = spaces.disp.mesh();
    let nv = mesh.vertex_count();
    let nu = spaces.disp.dof_count();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "fields at t = {}", state.t);
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {nv} double");
    for [x, y] in mesh.vertices() {
        let _ = writeln!(out, "{x} {y} 0");
    }
    let nt = mesh.triangle_count();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    for (name, field) in [("u", &state.u), ("v", &state.v), ("psi", &state.psi)] {
        let _ = writeln!(out, "VECTORS {name} double");
        for i in 0..nv {
            let _ = writeln!(out, "{} {} 0", field[i], field[nu + i]);
        }
    }
    out.push_str("SCALARS p double 1\nLOOKUP_TABLE default\n");
    for value in &state.p[..nv] {
        let _ = writeln!(out, "{value}");
    }
    out
}

pub fn write_vtk(path: &Path, spaces: &Spaces, state: &FieldState) -> crate::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(render(spaces, state).as_bytes())?;
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;
    use crate::slab_solver::FieldState;
    use std::sync::Arc;

    #[test]
    fn layout_of_small_grid() {
        let spaces = Spaces::taylor_hood(Arc::new(structured_unit_square(2).unwrap()), 1).unwrap();
        let mut state = FieldState::zeros(spaces.layout(), 0.5);
        let nu = spaces.disp.dof_count();
        state.u[4] = 1.5;
        state.u[nu + 4] = -2.0;
        let text = render(&spaces, &state);
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 8 32"));
        assert!(text.contains("POINT_DATA 9"));
        assert!(text.contains("1.5 -2 0"));
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 8);
    }

    #[test]
    fn writes_file() {
        let spaces = Spaces::equal_order(Arc::new(structured_unit_square(1).unwrap()), 1).unwrap();
        let state = FieldState::zeros(spaces.layout(), 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        write_vtk(&path, &spaces, &state).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), render(&spaces, &state));
        assert!(matches!(
            write_vtk(&dir.path().join("missing/f.vtk"), &spaces, &state),
            Err(crate::Error::Io(_))
        ));
    }
}
