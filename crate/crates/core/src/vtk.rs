//! Legacy ASCII VTK output of element fields.

use std::io::Write;

use crate::error::{check_len, Result};
use crate::mesh::Mesh;

/// Unstructured grid of quads (cell type 9) with one cell scalar `density`.
pub fn write_density_vtk<W: Write>(mut out: W, mesh: &Mesh, density: &[f64]) -> Result<()> {
    check_len("vtk density", mesh.n_elements(), density.len())?;
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "density")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} float", mesh.n_nodes())?;
    for [x, y] in mesh.node_coords() {
        writeln!(out, "{x} {y} 0")?;
    }
    let ne = mesh.n_elements();
    writeln!(out, "CELLS {ne} {}", ne * 5)?;
    for c in mesh.connectivity() {
        writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "9")?;
    }
    writeln!(out, "CELL_DATA {ne}")?;
    writeln!(out, "SCALARS density float 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for d in density {
        writeln!(out, "{d}")?;
    }
    Ok(())
}
