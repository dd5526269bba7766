//! Legacy-VTK and plain-text dumps of discrete fields.

use std::io::{BufRead, Write};

use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::estimator::IndicatorTable;
use crate::mesh::Mesh;
use crate::state::DiscreteState;

/// ASCII unstructured grid with the P1 parts of `u`, `p`, `C` as point data
/// and, if given, the element indicators as cell data.
pub fn write_vtk<W: Write>(
    mesh: &Mesh,
    dofmap: &DofMap,
    state: &DiscreteState,
    table: Option<&IndicatorTable>,
    title: &str,
    mut out: W,
) -> Result<()> {
    state.check(dofmap)?;
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {nv}")?;
    writeln!(out, "VECTORS u double")?;
    for v in 0..nv {
        let ux = state.velocity[dofmap.velocity_vertex(0, v)];
        let uy = state.velocity[dofmap.velocity_vertex(1, v)];
        writeln!(out, "{ux:.16e} {uy:.16e} 0")?;
    }
    for (name, values) in [("p", &state.pressure), ("C", &state.concentration)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for x in values.iter() {
            writeln!(out, "{x:.16e}")?;
        }
    }
    if let Some(table) = table {
        if table.len() != nt {
            return Err(Error::Dimension(format!("{} indicator rows for {nt} triangles", table.len())));
        }
        writeln!(out, "CELL_DATA {nt}")?;
        let columns = [
            ("eta_L1", &table.eta_l1),
            ("eta_L2", &table.eta_l2),
            ("eta_D1", &table.eta_d1),
            ("eta_D2", &table.eta_d2),
            ("eta_D3", &table.eta_d3),
            ("eta_D_elem", &table.eta_d_elem),
        ];
        for (name, values) in columns {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for x in values.iter() {
                writeln!(out, "{x:.16e}")?;
            }
        }
    }
    Ok(())
}

/// Full coefficient vectors, bubbles included, in a round-trippable form:
/// a `name count` line followed by one value per line for each block.
pub fn write_state<W: Write>(state: &DiscreteState, mut out: W) -> std::io::Result<()> {
    for (name, values) in [
        ("velocity", &state.velocity),
        ("pressure", &state.pressure),
        ("concentration", &state.concentration),
    ] {
        writeln!(out, "{name} {}", values.len())?;
        for x in values.iter() {
            writeln!(out, "{x:.16e}")?;
        }
    }
    Ok(())
}

/// Inverse of [`write_state`].
pub fn read_state<R: BufRead>(dofmap: &DofMap, input: R) -> Result<DiscreteState> {
    let mut lines = input.lines();
    let mut block = |expected: &str| -> Result<Vec<f64>> {
        let header = lines.next().ok_or_else(|| Error::Parse(format!("missing '{expected}' block")))??;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(expected) {
            return Err(Error::Parse(format!("expected '{expected}' header, got '{header}'")));
        }
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad count in '{header}'")))?;
        (0..n)
            .map(|_| {
                let line = lines.next().ok_or_else(|| Error::Parse(format!("truncated '{expected}' block")))??;
                line.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{line}': {e}")))
            })
            .collect()
    };
    let velocity = block("velocity")?;
    let pressure = block("pressure")?;
    let concentration = block("concentration")?;
    DiscreteState::from_parts(dofmap, velocity, pressure, concentration)
}
