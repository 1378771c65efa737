//! CSV export of the value grid and the junction table.
//!
//! Numbers are written with `{:e}` (shortest round-trip scientific notation),
//! which is locale independent and lossless.

use std::io::Write;

use crate::error::Result;
use crate::junction::JunctionHamiltonian;
use crate::pde::ValueGrid;

/// `edge,time_index,space_index,u,du_dx`, edges one-based.
pub fn write_value_csv<W: Write>(vg: &ValueGrid, out: &mut W) -> Result<()> {
    writeln!(out, "edge,time_index,space_index,u,du_dx")?;
    for i in 0..vg.edges() {
        for m in 0..=vg.n_time() {
            for (j, u) in vg.edge_values(i, m).iter().enumerate() {
                writeln!(out, "{},{},{},{:e},{:e}", i + 1, m, j, u, vg.gradient(i, m, j))?;
            }
        }
    }
    Ok(())
}

/// `time_index,u0,p_1..p_I,alpha_1..alpha_I,h0_residual`.
pub fn write_junction_csv<W: Write>(vg: &ValueGrid, h0: &JunctionHamiltonian, out: &mut W) -> Result<()> {
    let edges = vg.edges();
    let mut header = String::from("time_index,u0");
    for i in 1..=edges {
        header.push_str(&format!(",p_{i}"));
    }
    for i in 1..=edges {
        header.push_str(&format!(",alpha_{i}"));
    }
    header.push_str(",h0_residual");
    writeln!(out, "{header}")?;
    for m in 0..=vg.n_time() {
        let p = vg.junction_gradients(m);
        let alpha = h0.solve(p)?.argmin;
        let mut row = format!("{},{:e}", m, vg.junction_value(m));
        for v in p.iter().chain(alpha.iter()) {
            row.push_str(&format!(",{v:e}"));
        }
        row.push_str(&format!(",{:e}", vg.junction_residual(m)));
        writeln!(out, "{row}")?;
    }
    Ok(())
}
