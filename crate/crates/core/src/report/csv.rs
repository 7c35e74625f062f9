//! Plain CSV writers with 17 significant digits and 1-based node indices.

use std::fmt::Write as _;
use std::path::Path;

use crate::grid::{Field, Grid};
use crate::linalg::Matrix;

use super::CliError;

fn coords(out: &mut String, grid: &Grid, i: usize) {
    for x in grid.node(i) {
        let _ = write!(out, ",{x:.16e}");
    }
}

fn axis_names(grid: &Grid, suffix: &str) -> String {
    ["x", "y"][..grid.dimension()]
        .iter()
        .map(|a| format!(",{a}_{suffix}"))
        .collect()
}

pub fn heatmap_csv(matrix: &Matrix, grid: &Grid) -> Result<String, CliError> {
    if matrix.rows() != grid.len() || matrix.cols() != grid.len() {
        return Err(CliError::Compute(format!(
            "matrix is {}x{} but the grid has {} nodes",
            matrix.rows(),
            matrix.cols(),
            grid.len()
        )));
    }
    let mut out = format!("i,j{}{},value\n", axis_names(grid, "i"), axis_names(grid, "j"));
    for i in 0..matrix.rows() {
        for (j, v) in matrix.row(i).iter().enumerate() {
            let _ = write!(out, "{},{}", i + 1, j + 1);
            coords(&mut out, grid, i);
            coords(&mut out, grid, j);
            let _ = writeln!(out, ",{v:.16e}");
        }
    }
    Ok(out)
}

pub fn field_csv(field: &Field) -> String {
    let grid = field.grid();
    let mut out = format!("i{},value\n", axis_names(grid, "i"));
    for (i, v) in field.values().iter().enumerate() {
        let _ = write!(out, "{}", i + 1);
        coords(&mut out, grid, i);
        let _ = writeln!(out, ",{v:.16e}");
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn emit_heatmap_csv(matrix: &Matrix, grid: &Grid, path: &Path) -> Result<(), CliError> {
    write_file(path, &heatmap_csv(matrix, grid)?)
}

pub fn emit_field_csv(field: &Field, path: &Path) -> Result<(), CliError> {
    write_file(path, &field_csv(field))
}
