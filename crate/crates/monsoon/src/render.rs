//! State maps as images.
//!
//! One map per year: each grid cell is a fixed-size square, positive state
//! blue, negative red, normal white, cells absent from the grid gray.
//! Output is PGM (state codes 1/2/3 scaled to gray levels) or SVG (colored
//! squares), chosen by file extension. Both writers are deterministic.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::state::{write_atomic, State, StateField};

/// Edge length of one cell in SVG pixel units.
const CELL_PX: usize = 12;

fn cell_grid(grid: &GridIndex) -> (usize, usize, Vec<Option<usize>>) {
    let spacing = grid.spacing();
    let to_index = |v: f64, origin: f64| ((v - origin) / spacing).round() as usize;
    let lat0 = grid
        .locations()
        .iter()
        .map(|l| l.lat)
        .fold(f64::INFINITY, f64::min);
    let lon0 = grid
        .locations()
        .iter()
        .map(|l| l.lon)
        .fold(f64::INFINITY, f64::min);
    let rows = grid
        .locations()
        .iter()
        .map(|l| to_index(l.lat, lat0))
        .max()
        .unwrap_or(0)
        + 1;
    let cols = grid
        .locations()
        .iter()
        .map(|l| to_index(l.lon, lon0))
        .max()
        .unwrap_or(0)
        + 1;
    let mut cells = vec![None; rows * cols];
    for loc in grid.locations() {
        let r = to_index(loc.lat, lat0);
        let c = to_index(loc.lon, lon0);
        cells[r * cols + c] = Some(loc.id);
    }
    (rows, cols, cells)
}

/// Render one year of a state field. Format by extension: `.pgm` or `.svg`.
pub fn render_year(
    z: &StateField,
    grid: &GridIndex,
    t: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if t >= z.n_years() {
        return Err(Error::InvalidParameter(format!(
            "year index {t} out of range (field has {} years)",
            z.n_years()
        )));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => write_atomic(path, render_pgm(z, grid, t).as_bytes()),
        Some("svg") => write_atomic(path, render_svg(z, grid, t).as_bytes()),
        other => Err(Error::InvalidParameter(format!(
            "unsupported image extension {other:?} (use .pgm or .svg)"
        ))),
    }
}

/// ASCII PGM: absent cells 0, states 1/2/3 scaled to 85/170/255.
pub fn render_pgm(z: &StateField, grid: &GridIndex, t: usize) -> String {
    let (rows, cols, cells) = cell_grid(grid);
    let mut out = format!("P2\n{cols} {rows}\n255\n");
    // Latitude increases upward: top image row is the highest row index.
    for r in (0..rows).rev() {
        let mut first = true;
        for c in 0..cols {
            let level = match cells[r * cols + c] {
                Some(s) => z.get(s, t).code() as u32 * 85,
                None => 0,
            };
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{level}");
            first = false;
        }
        out.push('\n');
    }
    out
}

fn color(state: State) -> &'static str {
    match state {
        State::High => "blue",
        State::Low => "red",
        State::Normal => "white",
    }
}

/// SVG map: one square per lattice cell.
pub fn render_svg(z: &StateField, grid: &GridIndex, t: usize) -> String {
    let (rows, cols, cells) = cell_grid(grid);
    let width = cols * CELL_PX;
    let height = rows * CELL_PX;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    );
    for r in 0..rows {
        for c in 0..cols {
            let fill = match cells[r * cols + c] {
                Some(s) => color(z.get(s, t)),
                None => "gray",
            };
            // Flip vertically so north is up.
            let x = c * CELL_PX;
            let y = (rows - 1 - r) * CELL_PX;
            let _ = writeln!(
                out,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" \
                 fill=\"{fill}\" stroke=\"black\" stroke-width=\"0.5\"/>"
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
