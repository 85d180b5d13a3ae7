//! Periodic cell grids and cell-averaged grid functions.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SblError};

/// Uniform periodic grid in one or two space dimensions.
///
/// Cell `j` along an axis has its center at `(j + 1/2) * spacing`. Two-dimensional
/// fields are stored row-major with axis 0 varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    cells: [usize; 2],
    length: [f64; 2],
}

/// Serialized form of a [`Grid`], matching the `grid` key of experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub cells: Vec<usize>,
    pub length: Vec<f64>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = SblError;

    fn try_from(spec: GridSpec) -> Result<Self> {
        let pick = |v: &[usize], i: usize| v.get(i).or(v.first()).copied();
        let pickf = |v: &[f64], i: usize| v.get(i).or(v.first()).copied();
        match spec.dim {
            1 => Grid::new_1d(
                pick(&spec.cells, 0).unwrap_or(0),
                pickf(&spec.length, 0).unwrap_or(0.0),
            ),
            2 => Grid::new_2d(
                [pick(&spec.cells, 0).unwrap_or(0), pick(&spec.cells, 1).unwrap_or(0)],
                [pickf(&spec.length, 0).unwrap_or(0.0), pickf(&spec.length, 1).unwrap_or(0.0)],
            ),
            d => Err(SblError::InvalidArgument(format!("dimension {d} not supported (1 or 2)"))),
        }
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            dim: g.dim,
            cells: g.cells[..g.dim].to_vec(),
            length: g.length[..g.dim].to_vec(),
        }
    }
}

impl Grid {
    pub fn new_1d(cells: usize, length: f64) -> Result<Self> {
        Self::build(1, [cells, 1], [length, 1.0])
    }

    pub fn new_2d(cells: [usize; 2], length: [f64; 2]) -> Result<Self> {
        Self::build(2, cells, length)
    }

    fn build(dim: usize, cells: [usize; 2], length: [f64; 2]) -> Result<Self> {
        for axis in 0..dim {
            if cells[axis] == 0 {
                return Err(SblError::InvalidArgument(format!("axis {axis} has no cells")));
            }
            if !(length[axis].is_finite() && length[axis] > 0.0) {
                return Err(SblError::InvalidArgument(format!(
                    "axis {axis} length must be positive, got {}",
                    length[axis]
                )));
            }
        }
        Ok(Self { dim, cells, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.length[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length[axis] / self.cells[axis] as f64
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn total_cells(&self) -> usize {
        self.cells[..self.dim].iter().product()
    }

    /// Volume of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.length[..self.dim].iter().product()
    }

    pub fn center(&self, axis: usize, j: usize) -> f64 {
        (j as f64 + 0.5) * self.spacing(axis)
    }

    /// Cell center coordinates of the flat cell index.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.unflatten(idx);
        let y = if self.dim == 2 { self.center(1, j) } else { 0.0 };
        [self.center(0, i), y]
    }

    pub fn unflatten(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    pub fn flatten(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    /// Flat index of the neighbour shifted by `offset` cells along `axis`, periodically.
    pub fn shifted(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let (i, j) = self.unflatten(idx);
        let wrap = |k: usize, n: usize| ((k as isize + offset).rem_euclid(n as isize)) as usize;
        if axis == 0 {
            self.flatten(wrap(i, self.cells[0]), j)
        } else {
            self.flatten(i, wrap(j, self.cells[1]))
        }
    }
}

/// Cell averages of a scalar on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_cells() {
            return Err(SblError::InvalidArgument(format!(
                "field has {} values but grid has {} cells",
                values.len(),
                grid.total_cells()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(SblError::InvalidArgument(format!("non-finite value in cell {cell}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.total_cells()] }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.total_cells()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.total_cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(SblError::InvalidArgument("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field::from_raw(self.grid, values))
    }

    /// One row per cell: `index,x[,y],value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header = if self.grid.dim() == 2 { "index,x,y,value" } else { "index,x,value" };
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for (idx, v) in self.values.iter().enumerate() {
            line.clear();
            let c = self.grid.coords(idx);
            if self.grid.dim() == 2 {
                let _ = write!(line, "{idx},{},{},{v:e}", c[0], c[1]);
            } else {
                let _ = write!(line, "{idx},{},{v:e}", c[0]);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the CSV produced by [`Field::write_csv`] back onto `grid`.
    pub fn read_csv<R: BufRead>(grid: Grid, input: R) -> Result<Field> {
        let mut values = vec![f64::NAN; grid.total_cells()];
        let mut seen = 0usize;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let parse_err = || SblError::Parse(format!("line {}: '{line}'", lineno + 1));
            let idx: usize = cols.first().ok_or_else(parse_err)?.trim().parse().map_err(|_| parse_err())?;
            let v: f64 = cols.last().ok_or_else(parse_err)?.trim().parse().map_err(|_| parse_err())?;
            if idx >= values.len() {
                return Err(parse_err());
            }
            values[idx] = v;
            seen += 1;
        }
        if seen != grid.total_cells() {
            return Err(SblError::Parse(format!("expected {} rows, read {seen}", grid.total_cells())));
        }
        Field::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_and_spacing() {
        let g = Grid::new_1d(4, 2.0).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.center(0, 0), 0.25);
        assert_eq!(g.center(0, 3), 1.75);
        assert_eq!(g.total_cells(), 4);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new_1d(0, 1.0).is_err());
        assert!(Grid::new_1d(8, 0.0).is_err());
        assert!(Grid::new_2d([4, 0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn periodic_shift_wraps() {
        let g = Grid::new_2d([3, 2], [1.0, 1.0]).unwrap();
        assert_eq!(g.total_cells(), 6);
        assert_eq!(g.shifted(0, 0, -1), 2);
        assert_eq!(g.shifted(2, 0, 1), 0);
        assert_eq!(g.shifted(0, 1, 1), 3);
        assert_eq!(g.shifted(4, 1, 1), 1);
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        let g = Grid::new_1d(3, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0, 1.0]).is_err());
        assert!(Field::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn arithmetic_is_exact_per_cell() {
        let g = Grid::new_1d(3, 1.0).unwrap();
        let a = Field::new(g, vec![0.1, 0.2, 0.3]).unwrap();
        let b = Field::new(g, vec![1.0, -2.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().values(), &[0.1 + 1.0, 0.2 - 2.0, 0.3 + 4.0]);
        assert_eq!(a.scale(3.0).values(), &[0.1 * 3.0, 0.2 * 3.0, 0.3 * 3.0]);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new_2d([3, 2], [1.0, 2.0]).unwrap();
        let f = Field::from_fn(g, |x| x[0] * 3.0 - x[1] + 1.0 / 3.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = Field::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn grid_serde_uses_document_shape() {
        let g: Grid = serde_json::from_str(r#"{"dim":1,"cells":[64],"length":[6.5]}"#).unwrap();
        assert_eq!(g.cells(0), 64);
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"dim":1,"cells":[64],"length":[6.5]}"#);
        assert!(serde_json::from_str::<Grid>(r#"{"dim":3,"cells":[4],"length":[1.0]}"#).is_err());
    }
}
