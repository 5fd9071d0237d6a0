//! Uniform cell-centered grids on intervals and rectangles.
//!
//! Cells are indexed row-major with `x` fastest. A 1D grid is stored as a
//! degenerate 2D grid with a single row of unit height, so most kernels are
//! dimension-agnostic: axes with a single cell simply have no faces.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hard cap on total cell count; keeps misconfigured runs from exhausting memory.
pub const MAX_CELLS: usize = 1 << 24;

/// Uniform rectangular grid with cell-centered unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid<R> {
    dim: usize,
    cells: [usize; 2],
    extents: [R; 2],
    h: [R; 2],
}

impl<R: Real> Grid<R> {
    /// 1D grid on `[0, extent]` with `n` cells.
    pub fn new_1d(extent: R, n: usize) -> Result<Self> {
        Self::build(1, [n, 1], [extent, R::one()])
    }

    /// 2D grid on `[0, extent_x] x [0, extent_y]` with `nx * ny` cells.
    pub fn new_2d(extent_x: R, extent_y: R, nx: usize, ny: usize) -> Result<Self> {
        Self::build(2, [nx, ny], [extent_x, extent_y])
    }

    fn build(dim: usize, cells: [usize; 2], extents: [R; 2]) -> Result<Self> {
        for axis in 0..dim {
            if cells[axis] < 3 {
                return Err(Error::Grid(format!(
                    "axis {axis} needs at least 3 cells, got {}",
                    cells[axis]
                )));
            }
            if !(extents[axis] > R::zero()) || !extents[axis].is_finite() {
                return Err(Error::Grid(format!(
                    "axis {axis} extent must be positive and finite"
                )));
            }
        }
        let total = cells[0]
            .checked_mul(cells[1])
            .ok_or_else(|| Error::Grid("cell count overflow".into()))?;
        if total > MAX_CELLS {
            return Err(Error::Grid(format!(
                "grid of {total} cells exceeds the cap of {MAX_CELLS}"
            )));
        }
        let mut h = [R::one(); 2];
        for axis in 0..dim {
            h[axis] = extents[axis] / R::from_usize(cells[axis]).unwrap();
        }
        Ok(Self {
            dim,
            cells,
            extents,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis; the unused axis of a 1D grid reports 1.
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn total_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn extents(&self) -> [R; 2] {
        self.extents
    }

    /// Mesh spacing per axis; the unused axis of a 1D grid reports 1.
    pub fn spacing(&self) -> [R; 2] {
        self.h
    }

    /// Volume of a single cell (`h` in 1D, `hx*hy` in 2D).
    pub fn cell_volume(&self) -> R {
        self.h[0] * self.h[1]
    }

    /// Measure of the whole domain.
    pub fn domain_volume(&self) -> R {
        let mut v = self.extents[0];
        if self.dim == 2 {
            v = v * self.extents[1];
        }
        v
    }

    /// Physical coordinates of a cell center.
    pub fn cell_center(&self, ix: usize, iy: usize) -> [R; 2] {
        let half = R::lit(0.5);
        [
            (R::from_usize(ix).unwrap() + half) * self.h[0],
            (R::from_usize(iy).unwrap() + half) * self.h[1],
        ]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells[0] + ix
    }
}

/// Scalar field sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<R> {
    grid: Grid<R>,
    values: Vec<R>,
}

impl<R: Real> Field<R> {
    pub fn zeros(grid: Grid<R>) -> Self {
        Self {
            grid,
            values: vec![R::zero(); grid.total_cells()],
        }
    }

    pub fn constant(grid: Grid<R>, value: R) -> Self {
        Self {
            grid,
            values: vec![value; grid.total_cells()],
        }
    }

    /// Build from a function of the cell-center coordinates.
    pub fn from_fn(grid: Grid<R>, mut f: impl FnMut([R; 2]) -> R) -> Self {
        let [nx, ny] = grid.cells();
        let mut values = Vec::with_capacity(grid.total_cells());
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(f(grid.cell_center(ix, iy)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Grid<R>, values: Vec<R>) -> Result<Self> {
        if values.len() != grid.total_cells() {
            return Err(Error::Grid(format!(
                "value buffer has {} entries, grid has {} cells",
                values.len(),
                grid.total_cells()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    pub fn max(&self) -> R {
        self.values
            .iter()
            .fold(R::neg_infinity(), |a, &b| a.max(b))
    }

    pub fn min(&self) -> R {
        self.values.iter().fold(R::infinity(), |a, &b| a.min(b))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Write one CSV row per cell: coordinates, then the value.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let [nx, ny] = self.grid.cells();
        if self.grid.dim() == 1 {
            writeln!(out, "x,value")?;
            for ix in 0..nx {
                let c = self.grid.cell_center(ix, 0);
                writeln!(out, "{},{}", c[0], self.values[ix])?;
            }
        } else {
            writeln!(out, "x,y,value")?;
            for iy in 0..ny {
                for ix in 0..nx {
                    let c = self.grid.cell_center(ix, iy);
                    writeln!(out, "{},{},{}", c[0], c[1], self.values[self.grid.index(ix, iy)])?;
                }
            }
        }
        Ok(())
    }

    /// Compact binary snapshot, little-endian:
    /// `u32` dim, `u32` cells per axis (dim entries), `f64` extent per axis
    /// (dim entries), `f64` time, then the payload as `f64` row-major.
    pub fn write_snapshot<W: Write>(&self, time: R, out: &mut W) -> Result<()> {
        let dim = self.grid.dim();
        out.write_all(&(dim as u32).to_le_bytes())?;
        for axis in 0..dim {
            out.write_all(&(self.grid.cells()[axis] as u32).to_le_bytes())?;
        }
        for axis in 0..dim {
            out.write_all(&self.grid.extents()[axis].as_f64().to_le_bytes())?;
        }
        out.write_all(&time.as_f64().to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a snapshot written by [`Field::write_snapshot`]. Returns the field
    /// and the stored time stamp.
    pub fn read_snapshot<I: Read>(input: &mut I) -> Result<(Self, R)> {
        let mut u32buf = [0u8; 4];
        let mut f64buf = [0u8; 8];
        input.read_exact(&mut u32buf)?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        if dim != 1 && dim != 2 {
            return Err(Error::Input(format!("snapshot has dim {dim}")));
        }
        let mut cells = [1usize; 2];
        for c in cells.iter_mut().take(dim) {
            input.read_exact(&mut u32buf)?;
            *c = u32::from_le_bytes(u32buf) as usize;
        }
        let mut extents = [1f64; 2];
        for e in extents.iter_mut().take(dim) {
            input.read_exact(&mut f64buf)?;
            *e = f64::from_le_bytes(f64buf);
        }
        input.read_exact(&mut f64buf)?;
        let time = R::lit(f64::from_le_bytes(f64buf));
        let grid = if dim == 1 {
            Grid::new_1d(R::lit(extents[0]), cells[0])?
        } else {
            Grid::new_2d(R::lit(extents[0]), R::lit(extents[1]), cells[0], cells[1])?
        };
        let mut values = Vec::with_capacity(grid.total_cells());
        for _ in 0..grid.total_cells() {
            input.read_exact(&mut f64buf)?;
            values.push(R::lit(f64::from_le_bytes(f64buf)));
        }
        Ok((Self { grid, values }, time))
    }
}
