use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// A BEV grid. Cell `(i, j)` is centered at world `(i·g, j·g)`; rows run
/// along world x, columns along world y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(cell_size: f64, rows: usize, cols: usize) -> Result<Self, GridError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(GridError::ZeroCellSize(cell_size));
        }
        Ok(GridSpec {
            cell_size,
            rows: rows.max(1),
            cols: cols.max(1),
        })
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.cell_size, j as f64 * self.cell_size)
    }

    /// The union of all cells as `(min_x, min_y, max_x, max_y)`.
    pub fn floor_rect(&self) -> (f64, f64, f64, f64) {
        let g = self.cell_size;
        (
            -g / 2.0,
            -g / 2.0,
            self.rows as f64 * g - g / 2.0,
            self.cols as f64 * g - g / 2.0,
        )
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }
}

/// Number of whole cells that fit on a floor of the given extent.
///
/// `rows` counts cells along world x, `cols` along world y. A relative
/// slack of 1e-9 absorbs decimal cell sizes such as 0.75 m that are not
/// exact in binary.
pub fn grid_dimensions(floor_extent: (f64, f64), cell_size: f64) -> Result<(usize, usize), GridError> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(GridError::ZeroCellSize(cell_size));
    }
    let (x, y) = floor_extent;
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(GridError::BadExtent(x, y));
    }
    let count = |extent: f64| {
        let q = extent / cell_size;
        (q + q.abs() * 1e-9).floor() as usize
    };
    Ok((count(x), count(y)))
}
