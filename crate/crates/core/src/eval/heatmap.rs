//! Projection of absolute percentage errors onto two dimensions.

use std::io::Write;

use crate::dataset::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::learner::Predict;
use crate::space::FeatureSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub dim_x: usize,
    pub dim_y: usize,
    pub bins_x: usize,
    pub bins_y: usize,
    /// Row-major by x: `cells[ix * bins_y + iy]`; `None` for empty cells.
    pub cells: Vec<Option<f64>>,
    centers_x: Vec<f64>,
    centers_y: Vec<f64>,
}

fn bin(unit: f64, bins: usize) -> usize {
    ((unit * bins as f64).floor() as usize).min(bins - 1)
}

/// Mean absolute percentage error per cell of a `bins_x x bins_y` grid over
/// the normalized `(dim_x, dim_y)` plane.
pub fn heatmap<P: Predict + ?Sized>(
    model: &P,
    test: &Dataset,
    dim_x: usize,
    dim_y: usize,
    bins_x: usize,
    bins_y: usize,
) -> Result<Heatmap> {
    let space = test.space();
    if dim_x >= space.len() || dim_y >= space.len() {
        return Err(Error::InvalidArgument(format!("heat-map dimensions ({dim_x}, {dim_y}) out of range")));
    }
    if bins_x == 0 || bins_y == 0 {
        return Err(Error::InvalidArgument("heat-map needs at least one bin per axis".into()));
    }
    let mut sum = vec![0.0; bins_x * bins_y];
    let mut count = vec![0usize; bins_x * bins_y];
    for s in test {
        let pred = model.predict(&s.config);
        if pred == 0.0 || !pred.is_finite() {
            continue;
        }
        let ape = (s.target - pred).abs() / pred.abs();
        let u = space.normalize(&s.config)?;
        let cell = bin(u[dim_x], bins_x) * bins_y + bin(u[dim_y], bins_y);
        sum[cell] += ape;
        count[cell] += 1;
    }
    let cells = sum.iter().zip(&count).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect();
    Ok(Heatmap {
        dim_x,
        dim_y,
        bins_x,
        bins_y,
        cells,
        centers_x: centers(space, dim_x, bins_x),
        centers_y: centers(space, dim_y, bins_y),
    })
}

fn centers(space: &FeatureSpace, dim: usize, bins: usize) -> Vec<f64> {
    (0..bins).map(|i| space.denormalize_coord(dim, (i as f64 + 0.5) / bins as f64)).collect()
}

impl Heatmap {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.cells[ix * self.bins_y + iy]
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Whitespace-separated `x_center y_center mean_ape` rows for occupied
    /// cells, cell centers in the dimensions' own units, with a blank line
    /// between groups of equal x.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut first_group = true;
        for ix in 0..self.bins_x {
            let rows: Vec<(usize, f64)> = (0..self.bins_y).filter_map(|iy| self.get(ix, iy).map(|v| (iy, v))).collect();
            if rows.is_empty() {
                continue;
            }
            if !first_group {
                writeln!(out)?;
            }
            first_group = false;
            for (iy, v) in rows {
                writeln!(out, "{} {} {}", fmt_f64(self.centers_x[ix]), fmt_f64(self.centers_y[iy]), fmt_f64(v))?;
            }
        }
        Ok(())
    }
}
