//! Grid-aligned simple processes.

use crate::error::{invalid, Error, Result};
use crate::filtration::Filtration;
use crate::kernel::{max_abs_diff, Mat};

/// Piecewise-constant process on a grid: `values[j]` holds
/// the value on `[grid[j], grid[j+1])`. A scalar process has one operator per
/// cell; an indexed process stores `F(v_alpha)` on a real basis.
#[derive(Clone, Debug)]
pub struct AdaptedSimpleProcess {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<Mat>>,
    pub indexed: bool,
}

impl AdaptedSimpleProcess {
    pub fn scalar(grid: Vec<f64>, values: Vec<Mat>) -> Result<Self> {
        let values = values.into_iter().map(|v| vec![v]).collect();
        Self::new(grid, values, false)
    }

    pub fn indexed(grid: Vec<f64>, values: Vec<Vec<Mat>>) -> Result<Self> {
        Self::new(grid, values, true)
    }

    fn new(grid: Vec<f64>, values: Vec<Vec<Mat>>, indexed: bool) -> Result<Self> {
        if grid.len() != values.len() + 1 {
            return invalid("a simple process needs one value per grid cell");
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("grid must be strictly increasing");
        }
        let k = values.first().map(|v| v.len()).unwrap_or(1);
        if values.iter().any(|v| v.len() != k || v.is_empty()) {
            return invalid("inconsistent index dimension");
        }
        Ok(Self { grid, values, indexed })
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn index_dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.grid[j + 1] - self.grid[j]
    }

    /// Checks that the value on cell `j` is fixed by the level-`j`
    /// conditional expectation.
    pub fn certify_adapted(&self, filt: &Filtration, tol: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (j, vals) in self.values.iter().enumerate() {
            let level = filt.level_at(self.grid[j])?;
            for v in vals {
                let e = filt.cond_exp(v, level)?;
                let scale = 1.0 + v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                worst = worst.max(max_abs_diff(&e, v) / scale);
            }
        }
        if worst > tol {
            return Err(Error::NotAdapted(format!("adaptedness defect {worst:.3e}")));
        }
        Ok(worst)
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.iter().map(&f).collect()).collect(),
            indexed: self.indexed,
        }
    }
}
