//! Periodic uniform grids on the unit torus and grid functions.

use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0,1)^n`; spacing is exactly `1/size` per axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    sizes: Vec<usize>,
}

impl Grid {
    pub fn new(sizes: &[usize]) -> Result<Arc<Grid>> {
        if sizes.is_empty() {
            return Err(Error::config("grid needs at least one axis"));
        }
        if sizes.iter().any(|&s| s < 4) {
            return Err(Error::config("grid sizes must be at least 4 per axis"));
        }
        Ok(Arc::new(Grid {
            sizes: sizes.to_vec(),
        }))
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.sizes[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        self.sizes.iter().map(|&s| 1.0 / s as f64).fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Row-major flat index of a multi-index.
    pub fn index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &i) in multi.iter().enumerate() {
            idx = idx * self.sizes[axis] + i;
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            multi[axis] = idx % self.sizes[axis];
            idx /= self.sizes[axis];
        }
        multi
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(axis, &i)| i as f64 * self.spacing(axis))
            .collect()
    }

    /// Flat index of the node shifted by `offset` grid cells along `axis`,
    /// wrapping periodically.
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut multi = self.multi_index(idx);
        let s = self.sizes[axis] as isize;
        multi[axis] = ((multi[axis] as isize + offset).rem_euclid(s)) as usize;
        self.index(&multi)
    }

    /// Torus distance: componentwise `min(|d|, 1 - |d|)`, Euclidean length.
    pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&p, &q)| {
                let d = (p - q).abs() % 1.0;
                d.min(1.0 - d)
            })
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }
}

/// Real-valued function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>) -> GridFunction {
        let n = grid.node_count();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != grid.node_count() {
            return Err(Error::dimension(format!(
                "grid has {} nodes but {} values were supplied",
                grid.node_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("grid function values must be finite"));
        }
        Ok(GridFunction { grid, values })
    }

    /// Samples a closure of the node coordinates.
    pub fn sample(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let values = (0..grid.node_count())
            .map(|i| f(&grid.coords(i)))
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Shifts values by one grid cell along `axis` (periodic).
    pub fn shifted(&self, axis: usize, offset: isize) -> GridFunction {
        let mut out = self.clone();
        for idx in 0..self.values.len() {
            out.values[idx] = self.values[self.grid.shift(idx, axis, offset)];
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let n = self.grid.dim();
        for axis in 0..n {
            write!(w, "x{},", axis + 1)?;
        }
        writeln!(w, "value")?;
        for (idx, v) in self.values.iter().enumerate() {
            for c in self.grid.coords(idx) {
                write!(w, "{c},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<GridFunction> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::config("empty grid-function csv"))??;
        let dim = header.split(',').count() - 1;
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::config(format!("bad csv row `{line}`")));
            }
            let row: Vec<f64> = fields
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::config(format!("bad csv number: {e}")))?;
            coords.push(row[..dim].to_vec());
            values.push(row[dim]);
        }
        // infer per-axis sizes from distinct coordinates
        let mut sizes = vec![0usize; dim];
        for axis in 0..dim {
            let mut axis_coords: Vec<f64> = coords.iter().map(|c| c[axis]).collect();
            axis_coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
            axis_coords.dedup();
            sizes[axis] = axis_coords.len();
        }
        let grid = Grid::new(&sizes)?;
        GridFunction::from_values(grid, values)
    }

    /// Compact binary layout: `u64 dim`, `u64 size` per axis, then row-major
    /// little-endian `f64` values.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(&(self.grid.dim() as u64).to_le_bytes())?;
        for &s in self.grid.sizes() {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<GridFunction> {
        let mut file = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let mut off = 0usize;
        let mut take_u64 = |buf: &[u8]| -> Result<u64> {
            let bytes: [u8; 8] = buf
                .get(off..off + 8)
                .ok_or_else(|| Error::config("truncated binary grid function"))?
                .try_into()
                .unwrap();
            off += 8;
            Ok(u64::from_le_bytes(bytes))
        };
        let dim = take_u64(&buf)? as usize;
        let mut sizes = Vec::with_capacity(dim);
        for _ in 0..dim {
            sizes.push(take_u64(&buf)? as usize);
        }
        let count: usize = sizes.iter().product();
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let bytes: [u8; 8] = buf
                .get(off..off + 8)
                .ok_or_else(|| Error::config("truncated binary grid function"))?
                .try_into()
                .unwrap();
            off += 8;
            values.push(f64::from_le_bytes(bytes));
        }
        let grid = Grid::new(&sizes)?;
        GridFunction::from_values(grid, values)
    }
}
