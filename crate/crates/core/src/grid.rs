//! Regular lattices in d = 2 or 3 dimensions and scalar fields sampled on them.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::CoreError;

/// What a [`GridField`]'s values represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Independent standard normal draws, one per cell. The `h^{d/2}`
    /// quadrature factor is applied during convolution, not stored here.
    WhiteNoise,
    Smooth,
    /// Constant on aligned blocks of `block_cells` cells per axis.
    BlockConstant,
}

/// A regular d-dimensional lattice. Cell `index` sits at the physical point
/// `origin + spacing * index` (componentwise), where `origin` is the
/// physical coordinate of cell `(0, .., 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub extent: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
}

impl Grid {
    pub fn new(extent: Vec<usize>, spacing: f64, origin: Vec<f64>) -> Result<Self, CoreError> {
        let dim = extent.len();
        if dim < 2 || dim > 3 {
            return Err(CoreError::invalid("dim", "must be 2 or 3"));
        }
        if extent.iter().any(|&e| e < 2) {
            return Err(CoreError::invalid("extent", "all components must be >= 2"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(CoreError::invalid("spacing", "must be finite and positive"));
        }
        if origin.len() != dim || origin.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("origin", "must be finite, one entry per axis"));
        }
        Ok(Grid { dim, extent, spacing, origin })
    }

    /// A grid of `extent` cells per axis whose cell centers straddle `center`
    /// symmetrically.
    pub fn centered(extent: Vec<usize>, spacing: f64, center: &[f64]) -> Result<Self, CoreError> {
        let origin: Vec<f64> = center
            .iter()
            .zip(&extent)
            .map(|(&c, &e)| c - spacing * ((e - 1) as f64) / 2.0)
            .collect();
        Grid::new(extent, spacing, origin)
    }

    /// Smallest centered grid covering the physical box `center + [-half, half]^d`.
    pub fn covering(center: &[f64], half_side: f64, spacing: f64) -> Result<Self, CoreError> {
        let n = (2.0 * half_side / spacing).ceil() as usize + 1;
        Grid::centered(vec![n; center.len()], spacing, center)
    }

    pub fn num_cells(&self) -> usize {
        self.extent.iter().product()
    }

    /// Row-major linear index, axis 0 slowest.
    pub fn linear(&self, index: &[usize]) -> usize {
        let mut lin = 0;
        for (k, &i) in index.iter().enumerate() {
            debug_assert!(i < self.extent[k]);
            lin = lin * self.extent[k] + i;
        }
        lin
    }

    pub fn multi(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim];
        for k in (0..self.dim).rev() {
            idx[k] = lin % self.extent[k];
            lin /= self.extent[k];
        }
        idx
    }

    pub fn point(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + self.spacing * i as f64)
            .collect()
    }

    pub fn point_of_linear(&self, lin: usize) -> Vec<f64> {
        self.point(&self.multi(lin))
    }

    /// The cell whose center is nearest to `p`, if `p` lies within the grid.
    pub fn nearest_cell(&self, p: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let i = ((p[k] - self.origin[k]) / self.spacing).round();
            if i < -0.5 || i > (self.extent[k] - 1) as f64 + 0.5 {
                return None;
            }
            idx.push(i.clamp(0.0, (self.extent[k] - 1) as f64) as usize);
        }
        Some(idx)
    }

    /// The in-grid cell nearest to `p`, clamping coordinates that fall
    /// outside the grid.
    pub fn clamped_cell(&self, p: &[f64]) -> Vec<usize> {
        (0..self.dim)
            .map(|k| {
                let i = ((p[k] - self.origin[k]) / self.spacing).round();
                i.clamp(0.0, (self.extent[k] - 1) as f64) as usize
            })
            .collect()
    }

    /// Linear indices of all cells whose centers lie in `center + [-half, half]^d`
    /// (with a small tolerance so box faces land on cell centers predictably).
    pub fn cells_in_box(&self, center: &[f64], half: f64) -> Vec<usize> {
        let tol = 1e-9 * self.spacing.max(1.0);
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let a = ((center[k] - half - self.origin[k]) / self.spacing - tol).ceil().max(0.0);
            let b = ((center[k] + half - self.origin[k]) / self.spacing + tol).floor();
            let b = b.min((self.extent[k] - 1) as f64);
            if b < a {
                return Vec::new();
            }
            lo.push(a as usize);
            hi.push(b as usize);
        }
        let mut out = Vec::new();
        let mut idx = lo.clone();
        loop {
            out.push(self.linear(&idx));
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    for j in k + 1..self.dim {
                        idx[j] = lo[j];
                    }
                    break;
                }
            }
        }
    }
}

/// Scalar field values sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>, kind: FieldKind) -> Result<Self, CoreError> {
        if values.len() != grid.num_cells() {
            return Err(CoreError::invalid("values", "length must equal product of extents"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("values", "all values must be finite"));
        }
        Ok(GridField { grid, values, kind })
    }

    pub fn constant(grid: Grid, value: f64, kind: FieldKind) -> Self {
        let n = grid.num_cells();
        GridField { grid, values: vec![value; n], kind }
    }

    pub fn value_at(&self, index: &[usize]) -> f64 {
        self.values[self.grid.linear(index)]
    }

    pub fn negated(&self) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            kind: self.kind,
        }
    }
}

const MAGIC: &[u8; 4] = b"GPF1";

/// Metadata mirrored into the JSON sidecar next to the binary container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMeta {
    pub magic: String,
    pub dim: usize,
    pub extent: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub kind: FieldKind,
}

impl GridField {
    /// Binary container: magic "GPF1", u32 dim, u64 extents, f64 spacing,
    /// f64 origin, then the values as little-endian f64, row-major with
    /// axis 0 slowest. A `.json` sidecar mirrors the metadata.
    pub fn write_gpf(&self, path: &Path) -> Result<(), CoreError> {
        let mut buf: Vec<u8> = Vec::with_capacity(64 + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.grid.dim as u32).to_le_bytes());
        for &e in &self.grid.extent {
            buf.extend_from_slice(&(e as u64).to_le_bytes());
        }
        buf.extend_from_slice(&self.grid.spacing.to_le_bytes());
        for &o in &self.grid.origin {
            buf.extend_from_slice(&o.to_le_bytes());
        }
        for &v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        let meta = FieldMeta {
            magic: "GPF1".into(),
            dim: self.grid.dim,
            extent: self.grid.extent.clone(),
            spacing: self.grid.spacing,
            origin: self.grid.origin.clone(),
            kind: self.kind,
        };
        let sidecar = path.with_extension(match path.extension() {
            Some(ext) => format!("{}.json", ext.to_string_lossy()),
            None => "json".to_string(),
        });
        std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    pub fn read_gpf(path: &Path) -> Result<GridField, CoreError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let bad = |what: &str| CoreError::invalid("gpf", what);
        if buf.len() < 8 || &buf[0..4] != MAGIC {
            return Err(bad("missing GPF1 magic"));
        }
        let mut off = 4;
        fn take<'a>(buf: &'a [u8], off: &mut usize, n: usize) -> Result<&'a [u8], CoreError> {
            if *off + n > buf.len() {
                return Err(CoreError::invalid("gpf", "truncated container"));
            }
            let s = &buf[*off..*off + n];
            *off += n;
            Ok(s)
        }
        let dim = u32::from_le_bytes(take(&buf, &mut off, 4)?.try_into().unwrap()) as usize;
        if dim < 2 || dim > 3 {
            return Err(bad("dim must be 2 or 3"));
        }
        let mut extent = Vec::with_capacity(dim);
        for _ in 0..dim {
            extent.push(u64::from_le_bytes(take(&buf,&mut off,8)?.try_into().unwrap()) as usize);
        }
        let spacing = f64::from_le_bytes(take(&buf,&mut off,8)?.try_into().unwrap());
        let mut origin = Vec::with_capacity(dim);
        for _ in 0..dim {
            origin.push(f64::from_le_bytes(take(&buf,&mut off,8)?.try_into().unwrap()));
        }
        let n: usize = extent.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(take(&buf,&mut off,8)?.try_into().unwrap()));
        }
        let grid = Grid::new(extent, spacing, origin)?;
        GridField::new(grid, values, FieldKind::Smooth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_index_roundtrip() {
        let g = Grid::new(vec![4, 5, 6], 0.5, vec![0.0, 0.0, 0.0]).unwrap();
        for lin in 0..g.num_cells() {
            assert_eq!(g.linear(&g.multi(lin)), lin);
        }
    }

    #[test]
    fn centered_grid_straddles_center() {
        let g = Grid::centered(vec![5, 5], 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(g.point(&[2, 2]), vec![0.0, 0.0]);
        let g = Grid::centered(vec![4, 4], 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(g.point(&[0, 0]), vec![-1.5, -1.5]);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Grid::new(vec![1, 4], 0.5, vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![4, 4], 0.0, vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![4, 4, 4, 4], 0.5, vec![0.0; 4]).is_err());
    }

    #[test]
    fn cells_in_box_counts() {
        let g = Grid::centered(vec![9, 9], 1.0, &[0.0, 0.0]).unwrap();
        let cells = g.cells_in_box(&[0.0, 0.0], 2.0);
        assert_eq!(cells.len(), 25);
    }

    #[test]
    fn gpf_roundtrip() {
        let g = Grid::new(vec![3, 4], 0.25, vec![-1.0, 2.0]).unwrap();
        let vals: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let f = GridField::new(g, vals, FieldKind::Smooth).unwrap();
        let dir = std::env::temp_dir().join("gpf_roundtrip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("f.gpf");
        f.write_gpf(&p).unwrap();
        let back = GridField::read_gpf(&p).unwrap();
        assert_eq!(back.grid, f.grid);
        assert_eq!(back.values, f.values);
        assert!(p.with_extension("gpf.json").exists());
    }
}
