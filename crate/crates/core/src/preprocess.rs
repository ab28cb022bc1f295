//! Scan preparation: edge cropping, tiling and block-mean subsampling.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::grid::SurfaceGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub crop_modulus: usize,
    pub tile_edge: usize,
    pub sampling_factor: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            crop_modulus: 1000,
            tile_edge: 2400,
            sampling_factor: 0.1,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop_modulus == 0 {
            return Err(invalid_arg("crop modulus must be >= 1"));
        }
        if self.tile_edge < 2 {
            return Err(invalid_arg("tile edge must be >= 2"));
        }
        block_edge(self.sampling_factor)?;
        Ok(())
    }
}

/// `(leading, trailing)` samples removed from a dimension of length `dim`.
pub fn crop_margins(dim: usize, modulus: usize) -> (usize, usize) {
    let r = dim % modulus;
    (r / 2, r - r / 2)
}

/// Trims each dimension down to a multiple of `modulus`, splitting the
/// remainder between both edges; odd remainders lose the extra sample at the
/// trailing edge.
pub fn crop(grid: &SurfaceGrid, modulus: usize) -> Result<SurfaceGrid> {
    if modulus == 0 {
        return Err(invalid_arg("crop modulus must be >= 1"));
    }
    let (rows, cols) = grid.shape();
    for (name, dim) in [("rows", rows), ("cols", cols)] {
        if dim <= dim % modulus || dim - dim % modulus < 2 {
            return Err(invalid_arg(format!(
                "{name} = {dim} leaves nothing after removing remainder {} (modulus {modulus})",
                dim % modulus
            )));
        }
    }
    let (top, _) = crop_margins(rows, modulus);
    let (left, _) = crop_margins(cols, modulus);
    grid.window(top, left, rows - rows % modulus, cols - cols % modulus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    /// Tile row index.
    pub row: usize,
    /// Tile column index.
    pub col: usize,
    pub grid: SurfaceGrid,
}

impl Tile {
    /// Sample offset of the tile's top-left corner in the source grid.
    pub fn origin(&self) -> (usize, usize) {
        let (r, c) = self.grid.shape();
        (self.row * r, self.col * c)
    }
}

/// Non-overlapping `edge × edge` tiles in row-major order. Trailing strips
/// narrower than `edge` are dropped.
pub fn tile(grid: &SurfaceGrid, edge: usize) -> Result<Vec<Tile>> {
    let (rows, cols) = grid.shape();
    if edge < 2 || edge > rows || edge > cols {
        return Err(invalid_arg(format!(
            "tile edge {edge} does not fit a {rows}x{cols} grid"
        )));
    }
    let mut tiles = Vec::with_capacity((rows / edge) * (cols / edge));
    for r in 0..rows / edge {
        for c in 0..cols / edge {
            tiles.push(Tile {
                row: r,
                col: c,
                grid: grid.window(r * edge, c * edge, edge, edge)?,
            });
        }
    }
    Ok(tiles)
}

fn block_edge(factor: f64) -> Result<usize> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(invalid_arg(format!(
            "sampling factor must be in (0, 1], got {factor}"
        )));
    }
    let inv = 1.0 / factor;
    let b = inv.round();
    if (inv - b).abs() > 1e-9 * b {
        return Err(invalid_arg(format!(
            "1/sampling factor must be an integer, got {inv}"
        )));
    }
    Ok(b as usize)
}

/// Replaces each `b × b` block with its mean, `b = round(1/factor)`.
pub fn subsample(grid: &SurfaceGrid, factor: f64) -> Result<SurfaceGrid> {
    let b = block_edge(factor)?;
    let (rows, cols) = grid.shape();
    if rows % b != 0 || cols % b != 0 {
        return Err(invalid_arg(format!(
            "block edge {b} does not divide {rows}x{cols}; tile first"
        )));
    }
    if b == 1 {
        return Ok(grid.clone());
    }
    let (out_r, out_c) = (rows / b, cols / b);
    let mut acc = vec![0.0; out_r * out_c];
    for i in 0..rows {
        let row = grid.row(i);
        let out_row = &mut acc[(i / b) * out_c..(i / b + 1) * out_c];
        for (oc, chunk) in out_row.iter_mut().zip(row.chunks_exact(b)) {
            *oc += chunk.iter().sum::<f64>();
        }
    }
    let inv = 1.0 / (b * b) as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    SurfaceGrid::with_spacing(
        out_r,
        out_c,
        acc,
        grid.spacing_x() * b as f64,
        grid.spacing_y() * b as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize) -> SurfaceGrid {
        SurfaceGrid::from_fn(rows, cols, |i, j| (i * cols + j) as f64).unwrap()
    }

    #[test]
    fn crop_margins_examples() {
        assert_eq!(crop_margins(10752, 1000), (376, 376));
        assert_eq!(crop_margins(11003, 1000), (1, 2));
        assert_eq!(crop_margins(3000, 1000), (0, 0));
    }

    #[test]
    fn crop_keeps_center() {
        let g = ramp(13, 7);
        let c = crop(&g, 5).unwrap();
        // 13 % 5 = 3 -> (1, 2); 7 % 5 = 2 -> (1, 1)
        assert_eq!(c.shape(), (10, 5));
        assert_eq!(c.get(0, 0), g.get(1, 1));
        assert_eq!(c.get(9, 4), g.get(10, 5));
    }

    #[test]
    fn crop_zero_remainder_is_identity() {
        let g = ramp(20, 30);
        assert_eq!(crop(&g, 10).unwrap(), g);
    }

    #[test]
    fn crop_too_small_errors() {
        let g = SurfaceGrid::new(999, 999, vec![0.0; 999 * 999]).unwrap();
        assert!(crop(&g, 1000).is_err());
    }

    #[test]
    fn tiles_count_and_content() {
        let g = ramp(50, 50);
        let t = tile(&g, 24).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!((t[1].row, t[1].col), (0, 1));
        assert_eq!(t[3].origin(), (24, 24));
        assert_eq!(t[3].grid.get(0, 0), g.get(24, 24));
        let whole = tile(&g, 50).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].grid, g);
        assert!(tile(&g, 51).is_err());
    }

    #[test]
    fn subsample_block_means() {
        let g = SurfaceGrid::new(
            4,
            4,
            vec![
                1.0, 2.0, 3.0, 4.0, //
                5.0, 6.0, 7.0, 8.0, //
                9.0, 10.0, 11.0, 12.0, //
                13.0, 14.0, 15.0, 16.0,
            ],
        )
        .unwrap();
        let s = subsample(&g, 0.5).unwrap();
        assert_eq!(s.heights(), &[3.5, 5.5, 11.5, 13.5]);
        assert_eq!(s.spacing_x(), 2.0);
    }

    #[test]
    fn subsample_constant_and_errors() {
        let g = SurfaceGrid::new(20, 20, vec![4.25; 400]).unwrap();
        let s = subsample(&g, 0.1).unwrap();
        assert_eq!(s.shape(), (2, 2));
        assert!(s.heights().iter().all(|&v| v == 4.25));
        assert!(subsample(&ramp(15, 20), 0.1).is_err());
        assert!(subsample(&g, 0.3).is_err());
        assert!(subsample(&g, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn crop_dims_are_multiples(rows in 2usize..120, cols in 2usize..120, m in 1usize..40) {
                let g = SurfaceGrid::new(rows, cols, vec![0.0; rows * cols]).unwrap();
                if let Ok(c) = crop(&g, m) {
                    prop_assert_eq!(c.rows() % m, 0);
                    prop_assert_eq!(c.cols() % m, 0);
                    prop_assert_eq!(rows - c.rows(), rows % m);
                    prop_assert_eq!(cols - c.cols(), cols % m);
                }
            }

            #[test]
            fn tiles_reassemble(rows in 2usize..40, cols in 2usize..40, edge in 2usize..20) {
                let g = ramp(rows, cols);
                match tile(&g, edge) {
                    Ok(t) => {
                        prop_assert_eq!(t.len(), (rows / edge) * (cols / edge));
                        for tl in &t {
                            let (r0, c0) = tl.origin();
                            for i in 0..edge {
                                for j in 0..edge {
                                    prop_assert_eq!(tl.grid.get(i, j), g.get(r0 + i, c0 + j));
                                }
                            }
                        }
                    }
                    Err(_) => prop_assert!(edge > rows || edge > cols),
                }
            }

            #[test]
            fn subsample_preserves_mean(blocks in 2usize..6, b in 1usize..5, seed in 0u64..1000) {
                let n = blocks * b;
                let g = SurfaceGrid::from_fn(n, n, |i, j| ((i * 31 + j * 17 + seed as usize) % 13) as f64 - 6.0).unwrap();
                let s = subsample(&g, 1.0 / b as f64).unwrap();
                let all = s.heights().iter().sum::<f64>() / s.heights().len() as f64;
                prop_assert!((all - g.mean()).abs() < 1e-12);
            }
        }
    }
}
