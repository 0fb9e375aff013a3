use super::{ImageError, ImageGrid};

/// Tile anchors covering a field of view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileLayout {
    pub tile_side: usize,
    pub overlap: usize,
    /// `(row, col)` anchors in row-major order.
    pub origins: Vec<(usize, usize)>,
    pub fov_width: usize,
    pub fov_height: usize,
}

fn axis_origins(len: usize, tile: usize, stride: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 0;
    loop {
        if p + tile >= len {
            out.push(len - tile);
            return out;
        }
        out.push(p);
        p += stride;
    }
}

/// Plans tiles with stride `tile_side - overlap`; the last tile on each axis
/// is pulled back so it ends exactly on the FOV edge.
pub fn tile_plan(
    fov_width: usize,
    fov_height: usize,
    tile_side: usize,
    overlap: usize,
) -> Result<TileLayout, ImageError> {
    if tile_side == 0 || tile_side > fov_width.min(fov_height) {
        return Err(ImageError::Dimension(format!(
            "tile side {tile_side} does not fit in {fov_width}x{fov_height}"
        )));
    }
    if overlap >= tile_side {
        return Err(ImageError::Dimension(format!("overlap {overlap} must be below tile side {tile_side}")));
    }
    let stride = tile_side - overlap;
    let rows = axis_origins(fov_height, tile_side, stride);
    let cols = axis_origins(fov_width, tile_side, stride);
    let origins = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
    Ok(TileLayout { tile_side, overlap, origins, fov_width, fov_height })
}

/// One-dimensional ramp: 0 on the tile's outer edge, reaching 1 at depth
/// `overlap` measured at pixel centres.
#[inline]
fn ramp(pos: usize, side: usize, overlap: usize) -> f64 {
    if overlap == 0 {
        return 1.0;
    }
    let depth = pos.min(side - 1 - pos) as f64 + 0.5;
    (depth / overlap as f64).min(1.0)
}

/// Separable blending weight of local pixel `(row, col)` inside a tile.
pub fn blend_weight(row: usize, col: usize, side: usize, overlap: usize) -> f64 {
    ramp(row, side, overlap) * ramp(col, side, overlap)
}

/// Alpha-blends tiles back into the full FOV. Weights of all tiles covering a
/// pixel are renormalized to sum to one.
pub fn stitch(tiles: &[ImageGrid], layout: &TileLayout) -> Result<ImageGrid, ImageError> {
    if tiles.len() != layout.origins.len() {
        return Err(ImageError::Stitch(format!(
            "{} tiles supplied for {} layout origins",
            tiles.len(),
            layout.origins.len()
        )));
    }
    let s = layout.tile_side;
    if let Some(i) = tiles.iter().position(|t| t.width() != s || t.height() != s) {
        return Err(ImageError::Stitch(format!("tile {i} is not {s}x{s}")));
    }
    let (w, h) = (layout.fov_width, layout.fov_height);
    let mut acc = vec![0.0; w * h];
    let mut norm = vec![0.0; w * h];
    let mut covers = vec![0u32; w * h];
    let mut last = vec![0.0; w * h];
    for (tile, &(r0, c0)) in tiles.iter().zip(&layout.origins) {
        for r in 0..s {
            let wr = ramp(r, s, layout.overlap);
            for c in 0..s {
                let wt = wr * ramp(c, s, layout.overlap);
                let idx = (r0 + r) * w + c0 + c;
                let v = tile.get(r, c);
                acc[idx] += wt * v;
                norm[idx] += wt;
                covers[idx] += 1;
                last[idx] = v;
            }
        }
    }
    if norm.iter().any(|&n| n <= 0.0) {
        return Err(ImageError::Stitch("layout leaves pixels uncovered".into()));
    }
    // A pixel seen by one tile takes that tile's value exactly.
    let values = (0..w * h)
        .map(|i| if covers[i] == 1 { last[i] } else { (acc[i] / norm[i]).clamp(0.0, 1.0) })
        .collect();
    ImageGrid::new(w, h, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_grid_plan() {
        let l = tile_plan(8, 8, 4, 0).unwrap();
        assert_eq!(l.origins, vec![(0, 0), (0, 4), (4, 0), (4, 4)]);
        assert_eq!(tile_plan(4, 4, 4, 0).unwrap().origins, vec![(0, 0)]);
    }

    #[test]
    fn overlapping_plan_clamps_last_origin() {
        // stride walk: 0, 2, 4, then 6 + 4 reaches the edge
        let l = tile_plan(10, 10, 4, 2).unwrap();
        let cols: Vec<usize> = l.origins.iter().filter(|o| o.0 == 0).map(|o| o.1).collect();
        assert_eq!(cols, vec![0, 2, 4, 6]);
        let l = tile_plan(11, 5, 4, 1).unwrap();
        let cols: Vec<usize> = l.origins.iter().filter(|o| o.0 == 0).map(|o| o.1).collect();
        assert_eq!(cols, vec![0, 3, 6, 7]);
    }

    #[test]
    fn plan_rejects_bad_geometry() {
        assert!(tile_plan(3, 8, 4, 0).is_err());
        assert!(tile_plan(8, 8, 4, 4).is_err());
        assert!(tile_plan(8, 8, 0, 0).is_err());
    }

    #[test]
    fn zero_overlap_is_block_placement() {
        let l = tile_plan(4, 2, 2, 0).unwrap();
        let tiles: Vec<ImageGrid> =
            (0..2).map(|i| ImageGrid::from_fn(2, 2, |r, c| (i * 4 + r * 2 + c) as f64 / 8.0).unwrap()).collect();
        let out = stitch(&tiles, &l).unwrap();
        for r in 0..2 {
            for c in 0..4 {
                assert_eq!(out.get(r, c), tiles[c / 2].get(r, c % 2));
            }
        }
    }

    #[test]
    fn strip_blend_rises_across_overlap() {
        let l = tile_plan(6, 4, 4, 2).unwrap();
        assert_eq!(l.origins, vec![(0, 0), (0, 2)]);
        let tiles = vec![ImageGrid::filled(4, 4, 0.0).unwrap(), ImageGrid::filled(4, 4, 1.0).unwrap()];
        let out = stitch(&tiles, &l).unwrap();
        // Per-pixel weight oracle: ramp(d) = min(1, (min(d, 3 - d) + 0.5) / 2).
        let ramp_oracle = |d: usize| ((d.min(3 - d) as f64 + 0.5) / 2.0).min(1.0);
        for r in 0..4 {
            let row: Vec<f64> = (0..6).map(|c| out.get(r, c)).collect();
            assert_eq!(&row[..2], &[0.0, 0.0]);
            assert_eq!(&row[4..], &[1.0, 1.0]);
            for c in 2..4 {
                let wl = ramp_oracle(c);
                let wr = ramp_oracle(c - 2);
                assert!((row[c] - wr / (wl + wr)).abs() < 1e-15);
            }
            assert!(row[2] < row[3]);
            assert_eq!(row[2], 0.25);
            assert_eq!(row[3], 0.75);
        }
    }

    #[test]
    fn stitch_checks_tile_shapes() {
        let l = tile_plan(8, 8, 4, 0).unwrap();
        let tiles = vec![ImageGrid::filled(4, 4, 0.0).unwrap(); 3];
        assert!(stitch(&tiles, &l).is_err());
        let mut tiles = vec![ImageGrid::filled(4, 4, 0.0).unwrap(); 4];
        tiles[2] = ImageGrid::filled(3, 4, 0.0).unwrap();
        assert!(stitch(&tiles, &l).is_err());
    }

    #[test]
    fn coverage_exhaustive_small() {
        for fw in 1..=32 {
            for fh in 1..=32 {
                for t in 1..=8usize.min(fw).min(fh) {
                    for o in 0..t {
                        let l = tile_plan(fw, fh, t, o).unwrap();
                        let mut hit = vec![false; fw * fh];
                        for &(r, c) in &l.origins {
                            assert!(r + t <= fh && c + t <= fw);
                            for rr in r..r + t {
                                for cc in c..c + t {
                                    hit[rr * fw + cc] = true;
                                }
                            }
                        }
                        assert!(hit.iter().all(|&h| h), "uncovered pixel for {fw}x{fh} t{t} o{o}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn constant_tiles_stitch_to_constant(
            fw in 4usize..40, fh in 4usize..40, t in 1usize..9, o in 0usize..8, c in 0.0f64..=1.0,
        ) {
            let t = t.min(fw).min(fh);
            let o = o.min(t - 1);
            let l = tile_plan(fw, fh, t, o).unwrap();
            let tiles = vec![ImageGrid::filled(t, t, c).unwrap(); l.origins.len()];
            let out = stitch(&tiles, &l).unwrap();
            for v in out.values() {
                prop_assert!((v - c).abs() <= 1e-9);
            }
        }
    }
}
