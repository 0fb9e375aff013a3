use super::{ModelParams, NetError, Tensor};
use crate::imgcore::{denormalize, histogram_equalize, normalize, stitch, tile_plan, FieldOfView, ImageGrid};

/// Tiles evaluated per forward pass.
const TILE_BATCH: usize = 16;

/// Inference-mode generator output for a normalized input batch.
pub fn predict_patch(params: &ModelParams, input: &Tensor) -> Result<Tensor, NetError> {
    params.generator_net()?.infer(&params.generator, input)
}

/// Full-FOV prediction: normalize, tile, infer each tile, denormalize and
/// alpha-blend the tiles back together.
pub fn predict_fov(params: &ModelParams, fov: &FieldOfView, tile_side: usize, overlap: usize) -> Result<ImageGrid, NetError> {
    let names = &params.input_channels;
    let missing = names.iter().any(|n| fov.get(n).is_none());
    if missing || fov.is_empty() {
        return Err(NetError::ChannelMismatch {
            expected: names.len(),
            actual: fov.names().filter(|n| names.iter().any(|m| m == n)).count(),
            names: names.clone(),
        });
    }
    let generator = params.generator_net()?;
    params.generator_config.check_side(tile_side, tile_side)?;
    let layout = tile_plan(fov.width(), fov.height(), tile_side, overlap)?;
    let channels: Vec<ImageGrid> = names
        .iter()
        .map(|n| {
            let img = fov.get(n).expect("checked above");
            if params.equalize_inputs {
                histogram_equalize(img)
            } else {
                img.clone()
            }
        })
        .collect();
    let mut tiles = Vec::with_capacity(layout.origins.len());
    for chunk in layout.origins.chunks(TILE_BATCH) {
        let mut items = Vec::with_capacity(chunk.len());
        for &(row, col) in chunk {
            let mut item = Vec::with_capacity(names.len() * tile_side * tile_side);
            for img in &channels {
                item.extend(normalize(&img.crop(row, col, tile_side, tile_side)?));
            }
            items.push(item);
        }
        let x = Tensor::stack(&items, names.len(), tile_side, tile_side)?;
        let y = generator.infer(&params.generator, &x)?;
        for i in 0..y.batch() {
            tiles.push(denormalize(tile_side, tile_side, y.item(i))?);
        }
    }
    Ok(stitch(&tiles, &layout)?)
}
