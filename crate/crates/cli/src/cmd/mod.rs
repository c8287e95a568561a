pub mod cluster_fit;
pub mod eval_match;
pub mod eval_probe;
pub mod info;
pub mod segment;

use std::path::Path;

use anyhow::{Context, Result};
use fseg_core::clustering::ClusterModel;
use fseg_core::tensor_io::Palette;

use crate::PaletteArgs;

pub(crate) fn load_model(prefix: &Path) -> Result<ClusterModel> {
    ClusterModel::load(prefix).with_context(|| format!("loading cluster model {}", prefix.display()))
}

pub(crate) fn load_palette(args: &PaletteArgs) -> Result<Palette> {
    Palette::from_file(&args.palette, args.strict_palette)
        .with_context(|| format!("loading palette {}", args.palette.display()))
}
