//! Interchange formats: COLMAP text models, PLY clouds and FDG1 depth grids.

mod colmap;
mod depth_grid;
mod ply;

pub use colmap::{read_colmap_text, write_colmap_text, ColmapError, ImageRecord, SparseModel};
pub use depth_grid::{decode_depth_grid, encode_depth_grid, read_depth_grid, write_depth_grid, DepthGrid, DepthGridError};
pub use ply::{
    read_gaussians_ply, read_ply, read_ply_bytes, write_gaussians_ply, write_ply, write_ply_bytes, PlyEncoding, PlyError,
};
