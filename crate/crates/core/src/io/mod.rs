//! File formats: binary PLY point clouds, GPFF feature sidecars, PFM
//! depth maps, camera JSON, PNG images and GPFP parameter files.

pub mod cameras;
pub mod gpff;
pub mod params;
pub mod pfm;
pub mod ply;
pub mod png;
