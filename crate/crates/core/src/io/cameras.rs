//! Camera file: a JSON array of {"K": 9 row-major floats, "w2c": 16
//! row-major floats, "width", "height", "image": relative path}.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::img::Plane;
use crate::math::{Mat3, Mat4};
use crate::scene::CameraView;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub w2c: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub image: String,
}

pub fn write_cameras(path: &Path, records: &[CameraRecord]) -> Result<()> {
    let json = serde_json::to_string_pretty(records)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraRecord>> {
    let text = std::fs::read_to_string(path)?;
    let records: Vec<CameraRecord> = serde_json::from_str(&text)?;
    for (i, r) in records.iter().enumerate() {
        if r.k.len() != 9 {
            return Err(Error::invalid(format!("camera {i}: K must have 9 entries")));
        }
        if r.w2c.len() != 16 {
            return Err(Error::invalid(format!("camera {i}: w2c must have 16 entries")));
        }
    }
    Ok(records)
}

pub fn record_to_matrices(r: &CameraRecord) -> (Mat3, Mat4) {
    let mut k = Mat3::zeros();
    for row in 0..3 {
        for col in 0..3 {
            k[(row, col)] = r.k[row * 3 + col];
        }
    }
    let mut w2c = Mat4::zeros();
    for row in 0..4 {
        for col in 0..4 {
            w2c[(row, col)] = r.w2c[row * 4 + col];
        }
    }
    (k, w2c)
}

pub fn record_from_view(view: &CameraView, image_rel: &str) -> CameraRecord {
    let mut k = Vec::with_capacity(9);
    for row in 0..3 {
        for col in 0..3 {
            k.push(view.intrinsics[(row, col)]);
        }
    }
    let mut w2c = Vec::with_capacity(16);
    for row in 0..4 {
        for col in 0..4 {
            w2c.push(view.world_to_cam[(row, col)]);
        }
    }
    CameraRecord { k, w2c, width: view.width, height: view.height, image: image_rel.to_string() }
}

/// Loads views from a camera file, reading each record's image relative
/// to the camera file's directory.
pub fn load_views(cams_path: &Path) -> Result<Vec<CameraView>> {
    let records = read_cameras(cams_path)?;
    let base: PathBuf = cams_path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    let mut views = Vec::with_capacity(records.len());
    for r in &records {
        let (k, w2c) = record_to_matrices(r);
        let img_path = base.join(&r.image);
        let image = super::png::read_png(&img_path)?;
        if image.width != r.width || image.height != r.height {
            return Err(Error::invalid(format!(
                "image {} is {}x{}, camera record says {}x{}",
                img_path.display(),
                image.width,
                image.height,
                r.width,
                r.height
            )));
        }
        views.push(CameraView::new(k, w2c, image)?);
    }
    Ok(views)
}

/// Loads views given an explicit images directory (record paths are
/// resolved against it instead of the camera file's directory).
pub fn load_views_with_images(cams_path: &Path, images_dir: &Path) -> Result<Vec<CameraView>> {
    let records = read_cameras(cams_path)?;
    let mut views = Vec::with_capacity(records.len());
    for r in &records {
        let (k, w2c) = record_to_matrices(r);
        let name = Path::new(&r.image)
            .file_name()
            .ok_or_else(|| Error::invalid(format!("bad image path '{}'", r.image)))?;
        let image = super::png::read_png(&images_dir.join(name))?;
        views.push(CameraView::new(k, w2c, image)?);
    }
    Ok(views)
}

#[allow(dead_code)]
fn unused_plane_marker(_: &Plane) {}
