//! File formats. Every writer is deterministic: same value, same bytes.

mod binary;
mod cloud;
mod image;

use std::path::Path;

use occlureg_core::registration::RegistrationResult;
use occlureg_core::scene::{parse_mesh, MeshFormat, TriangleMesh};
use occlureg_core::{CameraIntrinsics, RigidTransform};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use binary::{
    format_gradcheck_csv, header_path, parse_gradcheck_csv, read_descriptors, read_matrix, write_descriptors,
    write_matrix, DescriptorHeader, MatrixHeader,
};
pub use cloud::{format_ply, format_xyz, parse_ply, parse_xyz, read_cloud, write_cloud};
pub use image::{
    decode_depth_png, decode_depth_raw, decode_mask_png, decode_pbm, encode_depth_png, encode_depth_raw,
    encode_mask_png, encode_pbm, read_depth, read_mask, write_depth, write_mask, DEFAULT_DEPTH_SCALE, DEPTH_SCALE_KEY,
};

use crate::error::{Error, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Creates missing parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_pretty(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// OFF or OBJ by extension. Errors carry the path.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let format = match cloud::extension(path).as_str() {
        "off" => MeshFormat::Off,
        "obj" => MeshFormat::Obj,
        other => {
            return Err(Error::MeshLoad {
                path: path.to_path_buf(),
                source: occlureg_core::Error::Parse { line: 0, message: format!("unknown mesh extension {other:?}") },
            })
        }
    };
    let text = read_text(path)?;
    parse_mesh(&text, format).map_err(|source| Error::MeshLoad { path: path.to_path_buf(), source })
}

pub const SIDECAR_SCHEMA: u32 = 1;

/// Metadata written next to every rendered depth map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: u32,
    pub intrinsics: CameraIntrinsics,
    /// Object (normalized coordinates) to camera, with the translation in
    /// normalized units. Row-major 4×4.
    pub gt_pose: RigidTransform,
    pub object_id: String,
    pub inlier_rate: f64,
    /// Metric size of one normalized unit; camera-frame depth divided by it
    /// gives points in the frame of `gt_pose`.
    pub object_scale: f64,
    /// Stored units per metre for PNG depth; absent for raw depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_scale: Option<f64>,
}

impl Sidecar {
    pub fn read(path: &Path) -> Result<Self> {
        let s: Sidecar = read_json(path)?;
        if s.schema != SIDECAR_SCHEMA {
            return Err(Error::format(path, format!("unsupported sidecar schema {}", s.schema)));
        }
        s.intrinsics.validate()?;
        Ok(s)
    }
}

/// Accepts a full sidecar or bare intrinsics. Returns the sidecar when
/// there is one.
pub fn read_intrinsics(path: &Path) -> Result<(CameraIntrinsics, Option<Sidecar>)> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("intrinsics").is_some() {
        let s = Sidecar::read(path)?;
        return Ok((s.intrinsics, Some(s)));
    }
    let intr: CameraIntrinsics = serde_json::from_value(value).map_err(|e| Error::format(path, e.to_string()))?;
    intr.validate()?;
    Ok((intr, None))
}

/// Registration result as JSON; the correspondence list is dropped unless
/// asked for.
pub fn result_json(result: &RegistrationResult, with_correspondences: bool) -> Result<String> {
    let mut value = serde_json::to_value(result)?;
    if !with_correspondences {
        value.as_object_mut().expect("struct serializes to an object").remove("correspondences");
    }
    to_json_pretty(&value)
}
