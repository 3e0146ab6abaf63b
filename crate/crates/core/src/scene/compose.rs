use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::render::{render_depth, DepthMap, MaskImage, RenderItem};
use super::shapes::box_mesh;
use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::{sample_view, CameraIntrinsics, RigidTransform, SampledView, Vec3, ViewSampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    None,
    /// A square floor under the object.
    GroundPlane,
    /// A closed cube room whose floor touches the object's base.
    BoxRoom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub background: Background,
    pub view: ViewSampling,
    pub intrinsics: CameraIntrinsics,
    /// Metric size of the normalized object: `[-1, 1]³` becomes
    /// `[-s, s]³`. Camera distance and room size are metric.
    pub object_scale: f64,
    pub room_side: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            background: Background::BoxRoom,
            view: ViewSampling::default(),
            intrinsics: CameraIntrinsics::default(),
            object_scale: 0.1,
            room_side: 4.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        self.view.validate()?;
        self.intrinsics.validate()?;
        if !(self.object_scale > 0.0 && self.object_scale.is_finite()) {
            return Err(Error::invalid("object scale must be positive"));
        }
        if !(self.room_side > 0.0 && self.room_side.is_finite()) {
            return Err(Error::invalid("room side must be positive"));
        }
        Ok(())
    }
}

/// Everything needed to render one sample.
#[derive(Debug, Clone)]
pub struct ComposedScene {
    /// The object normalized into `[-1, 1]³`.
    pub object: TriangleMesh,
    pub object_scale: f64,
    /// Background geometry in metric world coordinates.
    pub background: Option<TriangleMesh>,
    pub view: SampledView,
    pub intrinsics: CameraIntrinsics,
    /// Normalized object coordinates to camera coordinates expressed in
    /// object units (metric divided by `object_scale`).
    pub gt_pose: RigidTransform,
}

/// The unit of synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub depth: DepthMap,
    pub mask: MaskImage,
    pub intrinsics: CameraIntrinsics,
    pub gt_pose: RigidTransform,
    pub object_id: String,
    /// Object pixels over all pixels with valid depth.
    pub inlier_rate: f64,
    pub object_scale: f64,
}

/// Normalizes `object`, places it at the origin, adds the background and
/// samples a camera.
pub fn compose_scene(object: &TriangleMesh, params: &SceneParams, seed: u64) -> Result<ComposedScene> {
    params.validate()?;
    let (object, _) = object.normalized()?;
    let s = params.object_scale;
    let floor = object.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min) * s;
    let half = params.room_side / 2.0;
    let background = match params.background {
        Background::None => None,
        Background::GroundPlane => {
            let v = vec![
                Vec3::new(-half, -half, floor),
                Vec3::new(half, -half, floor),
                Vec3::new(half, half, floor),
                Vec3::new(-half, half, floor),
            ];
            Some(TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]])?)
        }
        Background::BoxRoom => {
            Some(box_mesh(Vec3::new(-half, -half, floor), Vec3::new(half, half, floor + params.room_side)))
        }
    };
    let view = sample_view(&params.view, seed)?;
    let cam = view.pose.world_to_camera;
    let gt_pose = RigidTransform::new(cam.rotation, cam.translation / s);
    Ok(ComposedScene { object, object_scale: s, background, view, intrinsics: params.intrinsics, gt_pose })
}

impl ComposedScene {
    /// The object in metric world coordinates.
    pub fn world_object(&self) -> TriangleMesh {
        self.object.scaled(self.object_scale)
    }

    pub fn render(&self) -> Result<(DepthMap, MaskImage)> {
        let object = self.world_object();
        let mut items: Vec<RenderItem<'_>> =
            vec![RenderItem { mesh: &object, mesh_to_world: RigidTransform::identity(), is_object: true }];
        if let Some(bg) = &self.background {
            items.push(RenderItem { mesh: bg, mesh_to_world: RigidTransform::identity(), is_object: false });
        }
        render_depth(&items, &self.view.pose, &self.intrinsics)
    }

    pub fn sample(&self, object_id: &str) -> Result<SceneSample> {
        let (depth, mask) = self.render()?;
        let valid = depth.valid_count();
        let hits = depth.depth.iter().zip(&mask.data).filter(|(d, m)| **m && **d > 0.0).count();
        let inlier_rate = if valid == 0 { 0.0 } else { hits as f64 / valid as f64 };
        Ok(SceneSample {
            depth,
            mask,
            intrinsics: self.intrinsics,
            gt_pose: self.gt_pose,
            object_id: String::from(object_id),
            inlier_rate,
            object_scale: self.object_scale,
        })
    }
}
