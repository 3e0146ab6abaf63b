//! Synthetic scenes: mesh loading and sampling, procedural objects, a
//! ray-cast depth renderer, backprojection and mask perturbation.

mod compose;
mod mask;
mod mesh;
mod render;
pub mod shapes;

pub use compose::{compose_scene, Background, ComposedScene, SceneParams, SceneSample};
pub use mask::{boundary, dilate3, erode3, perturb_mask, MaskPerturbation};
pub use mesh::{
    distance_to_surface, parse_mesh, parse_obj, parse_off, point_triangle_dist2, sample_surface, MeshFormat,
    TriangleMesh,
};
pub use render::{backproject, backproject_pixels, render_depth, visible_subset, DepthMap, MaskImage, RenderItem};
