//! Simulated tabletop: labelled objects with GP capability bits, the 3×3
//! placement grid, the robot workspace, and ego-view bounding boxes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project, CameraModel, Frame, GeometryError, Point3, RigidTransform};

pub const GRID_CELLS: u8 = 9;
pub const DEFAULT_GRID_PITCH_M: f64 = 0.13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("unknown label `{0}` and no gp override given")]
    UnknownLabel(String),
    #[error("gp=01 is reserved for the table; object `{0}` may not use it")]
    ReservedGp(String),
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("object `{0}` has non-positive extents")]
    BadExtents(String),
    #[error("object `{0}` needs either grid_cell or position")]
    MissingPlacement(String),
    #[error("grid cell {0} out of range 0..9")]
    BadCell(u8),
    #[error("workspace min must be strictly below max on every axis")]
    BadWorkspace,
    #[error("grid pitch must be positive")]
    BadPitch,
    #[error("{needed} movable entities do not fit in {cells} grid cells")]
    TooManyMovable { needed: usize, cells: usize },
    #[error("no object with id `{0}`")]
    NoSuchObject(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Graspable / pourable capability code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GpBits {
    pub graspable: bool,
    pub pourable: bool,
}

impl GpBits {
    /// 00: large container such as a bowl.
    pub const CONTAINER: GpBits = GpBits::new(false, false);
    /// 01: placement surface (the table).
    pub const SURFACE: GpBits = GpBits::new(false, true);
    /// 10: graspable solid such as fruit.
    pub const SOLID: GpBits = GpBits::new(true, false);
    /// 11: graspable pourable container such as a cup.
    pub const POURABLE: GpBits = GpBits::new(true, true);

    pub const ALL: [GpBits; 4] = [Self::CONTAINER, Self::SURFACE, Self::SOLID, Self::POURABLE];

    pub const fn new(graspable: bool, pourable: bool) -> Self {
        Self {
            graspable,
            pourable,
        }
    }

    pub fn code(&self) -> &'static str {
        match (self.graspable, self.pourable) {
            (false, false) => "00",
            (false, true) => "01",
            (true, false) => "10",
            (true, true) => "11",
        }
    }

    pub fn parse(code: &str) -> Option<Self> {
        match code {
            "00" => Some(Self::CONTAINER),
            "01" => Some(Self::SURFACE),
            "10" => Some(Self::SOLID),
            "11" => Some(Self::POURABLE),
            _ => None,
        }
    }

    pub fn is_surface(&self) -> bool {
        *self == Self::SURFACE
    }
}

impl fmt::Display for GpBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for GpBits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for GpBits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        GpBits::parse(&s).ok_or_else(|| serde::de::Error::custom("gp must be one of 00, 01, 10, 11"))
    }
}

/// Taxonomy lookup for the supported labels.
pub fn gp_for_label(label: &str) -> Option<GpBits> {
    match label {
        "apple" | "orange" => Some(GpBits::SOLID),
        "cup" | "bottle" => Some(GpBits::POURABLE),
        "bowl" | "large_container" => Some(GpBits::CONTAINER),
        "table" => Some(GpBits::SURFACE),
        _ => None,
    }
}

/// Default half-extents per label, metres.
pub fn default_extents(label: &str) -> Option<[f64; 3]> {
    match label {
        "cup" => Some([0.04, 0.04, 0.06]),
        "bottle" => Some([0.04, 0.04, 0.10]),
        "bowl" | "large_container" => Some([0.10, 0.10, 0.06]),
        "apple" | "orange" => Some([0.04, 0.04, 0.04]),
        "table" => Some([0.45, 0.50, 0.01]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub label: String,
    pub gp: GpBits,
    /// Centroid in the world frame. Meaningless while `held`.
    pub position: Point3,
    /// Axis-aligned half-sizes, metres.
    pub extents: [f64; 3],
    pub grid_cell: Option<u8>,
    pub held: bool,
    /// Number of completed pours received (containers only).
    pub pour_count: u32,
}

impl SceneObject {
    pub fn extents_vector(&self) -> Vector3<f64> {
        Vector3::from(self.extents)
    }

    /// World-frame corners of the axis-aligned box around the centroid.
    pub fn corners(&self) -> [Point3; 8] {
        let c = self.position.vector();
        let e = self.extents_vector();
        let mut out = [self.position; 8];
        for (i, out) in out.iter_mut().enumerate() {
            let s = Vector3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            );
            *out = Point3::from_vector(c + e.component_mul(&s), Frame::World);
        }
        out
    }

    pub fn contains_xy(&self, p: &Point3) -> bool {
        (p.x - self.position.x).abs() <= self.extents[0] && (p.y - self.position.y).abs() <= self.extents[1]
    }

    pub fn top_z(&self) -> f64 {
        self.position.z + self.extents[2]
    }
}

/// Axis-aligned safe box in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Workspace {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self, SceneError> {
        if (0..3).all(|k| min[k] < max[k]) {
            Ok(Self { min, max })
        } else {
            Err(SceneError::BadWorkspace)
        }
    }

    pub fn centre(&self) -> Point3 {
        Point3::robot(
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
        )
    }
}

/// Closed-box membership test; `p` must be in the robot frame.
pub fn in_workspace(p: &Point3, w: &Workspace) -> Result<bool, SceneError> {
    p.expect_frame(Frame::Robot)?;
    let c = p.coords();
    Ok((0..3).all(|k| w.min[k] <= c[k] && c[k] <= w.max[k]))
}

/// A straight segment stays inside a box iff both ends do (the box is convex).
pub fn segment_in_workspace(a: &Point3, b: &Point3, w: &Workspace) -> Result<bool, SceneError> {
    Ok(in_workspace(a, w)? && in_workspace(b, w)?)
}

/// 3×3 placement grid on the table. `origin` is the centre of cell 0 on the
/// table surface (world frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point3,
    pub pitch_m: f64,
}

impl Grid {
    pub fn cell_centre(&self, cell: u8) -> Result<Point3, SceneError> {
        if cell >= GRID_CELLS {
            return Err(SceneError::BadCell(cell));
        }
        let i = f64::from(cell % 3);
        let j = f64::from(cell / 3);
        Ok(self.origin.offset(Vector3::new(self.pitch_m * i, self.pitch_m * j, 0.0)))
    }

    /// Cell whose square footprint contains the point's (x, y).
    pub fn cell_containing(&self, p: &Point3) -> Option<u8> {
        let half = self.pitch_m / 2.0;
        (0..GRID_CELLS).find(|&c| {
            let centre = self.cell_centre(c).expect("cell in range");
            (p.x - centre.x).abs() <= half && (p.y - centre.y).abs() <= half
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub grid: Grid,
    pub workspace: Workspace,
    /// Grid cell the placement task should drop onto, when one has been drawn.
    pub drop_target_cell: Option<u8>,
}

/// One object entry of a scene document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpBits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_cell: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extents: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub pitch_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Scene document: `objects`, `grid`, `workspace`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub objects: Vec<ObjectSpec>,
    pub grid: GridSpec,
    pub workspace: WorkspaceSpec,
}

impl SceneDocument {
    /// Cup, bowl and table on the default desk layout.
    pub fn default_desk() -> Self {
        SceneDocument {
            objects: alloc::vec![
                ObjectSpec {
                    id: "cup".into(),
                    label: "cup".into(),
                    gp: None,
                    grid_cell: Some(0),
                    position: None,
                    extents: None,
                },
                ObjectSpec {
                    id: "bowl".into(),
                    label: "bowl".into(),
                    gp: None,
                    grid_cell: Some(8),
                    position: None,
                    extents: None,
                },
                ObjectSpec {
                    id: "table".into(),
                    label: "table".into(),
                    gp: None,
                    grid_cell: None,
                    position: Some([0.58, 0.25, 0.19]),
                    extents: None,
                },
            ],
            grid: GridSpec {
                origin: [0.45, 0.12, 0.20],
                pitch_m: DEFAULT_GRID_PITCH_M,
            },
            workspace: WorkspaceSpec {
                min: [0.10, 0.00, 0.15],
                max: [0.90, 0.90, 0.90],
            },
        }
    }
}

/// Validate a scene document and build the scene it describes.
pub fn load_scene(doc: &SceneDocument) -> Result<Scene, SceneError> {
    if !(doc.grid.pitch_m > 0.0 && doc.grid.pitch_m.is_finite()) {
        return Err(SceneError::BadPitch);
    }
    let grid = Grid {
        origin: Point3::world(doc.grid.origin[0], doc.grid.origin[1], doc.grid.origin[2]),
        pitch_m: doc.grid.pitch_m,
    };
    let workspace = Workspace::new(doc.workspace.min, doc.workspace.max)?;
    let mut objects: Vec<SceneObject> = Vec::with_capacity(doc.objects.len());
    for spec in &doc.objects {
        if objects.iter().any(|o| o.id.as_str() == spec.id) {
            return Err(SceneError::DuplicateId(spec.id.clone()));
        }
        let gp = match (spec.gp, gp_for_label(&spec.label)) {
            (Some(gp), _) => gp,
            (None, Some(gp)) => gp,
            (None, None) => return Err(SceneError::UnknownLabel(spec.label.clone())),
        };
        if gp.is_surface() && spec.label != "table" {
            return Err(SceneError::ReservedGp(spec.id.clone()));
        }
        let extents = spec
            .extents
            .or_else(|| default_extents(&spec.label))
            .unwrap_or([0.05, 0.05, 0.05]);
        if !extents.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(SceneError::BadExtents(spec.id.clone()));
        }
        let (position, grid_cell) = match (spec.grid_cell, spec.position) {
            (Some(cell), _) => {
                let c = grid.cell_centre(cell)?;
                (c.offset(Vector3::new(0.0, 0.0, extents[2])), Some(cell))
            }
            (None, Some(p)) => (Point3::world(p[0], p[1], p[2]), None),
            (None, None) => return Err(SceneError::MissingPlacement(spec.id.clone())),
        };
        objects.push(SceneObject {
            id: ObjectId::new(spec.id.clone()),
            label: spec.label.clone(),
            gp,
            position,
            extents,
            grid_cell,
            held: false,
            pour_count: 0,
        });
    }
    Ok(Scene {
        objects,
        grid,
        workspace,
        drop_target_cell: None,
    })
}

impl Scene {
    pub fn object(&self, id: &ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn object_mut(&mut self, id: &ObjectId) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| &o.id == id)
    }

    pub fn find_label(&self, label: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.label == label)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(|o| o.gp.is_surface())
    }

    /// Objects that live on grid cells: everything that is not a surface.
    pub fn movable(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(|o| !o.gp.is_surface())
    }

    pub fn occupied_cells(&self) -> Vec<u8> {
        let mut cells: Vec<u8> = self.objects.iter().filter(|o| !o.held).filter_map(|o| o.grid_cell).collect();
        cells.sort_unstable();
        cells
    }

    /// Put an object down on a grid cell, resting on the table surface.
    pub fn place_on_cell(&mut self, id: &ObjectId, cell: u8) -> Result<(), SceneError> {
        let centre = self.grid.cell_centre(cell)?;
        let obj = self.object_mut(id).ok_or_else(|| SceneError::NoSuchObject(id.to_string()))?;
        obj.position = centre.offset(Vector3::new(0.0, 0.0, obj.extents[2]));
        obj.grid_cell = Some(cell);
        obj.held = false;
        Ok(())
    }

    /// First object hit by a world-frame ray, skipping held objects.
    pub fn raycast(&self, origin: &Point3, dir: Vector3<f64>) -> Option<(f64, &SceneObject)> {
        let o = origin.vector();
        self.objects
            .iter()
            .filter(|obj| !obj.held)
            .filter_map(|obj| ray_box(o, dir, obj.position.vector(), obj.extents_vector()).map(|t| (t, obj)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn ray_box(o: Vector3<f64>, d: Vector3<f64>, c: Vector3<f64>, e: Vector3<f64>) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        let lo = c[k] - e[k];
        let hi = c[k] + e[k];
        if d[k].abs() < 1e-15 {
            if o[k] < lo || o[k] > hi {
                return None;
            }
            continue;
        }
        let t1 = (lo - o[k]) / d[k];
        let t2 = (hi - o[k]) / d[k];
        t_near = t_near.max(t1.min(t2));
        t_far = t_far.min(t1.max(t2));
    }
    if t_far < t_near.max(0.0) {
        return None;
    }
    Some(t_near.max(0.0))
}

/// Assign every movable object and the drop target to distinct grid cells,
/// uniformly at random. Deterministic for a given seed.
pub fn randomize_grid_placement(scene: &Scene, rng_seed: u64) -> Result<Scene, SceneError> {
    let ids: Vec<ObjectId> = scene.movable().map(|o| o.id.clone()).collect();
    let needed = ids.len() + 1;
    if needed > usize::from(GRID_CELLS) {
        return Err(SceneError::TooManyMovable {
            needed,
            cells: usize::from(GRID_CELLS),
        });
    }
    let mut cells: Vec<u8> = (0..GRID_CELLS).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    cells.shuffle(&mut rng);
    let mut out = scene.clone();
    for (id, cell) in ids.iter().zip(cells.iter()) {
        out.place_on_cell(id, *cell)?;
    }
    out.drop_target_cell = Some(cells[ids.len()]);
    Ok(out)
}

/// Axis-aligned pixel rectangle in centre-origin, y-up coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl Rect {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        self.left <= px && px <= self.right && self.bottom <= py && py <= self.top
    }

    pub fn centre(&self) -> (f64, f64) {
        ((self.left + self.right) / 2.0, (self.bottom + self.top) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.top - self.bottom
    }
}

/// Trigger-zone sizing: width = max(frac × bbox width, min_px).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerGeometry {
    pub width_frac: f64,
    pub min_px: f64,
}

impl Default for TriggerGeometry {
    fn default() -> Self {
        Self {
            width_frac: 0.25,
            min_px: 40.0,
        }
    }
}

/// Ego-view bounding box of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoBBox {
    pub object_id: ObjectId,
    pub gp: GpBits,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    /// Intent zone abutting the right edge. Surfaces carry none: their whole
    /// visible area is the placement zone.
    pub trigger_region: Option<Rect>,
    /// Range from the camera to the object centroid, metres.
    pub depth_m: f64,
}

impl EgoBBox {
    pub fn rect(&self) -> Rect {
        Rect {
            left: self.left,
            right: self.right,
            bottom: self.bottom,
            top: self.top,
        }
    }

    pub fn centre(&self) -> (f64, f64) {
        self.rect().centre()
    }
}

const NEAR_PLANE_M: f64 = 1e-3;

/// Project every visible, non-held object to a clipped bounding box with its
/// trigger zone. Objects entirely behind the camera or outside the image are omitted.
pub fn project_bboxes(
    scene: &Scene,
    head_pose: &RigidTransform,
    cam: &CameraModel,
    trigger: &TriggerGeometry,
) -> Result<Vec<EgoBBox>, SceneError> {
    let world_to_camera = head_pose.inverse();
    let mut out = Vec::new();
    for obj in scene.objects.iter().filter(|o| !o.held) {
        let mut cam_corners = [Vector3::zeros(); 8];
        for (dst, c) in cam_corners.iter_mut().zip(obj.corners().iter()) {
            *dst = world_to_camera.apply(c)?.vector();
        }
        let Some(hull) = clipped_hull(&cam_corners, cam)? else {
            continue;
        };
        let hw = cam.half_width();
        let hh = cam.half_height();
        let rect = Rect {
            left: hull.left.max(-hw),
            right: hull.right.min(hw),
            bottom: hull.bottom.max(-hh),
            top: hull.top.min(hh),
        };
        if rect.left >= rect.right || rect.bottom >= rect.top {
            continue;
        }
        let trigger_region = if obj.gp.is_surface() {
            None
        } else {
            let w = (trigger.width_frac * rect.width()).max(trigger.min_px);
            Some(Rect {
                left: rect.right,
                right: rect.right + w,
                bottom: rect.bottom,
                top: rect.top,
            })
        };
        let depth_m = world_to_camera.apply(&obj.position)?.norm();
        out.push(EgoBBox {
            object_id: obj.id.clone(),
            gp: obj.gp,
            left: rect.left,
            right: rect.right,
            top: rect.top,
            bottom: rect.bottom,
            trigger_region,
            depth_m,
        });
    }
    Ok(out)
}

const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Pixel hull of a camera-frame box, clipping edges against the near plane.
fn clipped_hull(corners: &[Vector3<f64>; 8], cam: &CameraModel) -> Result<Option<Rect>, SceneError> {
    let mut pts: Vec<Vector3<f64>> = corners.iter().copied().filter(|c| c.z >= NEAR_PLANE_M).collect();
    if pts.len() < 8 {
        for (a, b) in BOX_EDGES {
            let (pa, pb) = (corners[a], corners[b]);
            if (pa.z - NEAR_PLANE_M) * (pb.z - NEAR_PLANE_M) < 0.0 {
                let t = (NEAR_PLANE_M - pa.z) / (pb.z - pa.z);
                pts.push(pa + (pb - pa) * t);
            }
        }
    }
    if pts.is_empty() {
        return Ok(None);
    }
    let mut r = Rect {
        left: f64::INFINITY,
        right: f64::NEG_INFINITY,
        bottom: f64::INFINITY,
        top: f64::NEG_INFINITY,
    };
    for p in pts {
        let pix = project(&Point3::from_vector(p, Frame::Camera), cam)?.expect("in front of near plane");
        r.left = r.left.min(pix.px);
        r.right = r.right.max(pix.px);
        r.bottom = r.bottom.min(pix.py);
        r.top = r.top.max(pix.py);
    }
    Ok(Some(r))
}
