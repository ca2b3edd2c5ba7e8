//! Gaze stream to (object, part, intent): bbox classification plus the
//! consecutive-sample dwell trigger.

use alloc::vec::Vec;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{gaze_to_robot_frame, CameraModel, Frame, GazePixel, GeometryError, Point3, RigidTransform};
use crate::scene::{project_bboxes, EgoBBox, GpBits, ObjectId, Scene, SceneError, TriggerGeometry};

pub const DEFAULT_DWELL_COUNT: u32 = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntentError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("dwell count must be at least 1")]
    ZeroDwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Body,
    Trigger,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub object_id: Option<ObjectId>,
    pub gp: Option<GpBits>,
    pub region: Region,
}

impl Classification {
    pub fn none() -> Self {
        Self {
            object_id: None,
            gp: None,
            region: Region::None,
        }
    }

    fn hit(b: &EgoBBox, region: Region) -> Self {
        Self {
            object_id: Some(b.object_id.clone()),
            gp: Some(b.gp),
            region,
        }
    }
}

fn nearest<'a>(px: f64, py: f64, candidates: impl Iterator<Item = &'a EgoBBox>) -> Option<&'a EgoBBox> {
    let d2 = |b: &EgoBBox| {
        let (cx, cy) = b.centre();
        (cx - px) * (cx - px) + (cy - py) * (cy - py)
    };
    // min_by keeps the first of equal elements, so list order breaks exact ties
    candidates.min_by(|a, b| d2(a).total_cmp(&d2(b)))
}

/// Which object and which part of it the pixel falls on.
///
/// Priority: object trigger zones, then object bodies, then surfaces. A
/// surface's whole visible area is its placement zone and reports as
/// `Trigger`. Overlaps go to the bbox whose centre pixel is nearest.
pub fn classify_gaze(pixel: &GazePixel, bboxes: &[EgoBBox]) -> Classification {
    let (px, py) = (pixel.px, pixel.py);
    let objects = || bboxes.iter().filter(|b| !b.gp.is_surface());
    if let Some(b) = nearest(
        px,
        py,
        objects().filter(|b| b.trigger_region.is_some_and(|r| r.contains(px, py))),
    ) {
        return Classification::hit(b, Region::Trigger);
    }
    if let Some(b) = nearest(px, py, objects().filter(|b| b.rect().contains(px, py))) {
        return Classification::hit(b, Region::Body);
    }
    if let Some(b) = nearest(
        px,
        py,
        bboxes.iter().filter(|b| b.gp.is_surface() && b.rect().contains(px, py)),
    ) {
        return Classification::hit(b, Region::Trigger);
    }
    Classification::none()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellConfig {
    pub count: u32,
    /// Report the mean of the triggering samples' gaze points instead of the last one.
    pub average_gaze: bool,
}

impl Default for DwellConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_DWELL_COUNT,
            average_gaze: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellState {
    pub object: Option<ObjectId>,
    pub count: u32,
    /// False after firing until the gaze leaves the trigger zone.
    pub armed: bool,
    gaze_sum: [f64; 3],
    gaze_n: u32,
}

impl Default for DwellState {
    fn default() -> Self {
        Self {
            object: None,
            count: 0,
            armed: true,
            gaze_sum: [0.0; 3],
            gaze_n: 0,
        }
    }
}

impl DwellState {
    fn mean_gaze(&self) -> Option<Point3> {
        (self.gaze_n > 0).then(|| {
            let n = f64::from(self.gaze_n);
            Point3::robot(self.gaze_sum[0] / n, self.gaze_sum[1] / n, self.gaze_sum[2] / n)
        })
    }
}

/// Advance the dwell counter by one classified sample. Returns the new state,
/// whether intent fired, and the count reached on this sample.
pub fn update_dwell(state: &DwellState, c: &Classification, cfg: &DwellConfig) -> (DwellState, bool, u32) {
    let mut next = state.clone();
    match (&c.region, &c.object_id) {
        (Region::Trigger, Some(id)) if state.object.as_ref() == Some(id) => {
            if state.armed {
                next.count += 1;
            }
        }
        (Region::Trigger, Some(id)) => {
            next.object = Some(id.clone());
            next.count = 1;
            next.armed = true;
            next.gaze_sum = [0.0; 3];
            next.gaze_n = 0;
        }
        _ => {
            next = DwellState::default();
        }
    }
    let reached = next.count;
    let fired = next.armed && reached >= cfg.count.max(1);
    if fired {
        next.count = 0;
        next.armed = false;
    }
    (next, fired, reached)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    pub pixel: GazePixel,
    /// Camera to world.
    pub head_pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeReading {
    pub t: f64,
    pub pixel: GazePixel,
    pub object_id: Option<ObjectId>,
    pub gp: Option<GpBits>,
    pub region: Region,
    pub on_trigger_region: bool,
    pub dwell_count: u32,
    pub intent: bool,
    /// Absent for samples without a usable depth reading.
    pub gaze_point_robot: Option<Point3>,
    /// Target point carried by an intent: the dwell mean or the last sample.
    pub intent_point: Option<Point3>,
}

/// One pipeline tick of the decoder: project bboxes, classify, update dwell,
/// and lift the gaze pixel into the robot frame.
#[allow(clippy::too_many_arguments)]
pub fn decode(
    sample: &GazeSample,
    scene: &Scene,
    cam: &CameraModel,
    world_to_robot: &RigidTransform,
    trigger: &TriggerGeometry,
    cfg: &DwellConfig,
    state: &DwellState,
) -> Result<(GazeReading, DwellState), IntentError> {
    if cfg.count == 0 {
        return Err(IntentError::ZeroDwell);
    }
    if !sample.pixel.has_valid_depth() {
        let reading = GazeReading {
            t: sample.t,
            pixel: sample.pixel,
            object_id: None,
            gp: None,
            region: Region::None,
            on_trigger_region: false,
            dwell_count: 0,
            intent: false,
            gaze_point_robot: None,
            intent_point: None,
        };
        return Ok((reading, DwellState::default()));
    }
    let gaze_point = gaze_to_robot_frame(&sample.pixel, cam, &sample.head_pose, world_to_robot)?;
    let bboxes: Vec<EgoBBox> = project_bboxes(scene, &sample.head_pose, cam, trigger)?;
    let class = classify_gaze(&sample.pixel, &bboxes);
    let (mut next, fired, reached) = update_dwell(state, &class, cfg);
    if next.count > 0 || fired {
        let v = gaze_point.vector();
        for k in 0..3 {
            next.gaze_sum[k] += v[k];
        }
        next.gaze_n += 1;
    }
    let intent_point = if fired {
        if cfg.average_gaze {
            next.mean_gaze()
        } else {
            Some(gaze_point)
        }
    } else {
        None
    };
    if fired {
        next.gaze_sum = [0.0; 3];
        next.gaze_n = 0;
    }
    let reading = GazeReading {
        t: sample.t,
        pixel: sample.pixel,
        on_trigger_region: class.region == Region::Trigger,
        object_id: class.object_id,
        gp: class.gp,
        region: class.region,
        dwell_count: reached,
        intent: fired,
        gaze_point_robot: Some(gaze_point),
        intent_point,
    };
    debug_assert!(reading.intent_point.as_ref().is_none_or(|p| p.frame == Frame::Robot));
    Ok((reading, next))
}

/// Mean of robot-frame points; `None` when empty.
pub fn mean_point(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.vector());
    Some(Point3::from_vector(sum / points.len() as f64, points[0].frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Rect;
    use alloc::vec;

    fn bbox(id: &str, gp: GpBits, l: f64, r: f64, b: f64, t: f64) -> EgoBBox {
        let trigger_region = (!gp.is_surface()).then(|| Rect {
            left: r,
            right: r + 40.0_f64.max(0.25 * (r - l)),
            bottom: b,
            top: t,
        });
        EgoBBox {
            object_id: ObjectId::new(id),
            gp,
            left: l,
            right: r,
            top: t,
            bottom: b,
            trigger_region,
            depth_m: 1.0,
        }
    }

    fn px(x: f64, y: f64) -> GazePixel {
        GazePixel::new(x, y, 1.0)
    }

    fn trig(id: &str) -> Classification {
        Classification {
            object_id: Some(ObjectId::new(id)),
            gp: Some(GpBits::POURABLE),
            region: Region::Trigger,
        }
    }

    #[test]
    fn centre_is_body() {
        let b = [bbox("cup", GpBits::POURABLE, -50.0, 50.0, -50.0, 50.0)];
        let c = classify_gaze(&px(0.0, 0.0), &b);
        assert_eq!(c.region, Region::Body);
        assert_eq!(c.object_id, Some(ObjectId::new("cup")));
    }

    #[test]
    fn right_of_edge_is_trigger() {
        let b = [bbox("cup", GpBits::POURABLE, -50.0, 50.0, -50.0, 50.0)];
        let c = classify_gaze(&px(60.0, 0.0), &b);
        assert_eq!(c.region, Region::Trigger);
        assert_eq!(classify_gaze(&px(200.0, 0.0), &b).region, Region::None);
    }

    #[test]
    fn overlap_goes_to_nearest_centre() {
        // centres at x=0 and x=60; pixel at x=40 is nearer the second
        let b = [
            bbox("a", GpBits::SOLID, -50.0, 50.0, -50.0, 50.0),
            bbox("b", GpBits::SOLID, 10.0, 110.0, -50.0, 50.0),
        ];
        assert_eq!(classify_gaze(&px(40.0, 0.0), &b).object_id, Some(ObjectId::new("b")));
        assert_eq!(classify_gaze(&px(20.0, 0.0), &b).object_id, Some(ObjectId::new("a")));
    }

    #[test]
    fn surface_is_lowest_priority_trigger() {
        let b = [
            bbox("table", GpBits::SURFACE, -600.0, 600.0, -300.0, 0.0),
            bbox("cup", GpBits::POURABLE, -50.0, 50.0, -100.0, -20.0),
        ];
        let on_cup = classify_gaze(&px(0.0, -50.0), &b);
        assert_eq!((on_cup.object_id.unwrap().0.as_str(), on_cup.region), ("cup", Region::Body));
        let on_table = classify_gaze(&px(-300.0, -200.0), &b);
        assert_eq!(on_table.object_id, Some(ObjectId::new("table")));
        assert_eq!(on_table.region, Region::Trigger);
    }

    fn run(stream: &[Classification]) -> Vec<bool> {
        let cfg = DwellConfig::default();
        let mut s = DwellState::default();
        stream
            .iter()
            .map(|c| {
                let (n, f, _) = update_dwell(&s, c, &cfg);
                s = n;
                f
            })
            .collect()
    }

    #[test]
    fn fifteen_fires_on_fifteenth() {
        let fired = run(&vec![trig("cup"); 15]);
        assert_eq!(fired.iter().position(|f| *f), Some(14));
        assert_eq!(fired.iter().filter(|f| **f).count(), 1);
    }

    #[test]
    fn broken_run_never_fires() {
        let mut s = vec![trig("cup"); 14];
        s.push(Classification {
            region: Region::Body,
            ..trig("cup")
        });
        s.extend(vec![trig("cup"); 14]);
        assert!(run(&s).iter().all(|f| !f));
    }

    #[test]
    fn thirty_fires_once() {
        let fired = run(&vec![trig("cup"); 30]);
        assert_eq!(fired.iter().filter(|f| **f).count(), 1);
        assert!(fired[14]);
    }

    #[test]
    fn object_switch_restarts_count() {
        let mut s = vec![trig("cup"); 10];
        s.extend(vec![trig("bowl"); 15]);
        let fired = run(&s);
        assert_eq!(fired.iter().position(|f| *f), Some(24));
    }

    #[test]
    fn mean_of_points() {
        let p = [Point3::robot(0.0, 0.0, 0.0), Point3::robot(2.0, 4.0, 6.0)];
        assert_eq!(mean_point(&p), Some(Point3::robot(1.0, 2.0, 3.0)));
        assert_eq!(mean_point(&[]), None);
    }
}
