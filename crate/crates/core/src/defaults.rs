//! Built-in desk layout: head poses, frames and the default pipeline config.

use nalgebra::Vector3;

use crate::fsm::GrammarConfig;
use crate::geometry::{CameraModel, Frame, RigidTransform};
use crate::grasp::GloveThresholds;
use crate::harness::GazeEvalSetup;
use crate::intent::DwellConfig;
use crate::pipeline::PipelineConfig;
use crate::robot::{FailureProfile, RobotConfig};
use crate::scene::TriggerGeometry;

/// Robot base sits at world (0.1, -0.2, 0).
pub fn world_to_robot() -> RigidTransform {
    RigidTransform::translation(Vector3::new(-0.1, 0.2, 0.0), Frame::World, Frame::Robot)
}

/// Head pose for the task protocol: high and steep so the grid cells and
/// trigger zones stay unoccluded for every placement.
pub fn task_head_pose() -> RigidTransform {
    RigidTransform::look_at(
        Vector3::new(0.1, 0.25, 1.2),
        Vector3::new(0.58, 0.25, 0.2),
        Vector3::z(),
        Frame::World,
    )
    .expect("valid default pose")
}

/// Head pose for the accuracy protocol: behind the robot base looking across
/// the target box, which then fits inside the image.
pub fn gaze_eval_head_pose() -> RigidTransform {
    RigidTransform::look_at(
        Vector3::new(-0.5, 0.25, 0.8),
        Vector3::new(0.6, 0.25, 0.43),
        Vector3::z(),
        Frame::World,
    )
    .expect("valid default pose")
}

pub fn pipeline_config() -> PipelineConfig {
    PipelineConfig {
        camera: CameraModel::default(),
        head_pose: task_head_pose(),
        world_to_robot: world_to_robot(),
        trigger: TriggerGeometry::default(),
        dwell: DwellConfig::default(),
        glove: GloveThresholds::default(),
        grammar: GrammarConfig::default(),
        robot: RobotConfig::default(),
        failures: FailureProfile::default(),
        time_scale: 1.0,
    }
}

pub fn gaze_eval_setup() -> GazeEvalSetup {
    GazeEvalSetup {
        camera: CameraModel::default(),
        head_pose: gaze_eval_head_pose(),
        world_to_robot: world_to_robot(),
    }
}
