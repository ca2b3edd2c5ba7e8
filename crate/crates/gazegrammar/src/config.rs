//! JSON configuration file: every field has a default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use gazegrammar_core::fsm::GrammarConfig;
use gazegrammar_core::geometry::{CameraModel, Frame, RigidTransform, WristOffset};
use gazegrammar_core::grasp::GloveThresholds;
use gazegrammar_core::harness::{GazeEvalSetup, NoiseModel};
use gazegrammar_core::intent::DwellConfig;
use gazegrammar_core::pipeline::PipelineConfig;
use gazegrammar_core::robot::{FailureProfile, RobotConfig};
use gazegrammar_core::scene::{load_scene, Scene, SceneDocument, TriggerGeometry};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "GAZE_GRAMMAR_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: at `{key}`: {message}")]
    Schema {
        path: PathBuf,
        key: String,
        message: String,
    },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl ToString) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.to_string(),
        }
    }
}

/// Parse JSON, reporting the key path of the first schema violation.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: path.to_path_buf(),
        key: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub width_px: u32,
    pub height_px: u32,
    pub half_fov_h_deg: f64,
    pub half_fov_v_deg: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            width_px: 1280,
            height_px: 720,
            half_fov_h_deg: 34.5,
            half_fov_v_deg: 21.0,
        }
    }
}

/// A pose either as an explicit rigid motion or as a look-at camera placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Pose {
    Explicit {
        translation: [f64; 3],
        quaternion_wxyz: [f64; 4],
    },
    LookAt {
        position: [f64; 3],
        look_at: [f64; 3],
        up: [f64; 3],
    },
}

impl Pose {
    pub fn to_transform(&self, from: Frame, to: Frame) -> Result<RigidTransform, String> {
        let t = match self {
            Pose::Explicit {
                translation,
                quaternion_wxyz,
            } => RigidTransform::from_quaternion(*quaternion_wxyz, Vector3::from(*translation), from, to),
            Pose::LookAt { position, look_at, up } => {
                RigidTransform::look_at(Vector3::from(*position), Vector3::from(*look_at), Vector3::from(*up), to)
                    .map(|t| t.relabel(from, to))
            }
        };
        t.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformsSection {
    /// Head pose for live sessions and the task protocol.
    pub camera_to_world: Pose,
    pub world_to_robot: Pose,
    /// Head pose for the gaze-accuracy protocol.
    pub gaze_eval_camera_to_world: Pose,
}

impl Default for TransformsSection {
    fn default() -> Self {
        Self {
            camera_to_world: Pose::LookAt {
                position: [0.1, 0.25, 1.2],
                look_at: [0.58, 0.25, 0.2],
                up: [0.0, 0.0, 1.0],
            },
            world_to_robot: Pose::Explicit {
                translation: [-0.1, 0.2, 0.0],
                quaternion_wxyz: [1.0, 0.0, 0.0, 0.0],
            },
            gaze_eval_camera_to_world: Pose::LookAt {
                position: [-0.5, 0.25, 0.8],
                look_at: [0.6, 0.25, 0.43],
                up: [0.0, 0.0, 1.0],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub pixel_sigma_px: f64,
    pub depth_sigma_m: f64,
    pub head_rot_sigma_deg: f64,
    pub head_trans_sigma_m: f64,
    pub vertical_bias_gain: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            pixel_sigma_px: 10.0,
            depth_sigma_m: 0.005,
            head_rot_sigma_deg: 0.2,
            head_trans_sigma_m: 0.002,
            vertical_bias_gain: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DwellSection {
    pub count: u32,
    pub trigger_width_frac: f64,
    pub trigger_min_px: f64,
    pub average_gaze: bool,
}

impl Default for DwellSection {
    fn default() -> Self {
        let t = TriggerGeometry::default();
        let d = DwellConfig::default();
        Self {
            count: d.count,
            trigger_width_frac: t.width_frac,
            trigger_min_px: t.min_px,
            average_gaze: d.average_gaze,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub camera: CameraSection,
    pub transforms: TransformsSection,
    /// Scene document path, relative to the config file. `null` selects the
    /// built-in cup, bowl and table layout.
    pub scene: Option<PathBuf>,
    pub noise: NoiseSection,
    pub glove: GloveThresholds,
    pub failures: FailureProfile,
    pub dwell: DwellSection,
    pub grammar: GrammarConfig,
    pub robot: RobotConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            camera: CameraSection::default(),
            transforms: TransformsSection::default(),
            scene: None,
            noise: NoiseSection::default(),
            glove: GloveThresholds::default(),
            failures: FailureProfile::default(),
            dwell: DwellSection::default(),
            grammar: GrammarConfig::default(),
            robot: RobotConfig {
                wrist_offset: WristOffset::zero(),
                ..RobotConfig::default()
            },
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub pipeline: PipelineConfig,
    pub gaze_eval: GazeEvalSetup,
    pub noise: NoiseModel,
    pub scene_doc: SceneDocument,
    pub scene: Scene,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let mut cfg: Config = parse_json(&read(path)?, path)?;
        if let Some(scene) = cfg.scene.as_mut() {
            if scene.is_relative() {
                if let Some(dir) = path.parent() {
                    *scene = dir.join(&*scene);
                }
            }
        }
        Ok(cfg)
    }

    /// Explicit path first, then the environment variable, then defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Config, ConfigError> {
        match path {
            Some(p) => Config::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Config::load(Path::new(&p)),
                _ => Ok(Config::default()),
            },
        }
    }

    pub fn scene_document(&self) -> Result<SceneDocument, ConfigError> {
        match &self.scene {
            None => Ok(SceneDocument::default_desk()),
            Some(p) => parse_json(&read(p)?, p),
        }
    }

    pub fn camera(&self) -> Result<CameraModel, ConfigError> {
        let c = &self.camera;
        CameraModel::from_degrees(c.width_px, c.height_px, c.half_fov_h_deg, c.half_fov_v_deg)
            .map_err(|e| ConfigError::invalid("camera", e))
    }

    pub fn noise_model(&self) -> NoiseModel {
        let n = &self.noise;
        NoiseModel {
            pixel_sigma_px: n.pixel_sigma_px,
            depth_sigma_m: n.depth_sigma_m,
            head_rot_sigma_rad: n.head_rot_sigma_deg.to_radians(),
            head_trans_sigma_m: n.head_trans_sigma_m,
            vertical_bias_gain: n.vertical_bias_gain,
        }
    }

    pub fn resolve_with_scene(&self, scene_doc: SceneDocument) -> Result<Resolved, ConfigError> {
        let camera = self.camera()?;
        let tr = &self.transforms;
        let head_pose = tr
            .camera_to_world
            .to_transform(Frame::Camera, Frame::World)
            .map_err(|e| ConfigError::invalid("transforms.camera_to_world", e))?;
        let world_to_robot = tr
            .world_to_robot
            .to_transform(Frame::World, Frame::Robot)
            .map_err(|e| ConfigError::invalid("transforms.world_to_robot", e))?;
        let eval_pose = tr
            .gaze_eval_camera_to_world
            .to_transform(Frame::Camera, Frame::World)
            .map_err(|e| ConfigError::invalid("transforms.gaze_eval_camera_to_world", e))?;
        let d = &self.dwell;
        if d.count == 0 {
            return Err(ConfigError::invalid("dwell.count", "must be at least 1"));
        }
        if !(d.trigger_width_frac >= 0.0 && d.trigger_min_px >= 0.0) {
            return Err(ConfigError::invalid("dwell", "trigger sizes must be non-negative"));
        }
        let g = &self.glove;
        if !(g.tension_closed_n > 0.0 && g.force_held_n > 0.0 && g.noise_sigma_n >= 0.0) {
            return Err(ConfigError::invalid("glove", "thresholds must be positive"));
        }
        self.failures.validate().map_err(|e| ConfigError::invalid("failures", e))?;
        self.robot.validate().map_err(|e| ConfigError::invalid("robot", e))?;
        let noise = self.noise_model();
        noise.validate().map_err(|e| ConfigError::invalid("noise", e))?;
        let scene = load_scene(&scene_doc).map_err(|e| ConfigError::invalid("scene", e))?;
        let pipeline = PipelineConfig {
            camera,
            head_pose,
            world_to_robot,
            trigger: TriggerGeometry {
                width_frac: d.trigger_width_frac,
                min_px: d.trigger_min_px,
            },
            dwell: DwellConfig {
                count: d.count,
                average_gaze: d.average_gaze,
            },
            glove: self.glove,
            grammar: self.grammar,
            robot: self.robot,
            failures: self.failures,
            time_scale: 1.0,
        };
        Ok(Resolved {
            pipeline,
            gaze_eval: GazeEvalSetup {
                camera,
                head_pose: eval_pose,
                world_to_robot,
            },
            noise,
            scene_doc,
            scene,
        })
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        self.resolve_with_scene(self.scene_document()?)
    }
}
