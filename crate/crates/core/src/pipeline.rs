//! Single-writer pipeline: gaze sample in, ordered session events out.
//! decode → grip assessment → FSM step → robot execution, all in simulated time.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{grammar_check, plan_reach, step, FsmState, GrammarConfig, RobotAction, TransitionInput};
use crate::geometry::{
    calibrate_wrist_offset, gaze_to_robot_frame, CameraModel, GazePixel, GeometryError, Point3, RigidTransform,
    WristOffset,
};
use crate::grasp::{assess, GraspError, GripAssessment, GloveThresholds};
use crate::intent::{decode, DwellConfig, DwellState, GazeReading, GazeSample, IntentError, Region};
use crate::robot::{
    execute, telemetry, FailureProfile, Outcome, RobotConfig, RobotContext, RobotError, RobotState,
};
use crate::scene::{
    in_workspace, project_bboxes, randomize_grid_placement, EgoBBox, ObjectId, Scene, SceneError, TriggerGeometry,
};

/// Telemetry noise stream is decorrelated from the failure stream by this salt.
const TELEMETRY_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("timestamp {t} does not increase on previous {last}")]
    NonIncreasingTimestamp { t: f64, last: f64 },
    #[error("timestamp {0} is not finite")]
    BadTimestamp(f64),
    #[error("cannot randomize the grid while the robot holds an object")]
    HoldingDuringRandomize,
    #[error("calibrate_wrist needs exactly one of palm_pixel or palm_point_robot")]
    BadCalibration,
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::NonIncreasingTimestamp { .. } => "non_increasing_timestamp",
            PipelineError::BadTimestamp(_) => "bad_timestamp",
            PipelineError::HoldingDuringRandomize => "holding_during_randomize",
            PipelineError::BadCalibration => "bad_calibration",
            PipelineError::Intent(_) | PipelineError::Geometry(_) => "geometry",
            PipelineError::Robot(_) => "robot",
            PipelineError::Scene(_) => "scene",
            PipelineError::Grasp(_) => "telemetry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub camera: CameraModel,
    /// Default head pose (camera → world) until the first sample supplies one.
    pub head_pose: RigidTransform,
    pub world_to_robot: RigidTransform,
    pub trigger: TriggerGeometry,
    pub dwell: DwellConfig,
    pub glove: GloveThresholds,
    pub grammar: GrammarConfig,
    pub robot: RobotConfig,
    pub failures: FailureProfile,
    /// Simulated seconds of robot busy time per second of action duration.
    /// Zero collapses every action to an instant.
    pub time_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub scene: Scene,
    pub bboxes: Vec<EgoBBox>,
    pub head_pose: RigidTransform,
    pub camera: CameraModel,
    pub fsm_state: FsmState,
    pub robot: RobotState,
    pub wrist_offset: WristOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellProgress {
    pub object_id: Option<ObjectId>,
    pub count: u32,
    pub required: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub t: f64,
    pub state_before: FsmState,
    pub input: TransitionInput,
    pub state_after: FsmState,
    pub actions: Vec<RobotAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStarted {
    pub index: usize,
    pub action: RobotAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFinished {
    pub index: usize,
    pub action: RobotAction,
    pub outcome: Outcome,
    pub duration_s: f64,
    pub robot: RobotState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub action: String,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: String,
    pub repeat: u32,
    pub per_action_success: Vec<ActionResult>,
    pub full_success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SceneSnapshot(SceneSnapshot),
    GazeReading(GazeReading),
    DwellProgress(DwellProgress),
    FsmTransition(TransitionRecord),
    RobotActionStarted(ActionStarted),
    RobotActionFinished(ActionFinished),
    TaskResult(TaskResult),
    Error(ErrorInfo),
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::SceneSnapshot(_) => "scene_snapshot",
            EventBody::GazeReading(_) => "gaze_reading",
            EventBody::DwellProgress(_) => "dwell_progress",
            EventBody::FsmTransition(_) => "fsm_transition",
            EventBody::RobotActionStarted(_) => "robot_action_started",
            EventBody::RobotActionFinished(_) => "robot_action_finished",
            EventBody::TaskResult(_) => "task_result",
            EventBody::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub t_sim: f64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Reset,
    SetFailureProfile {
        p_grasp_fail: f64,
        p_drop_during_pour: f64,
        seed: u64,
    },
    RandomizeGrid {
        seed: u64,
    },
    CalibrateWrist {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        palm_pixel: Option<GazePixel>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        palm_point_robot: Option<Point3>,
    },
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    initial_scene: Scene,
    scene: Scene,
    fsm: FsmState,
    robot: RobotState,
    dwell: DwellState,
    head_pose: RigidTransform,
    failure_rng: ChaCha8Rng,
    telemetry_rng: ChaCha8Rng,
    last_t: Option<f64>,
    busy_until: f64,
    pending_intent: Option<GazeReading>,
    seq: u64,
}

impl Pipeline {
    pub fn new(scene: Scene, cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.failures.validate()?;
        cfg.robot.validate()?;
        if cfg.dwell.count == 0 {
            return Err(IntentError::ZeroDwell.into());
        }
        let robot = RobotState::at_home(&cfg.robot);
        Ok(Self {
            failure_rng: ChaCha8Rng::seed_from_u64(cfg.failures.seed),
            telemetry_rng: ChaCha8Rng::seed_from_u64(cfg.failures.seed ^ TELEMETRY_SEED_SALT),
            head_pose: cfg.head_pose,
            initial_scene: scene.clone(),
            scene,
            fsm: FsmState::S001,
            robot,
            dwell: DwellState::default(),
            last_t: None,
            busy_until: f64::NEG_INFINITY,
            pending_intent: None,
            seq: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn fsm_state(&self) -> FsmState {
        self.fsm
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn dwell(&self) -> &DwellState {
        &self.dwell
    }

    pub fn last_t(&self) -> Option<f64> {
        self.last_t
    }

    pub fn is_busy_at(&self, t: f64) -> bool {
        t < self.busy_until
    }

    pub fn next_seq(&self) -> u64 {
        self.seq
    }

    fn t_now(&self) -> f64 {
        self.last_t.unwrap_or(0.0)
    }

    fn emit(&mut self, out: &mut Vec<SessionEvent>, t_sim: f64, body: EventBody) {
        out.push(SessionEvent {
            seq: self.seq,
            t_sim,
            body,
        });
        self.seq += 1;
    }

    pub fn snapshot(&self) -> Result<SceneSnapshot, PipelineError> {
        Ok(SceneSnapshot {
            bboxes: project_bboxes(&self.scene, &self.head_pose, &self.cfg.camera, &self.cfg.trigger)?,
            scene: self.scene.clone(),
            head_pose: self.head_pose,
            camera: self.cfg.camera,
            fsm_state: self.fsm,
            robot: self.robot.clone(),
            wrist_offset: self.cfg.robot.wrist_offset,
        })
    }

    /// The initial scene_snapshot a fresh session emits.
    pub fn open_events(&mut self) -> Result<Vec<SessionEvent>, PipelineError> {
        let mut out = Vec::new();
        let snap = self.snapshot()?;
        let t = self.t_now();
        self.emit(&mut out, t, EventBody::SceneSnapshot(snap));
        Ok(out)
    }

    /// Emit an error event without touching pipeline state.
    pub fn error_event(&mut self, err: &PipelineError) -> SessionEvent {
        let mut out = Vec::new();
        let t = self.t_now();
        self.emit(
            &mut out,
            t,
            EventBody::Error(ErrorInfo {
                code: err.code().to_string(),
                message: err.to_string(),
            }),
        );
        out.pop().expect("just emitted")
    }

    /// Ingest a sample; on rejection the state is unchanged and a single error
    /// event is returned instead.
    pub fn ingest_or_error(&mut self, sample: &GazeSample) -> Vec<SessionEvent> {
        match self.ingest(sample) {
            Ok(ev) => ev,
            Err(e) => alloc::vec![self.error_event(&e)],
        }
    }

    /// Run one gaze sample through the whole chain. Errors leave every piece
    /// of state, including the event sequence number, untouched.
    pub fn ingest(&mut self, sample: &GazeSample) -> Result<Vec<SessionEvent>, PipelineError> {
        let t = sample.t;
        if !t.is_finite() {
            return Err(PipelineError::BadTimestamp(t));
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(PipelineError::NonIncreasingTimestamp { t, last });
            }
        }
        let busy = self.is_busy_at(t);
        let (reading, dwell) = decode(
            sample,
            &self.scene,
            &self.cfg.camera,
            &self.cfg.world_to_robot,
            &self.cfg.trigger,
            &self.cfg.dwell,
            &self.dwell,
        )?;
        let mut telemetry_rng = self.telemetry_rng.clone();
        let tel = telemetry(&self.robot, &self.cfg.glove, &mut telemetry_rng);
        let grip = assess(&tel, &self.cfg.glove)?;

        // Validation done: commit.
        self.telemetry_rng = telemetry_rng;
        let prev_count = self.dwell.count;
        self.dwell = dwell;
        self.last_t = Some(t);
        self.head_pose = sample.head_pose;
        self.robot.busy = busy;

        let mut out = Vec::new();
        self.emit(&mut out, t, EventBody::GazeReading(reading.clone()));
        if reading.region == Region::Trigger || prev_count > 0 {
            let progress = DwellProgress {
                object_id: if reading.region == Region::Trigger {
                    reading.object_id.clone()
                } else {
                    None
                },
                count: reading.dwell_count,
                required: self.cfg.dwell.count,
            };
            self.emit(&mut out, t, EventBody::DwellProgress(progress));
        }
        if busy {
            if reading.intent && !self.cfg.grammar.drop_intents_while_busy {
                self.pending_intent = Some(reading);
            }
            return Ok(out);
        }
        let acting = if reading.intent {
            Some(reading)
        } else {
            self.pending_intent.take()
        };
        self.transition(t, acting.as_ref(), grip, &mut out)?;
        Ok(out)
    }

    fn transition(
        &mut self,
        t: f64,
        reading: Option<&GazeReading>,
        grip: GripAssessment,
        out: &mut Vec<SessionEvent>,
    ) -> Result<(), PipelineError> {
        let w2r = self.cfg.world_to_robot;
        let gazed_gp = reading.and_then(|r| r.gp);
        let gazed_object = reading.and_then(|r| r.object_id.clone());
        let point = reading.and_then(|r| r.intent_point.or(r.gaze_point_robot));
        let centroid = match gazed_object.as_ref().and_then(|id| self.scene.object(id)) {
            Some(o) => Some(w2r.apply(&o.position)?),
            None => None,
        };
        let target = plan_reach(
            self.fsm,
            gazed_gp,
            centroid.as_ref(),
            &point.unwrap_or(self.robot.tcp),
            &self.cfg.robot.wrist_offset,
            &self.cfg.grammar,
        );
        let ws = &self.scene.workspace;
        let reachable = match point {
            Some(p) => in_workspace(&p, ws)? && in_workspace(&target, ws)? && in_workspace(&self.robot.tcp, ws)?,
            None => false,
        };
        let input = TransitionInput {
            intent: reading.is_some_and(|r| r.intent),
            gazed_gp,
            gazed_object,
            target,
            reachable,
            grip,
        };
        let before = self.fsm;
        let (after, actions) = step(before, &input, &self.cfg.grammar);
        debug_assert!(actions.iter().all(|a| a.kind == crate::fsm::ActionKind::Release
            || grammar_check(before.held_gp(), a.kind, input.gazed_gp)));
        self.fsm = after;
        if after == before && actions.is_empty() {
            return Ok(());
        }
        self.emit(
            out,
            t,
            EventBody::FsmTransition(TransitionRecord {
                t,
                state_before: before,
                input,
                state_after: after,
                actions: actions.clone(),
            }),
        );
        let mut elapsed = 0.0;
        for (index, action) in actions.into_iter().enumerate() {
            let t_start = t + elapsed * self.cfg.time_scale;
            self.emit(
                out,
                t_start,
                EventBody::RobotActionStarted(ActionStarted {
                    index,
                    action: action.clone(),
                }),
            );
            let ctx = RobotContext {
                cfg: &self.cfg.robot,
                profile: &self.cfg.failures,
                world_to_robot: &w2r,
            };
            let ex = execute(&self.robot, &action, &self.scene, &ctx, &mut self.failure_rng)?;
            self.robot = ex.state;
            self.scene = ex.scene;
            elapsed += ex.duration_s;
            let t_end = t + elapsed * self.cfg.time_scale;
            self.emit(
                out,
                t_end,
                EventBody::RobotActionFinished(ActionFinished {
                    index,
                    action,
                    outcome: ex.outcome,
                    duration_s: ex.duration_s,
                    robot: self.robot.clone(),
                }),
            );
        }
        self.busy_until = t + elapsed * self.cfg.time_scale;
        self.robot.busy = elapsed * self.cfg.time_scale > 0.0;
        Ok(())
    }

    /// Apply an out-of-band command between samples.
    pub fn inject(&mut self, cmd: &Command) -> Result<Vec<SessionEvent>, PipelineError> {
        let mut out = Vec::new();
        match cmd {
            Command::Reset => {
                self.scene = self.initial_scene.clone();
                self.fsm = FsmState::S001;
                self.robot = RobotState::at_home(&self.cfg.robot);
                self.dwell = DwellState::default();
                self.pending_intent = None;
                self.busy_until = f64::NEG_INFINITY;
            }
            Command::SetFailureProfile {
                p_grasp_fail,
                p_drop_during_pour,
                seed,
            } => {
                let p = FailureProfile {
                    p_grasp_fail: *p_grasp_fail,
                    p_drop_during_pour: *p_drop_during_pour,
                    seed: *seed,
                };
                p.validate()?;
                self.cfg.failures = p;
                self.failure_rng = ChaCha8Rng::seed_from_u64(p.seed);
                return Ok(out);
            }
            Command::RandomizeGrid { seed } => {
                if self.robot.holding.is_some() {
                    return Err(PipelineError::HoldingDuringRandomize);
                }
                self.scene = randomize_grid_placement(&self.scene, *seed)?;
            }
            Command::CalibrateWrist {
                palm_pixel,
                palm_point_robot,
            } => {
                let palm = match (palm_pixel, palm_point_robot) {
                    (Some(px), None) => gaze_to_robot_frame(px, &self.cfg.camera, &self.head_pose, &self.cfg.world_to_robot)?,
                    (None, Some(p)) => *p,
                    _ => return Err(PipelineError::BadCalibration),
                };
                self.cfg.robot.wrist_offset = calibrate_wrist_offset(&palm, &self.robot.tcp)?;
            }
        }
        let snap = self.snapshot()?;
        let t = self.t_now();
        self.emit(&mut out, t, EventBody::SceneSnapshot(snap));
        Ok(out)
    }

    /// Record a task outcome in the event stream (used by the task harness).
    pub fn emit_task_result(&mut self, result: TaskResult) -> SessionEvent {
        let mut out = Vec::new();
        let t = self.t_now();
        self.emit(&mut out, t, EventBody::TaskResult(result));
        out.pop().expect("just emitted")
    }
}
