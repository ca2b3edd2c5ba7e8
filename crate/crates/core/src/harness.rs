//! Desk-scale versions of the two experiments: gaze accuracy under synthetic
//! noise, and the pick-and-place / pick-pour-place task protocol driven by a
//! scripted gaze agent.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{UnitQuaternion, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{ActionKind, FsmState};
use crate::geometry::{pixel_ray, project, CameraModel, GazePixel, GeometryError, Point3, RigidTransform};
use crate::intent::{classify_gaze, decode, DwellConfig, DwellState, GazeSample, IntentError, Region};
use crate::pipeline::{ActionResult, EventBody, Pipeline, PipelineConfig, PipelineError, SessionEvent, TaskResult};
use crate::robot::Outcome;
use crate::scene::{
    in_workspace, project_bboxes, randomize_grid_placement, EgoBBox, GpBits, Grid, ObjectId, Rect, Scene, SceneError,
    TriggerGeometry, Workspace,
};
use crate::stats::{mean, population_sd, StatsError};

pub const SAMPLES_PER_TRIAL: usize = 50;
pub const DISCARDED_SAMPLES: usize = 10;
pub const TRIALS_PER_RUN: usize = 10;
pub const SAMPLE_PERIOD_S: f64 = 0.1;
pub const FIRST_REACH_ATTEMPTS: u32 = 3;

/// Target sampling box for the accuracy protocol, robot frame.
pub const TARGET_RANGES: [[f64; 2]; 3] = [[0.25, 0.80], [0.15, 0.75], [0.35, 0.75]];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("scene has no `{0}` object")]
    MissingObject(&'static str),
    #[error("noise parameter `{0}` must be finite and non-negative")]
    BadNoise(&'static str),
    #[error("trial {0} target lies behind the camera")]
    TargetBehindCamera(u32),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Intent(#[from] IntentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub pixel_sigma_px: f64,
    pub depth_sigma_m: f64,
    pub head_rot_sigma_rad: f64,
    pub head_trans_sigma_m: f64,
    /// Per-trial vertical fixation bias SD as a fraction of |py|.
    pub vertical_bias_gain: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pixel_sigma_px: 10.0,
            depth_sigma_m: 0.005,
            head_rot_sigma_rad: 0.2_f64.to_radians(),
            head_trans_sigma_m: 0.002,
            vertical_bias_gain: 0.5,
        }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            pixel_sigma_px: 0.0,
            depth_sigma_m: 0.0,
            head_rot_sigma_rad: 0.0,
            head_trans_sigma_m: 0.0,
            vertical_bias_gain: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, v) in [
            ("pixel_sigma_px", self.pixel_sigma_px),
            ("depth_sigma_m", self.depth_sigma_m),
            ("head_rot_sigma_rad", self.head_rot_sigma_rad),
            ("head_trans_sigma_m", self.head_trans_sigma_m),
            ("vertical_bias_gain", self.vertical_bias_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HarnessError::BadNoise(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u32,
    pub target: Point3,
    pub samples: Vec<Point3>,
    pub mean_estimate: Point3,
    pub error_xyz: [f64; 3],
    pub error_euclid_m: f64,
}

impl TrialRecord {
    /// Build a record from all samples; the first ten are discarded before averaging.
    pub fn from_samples(trial_id: u32, target: Point3, samples: Vec<Point3>) -> Self {
        let kept = &samples[DISCARDED_SAMPLES.min(samples.len())..];
        let n = kept.len().max(1) as f64;
        let sum = kept.iter().fold(Vector3::zeros(), |acc, p| acc + p.vector());
        let mean_estimate = Point3::from_vector(sum / n, target.frame);
        let e = mean_estimate.vector() - target.vector();
        Self {
            trial_id,
            target,
            samples,
            mean_estimate,
            error_xyz: [e.x, e.y, e.z],
            error_euclid_m: e.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub mean_m: f64,
    pub sd_m: f64,
    /// Mean and SD of the absolute per-axis error.
    pub per_axis_mean_m: [f64; 3],
    pub per_axis_sd_m: [f64; 3],
}

/// Population statistics of Euclidean and absolute per-axis errors.
pub fn summarize_errors(records: &[TrialRecord]) -> Result<ErrorSummary, HarnessError> {
    if records.len() < 2 {
        return Err(StatsError::TooFew {
            need: 2,
            got: records.len(),
        }
        .into());
    }
    let e: Vec<f64> = records.iter().map(|r| r.error_euclid_m).collect();
    let mut per_axis_mean_m = [0.0; 3];
    let mut per_axis_sd_m = [0.0; 3];
    for k in 0..3 {
        let a: Vec<f64> = records.iter().map(|r| r.error_xyz[k].abs()).collect();
        per_axis_mean_m[k] = mean(&a)?;
        per_axis_sd_m[k] = population_sd(&a)?;
    }
    Ok(ErrorSummary {
        n: records.len(),
        mean_m: mean(&e)?,
        sd_m: population_sd(&e)?,
        per_axis_mean_m,
        per_axis_sd_m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeEvalSetup {
    pub camera: CameraModel,
    /// Camera → world for the accuracy protocol.
    pub head_pose: RigidTransform,
    pub world_to_robot: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeEvalResult {
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub summary: ErrorSummary,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Ten trials of fifty samples each. Every random draw happens in a fixed
/// order whatever the noise magnitudes, so runs with the same seed share
/// their random numbers.
pub fn run_gaze_eval(noise: &NoiseModel, setup: &GazeEvalSetup, seed: u64) -> Result<GazeEvalResult, HarnessError> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = &setup.camera;
    let robot_to_camera = setup.head_pose.inverse().compose(&setup.world_to_robot.inverse())?;
    let empty = Scene {
        objects: Vec::new(),
        grid: Grid {
            origin: Point3::world(0.0, 0.0, 0.0),
            pitch_m: 0.13,
        },
        workspace: Workspace::new([-1e3; 3], [1e3; 3])?,
        drop_target_cell: None,
    };
    let trigger = TriggerGeometry::default();
    let dwell_cfg = DwellConfig::default();
    let mut trials = Vec::with_capacity(TRIALS_PER_RUN);
    for trial_id in 0..TRIALS_PER_RUN as u32 {
        let mut c = [0.0; 3];
        for (k, r) in TARGET_RANGES.iter().enumerate() {
            c[k] = rng.random_range(r[0]..=r[1]);
        }
        let target = Point3::robot(c[0], c[1], c[2]);
        let truth = project(&robot_to_camera.apply(&target)?, cam)?
            .ok_or(HarnessError::TargetBehindCamera(trial_id))?;
        let bias_x = normal(&mut rng) * noise.pixel_sigma_px;
        let bias_y = normal(&mut rng) * noise.pixel_sigma_px;
        let bias_v = normal(&mut rng) * noise.vertical_bias_gain * truth.py.abs();
        let mut dwell = DwellState::default();
        let mut samples = Vec::with_capacity(SAMPLES_PER_TRIAL);
        for s in 0..SAMPLES_PER_TRIAL {
            let jx = normal(&mut rng) * noise.pixel_sigma_px;
            let jy = normal(&mut rng) * noise.pixel_sigma_px;
            let jd = normal(&mut rng) * noise.depth_sigma_m;
            let rot = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * noise.head_rot_sigma_rad;
            let trans = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * noise.head_trans_sigma_m;
            let (px, py) = cam.clamp(truth.px + bias_x + jx, truth.py + bias_y + bias_v + jy);
            let sample = GazeSample {
                t: f64::from(trial_id) * 10.0 + s as f64 * SAMPLE_PERIOD_S,
                pixel: GazePixel::new(px, py, (truth.depth_m + jd).max(1e-6)),
                head_pose: setup.head_pose.perturbed(UnitQuaternion::from_scaled_axis(rot), trans),
            };
            let (reading, next) = decode(&sample, &empty, cam, &setup.world_to_robot, &trigger, &dwell_cfg, &dwell)?;
            dwell = next;
            samples.push(reading.gaze_point_robot.expect("positive depth"));
        }
        trials.push(TrialRecord::from_samples(trial_id, target, samples));
    }
    let summary = summarize_errors(&trials)?;
    Ok(GazeEvalResult { seed, trials, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Pp,
    Ppp,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Pp => "PP",
            TaskKind::Ppp => "PPP",
        }
    }

    pub fn actions(&self) -> &'static [&'static str] {
        match self {
            TaskKind::Pp => &["Reach1", "Grasp", "Reach2", "Drop"],
            TaskKind::Ppp => &["Reach1", "Grasp", "Reach2", "Pour", "Reach3", "Drop"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: TaskKind,
    pub repeat: u32,
    pub cup_cell: Option<u8>,
    pub bowl_cell: Option<u8>,
    pub drop_cell: Option<u8>,
    pub per_action_success: Vec<ActionResult>,
    pub full_success: bool,
    pub reach1_attempts: u32,
    /// The FSM passed through the grasp-failure state and came back to 001.
    pub recovered_from_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRate {
    pub action: String,
    pub success_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: TaskKind,
    pub repeats: u32,
    pub per_action: Vec<ActionRate>,
    pub full_success_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEvalResult {
    pub records: Vec<TaskRecord>,
    pub summary: TaskSummary,
    /// Event stream of each repeat's pipeline.
    pub events: Vec<Vec<SessionEvent>>,
}

pub fn summarize_tasks(task: TaskKind, records: &[TaskRecord]) -> TaskSummary {
    let n = records.len().max(1) as f64;
    let pct = |hits: usize| 100.0 * hits as f64 / n;
    let per_action = task
        .actions()
        .iter()
        .map(|a| ActionRate {
            action: a.to_string(),
            success_pct: pct(records
                .iter()
                .filter(|r| r.per_action_success.iter().any(|x| x.action == *a && x.success))
                .count()),
        })
        .collect();
    TaskSummary {
        task,
        repeats: records.len() as u32,
        per_action,
        full_success_pct: pct(records.iter().filter(|r| r.full_success).count()),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Goal {
    Grasp(ObjectId),
    Pour(ObjectId),
    Place(u8),
}

/// Scripted ideal user: fixates the sub-goal's trigger zone until intent
/// fires, and blinks (depth 0) while the robot is busy.
struct Agent<'a> {
    cam: &'a CameraModel,
    head_pose: RigidTransform,
    world_to_robot: RigidTransform,
    trigger: TriggerGeometry,
}

impl Agent<'_> {
    fn eye(&self) -> Point3 {
        Point3::from_vector(self.head_pose.translation_vector(), crate::geometry::Frame::World)
    }

    /// Depth along the pixel's ray to the first scene surface.
    fn depth_at(&self, scene: &Scene, px: f64, py: f64) -> Option<(f64, ObjectId)> {
        let dir = self.head_pose.apply_vector(pixel_ray(px, py, self.cam));
        scene.raycast(&self.eye(), dir).map(|(t, o)| (t, o.id.clone()))
    }

    fn gaze_in_workspace(&self, scene: &Scene, px: f64, py: f64, depth: f64) -> bool {
        let world = self.eye().offset(self.head_pose.apply_vector(pixel_ray(px, py, self.cam)) * depth);
        self.world_to_robot
            .apply(&world)
            .ok()
            .is_some_and(|r| in_workspace(&r, &scene.workspace).unwrap_or(false))
    }

    fn usable(&self, scene: &Scene, boxes: &[EgoBBox], id: &ObjectId, px: f64, py: f64) -> Option<GazePixel> {
        if !self.cam.contains(px, py) {
            return None;
        }
        let c = classify_gaze(&GazePixel::new(px, py, 1.0), boxes);
        if c.region != Region::Trigger || c.object_id.as_ref() != Some(id) {
            return None;
        }
        let (depth, _) = self.depth_at(scene, px, py)?;
        self.gaze_in_workspace(scene, px, py, depth)
            .then(|| GazePixel::new(px, py, depth))
    }

    fn scan_rect(&self, scene: &Scene, boxes: &[EgoBBox], id: &ObjectId, r: &Rect) -> Option<GazePixel> {
        let (cx, cy) = r.centre();
        if let Some(p) = self.usable(scene, boxes, id, cx, cy) {
            return Some(p);
        }
        const N: i32 = 7;
        for i in 0..N {
            for j in 0..N {
                let px = r.left + r.width() * (f64::from(i) + 0.5) / f64::from(N);
                let py = r.bottom + r.height() * (f64::from(j) + 0.5) / f64::from(N);
                if let Some(p) = self.usable(scene, boxes, id, px, py) {
                    return Some(p);
                }
            }
        }
        None
    }

    fn fixation(&self, scene: &Scene, goal: &Goal) -> Result<Option<GazePixel>, HarnessError> {
        let boxes = project_bboxes(scene, &self.head_pose, self.cam, &self.trigger)?;
        match goal {
            Goal::Grasp(id) | Goal::Pour(id) => {
                let Some(zone) = boxes.iter().find(|b| &b.object_id == id).and_then(|b| b.trigger_region) else {
                    return Ok(None);
                };
                Ok(self.scan_rect(scene, &boxes, id, &zone))
            }
            Goal::Place(cell) => {
                let Some(table) = scene.surfaces().next() else {
                    return Ok(None);
                };
                let centre = scene.grid.cell_centre(*cell)?;
                let top = table.top_z();
                let half = scene.grid.pitch_m * 0.4;
                const N: i32 = 5;
                let mut offsets: Vec<(f64, f64)> = Vec::new();
                for i in -N..=N {
                    for j in -N..=N {
                        offsets.push((half * f64::from(i) / f64::from(N), half * f64::from(j) / f64::from(N)));
                    }
                }
                offsets.sort_by(|a, b| (a.0 * a.0 + a.1 * a.1).total_cmp(&(b.0 * b.0 + b.1 * b.1)));
                let to_cam = self.head_pose.inverse();
                for (dx, dy) in offsets {
                    let q = Point3::world(centre.x + dx, centre.y + dy, top);
                    let Some(pix) = project(&to_cam.apply(&q)?, self.cam)? else {
                        continue;
                    };
                    if let Some(p) = self.usable(scene, &boxes, &table.id, pix.px, pix.py) {
                        let (depth, hit) = self.depth_at(scene, p.px, p.py).expect("usable implies hit");
                        let hit_point =
                            self.eye().offset(self.head_pose.apply_vector(pixel_ray(p.px, p.py, self.cam)) * depth);
                        if hit == table.id && scene.grid.cell_containing(&hit_point) == Some(*cell) {
                            return Ok(Some(p));
                        }
                    }
                }
                Ok(None)
            }
        }
    }
}

struct Drive<'a> {
    pipeline: Pipeline,
    agent: Agent<'a>,
    t: f64,
    events: Vec<SessionEvent>,
    saw_failure_state: bool,
}

impl Drive<'_> {
    fn push(&mut self, pixel: GazePixel) -> Result<Vec<SessionEvent>, HarnessError> {
        self.t += SAMPLE_PERIOD_S;
        let sample = GazeSample {
            t: self.t,
            pixel,
            head_pose: self.agent.head_pose,
        };
        let ev = self.pipeline.ingest(&sample)?;
        if self.pipeline.fsm_state() == FsmState::S101 {
            self.saw_failure_state = true;
        }
        self.events.extend(ev.iter().cloned());
        Ok(ev)
    }

    fn blink(&mut self) -> Result<Vec<SessionEvent>, HarnessError> {
        self.push(GazePixel::new(0.0, 0.0, 0.0))
    }

    fn wait_idle(&mut self) -> Result<(), HarnessError> {
        while self.pipeline.is_busy_at(self.t + SAMPLE_PERIOD_S) {
            self.blink()?;
        }
        Ok(())
    }

    /// Fixate `goal` until a transition executes actions or the attempt times out.
    /// Returns the finished actions (kind, outcome) of the triggered transition.
    fn attempt(&mut self, goal: &Goal, budget: u32) -> Result<Option<Vec<(ActionKind, Outcome)>>, HarnessError> {
        for _ in 0..budget {
            let fix = self.agent.fixation(self.pipeline.scene(), goal)?;
            let ev = match fix {
                Some(p) => self.push(p)?,
                None => self.blink()?,
            };
            let triggered = ev
                .iter()
                .any(|e| matches!(&e.body, EventBody::FsmTransition(r) if !r.actions.is_empty()));
            if triggered {
                let done = ev
                    .iter()
                    .filter_map(|e| match &e.body {
                        EventBody::RobotActionFinished(f) => Some((f.action.kind, f.outcome)),
                        _ => None,
                    })
                    .collect();
                self.wait_idle()?;
                return Ok(Some(done));
            }
        }
        Ok(None)
    }

    fn recover(&mut self, limit: u32) -> Result<(), HarnessError> {
        for _ in 0..limit {
            if self.pipeline.fsm_state() == FsmState::S001 && !self.pipeline.is_busy_at(self.t + SAMPLE_PERIOD_S) {
                return Ok(());
            }
            self.blink()?;
        }
        Ok(())
    }
}

fn find_id(scene: &Scene, label: &'static str) -> Result<ObjectId, HarnessError> {
    scene
        .find_label(label)
        .map(|o| o.id.clone())
        .ok_or(HarnessError::MissingObject(label))
}

/// One repeat of a task on an already-randomized scene.
fn run_repeat(
    task: TaskKind,
    repeat: u32,
    scene: Scene,
    cfg: &PipelineConfig,
) -> Result<(TaskRecord, Vec<SessionEvent>), HarnessError> {
    let cup = find_id(&scene, "cup")?;
    let bowl = find_id(&scene, "bowl")?;
    if scene.surfaces().next().is_none() {
        return Err(HarnessError::MissingObject("table"));
    }
    let drop_cell = scene.drop_target_cell.ok_or(HarnessError::MissingObject("drop target"))?;
    let cup_cell = scene.object(&cup).and_then(|o| o.grid_cell);
    let bowl_cell = scene.object(&bowl).and_then(|o| o.grid_cell);
    let agent = Agent {
        cam: &cfg.camera,
        head_pose: cfg.head_pose,
        world_to_robot: cfg.world_to_robot,
        trigger: cfg.trigger,
    };
    let mut pipeline = Pipeline::new(scene, cfg.clone())?;
    let mut events = pipeline.open_events()?;
    events.reserve(256);
    let mut d = Drive {
        pipeline,
        agent,
        t: 0.0,
        events,
        saw_failure_state: false,
    };
    let goals: Vec<(Goal, [&str; 2])> = match task {
        TaskKind::Pp => alloc::vec![
            (Goal::Grasp(cup.clone()), ["Reach1", "Grasp"]),
            (Goal::Place(drop_cell), ["Reach2", "Drop"]),
        ],
        TaskKind::Ppp => alloc::vec![
            (Goal::Grasp(cup.clone()), ["Reach1", "Grasp"]),
            (Goal::Pour(bowl.clone()), ["Reach2", "Pour"]),
            (Goal::Place(drop_cell), ["Reach3", "Drop"]),
        ],
    };
    let budget = cfg.dwell.count + 10;
    let mut results: Vec<ActionResult> = Vec::new();
    let mut reach1_attempts = 0;
    let mut failed = false;
    for (gi, (goal, names)) in goals.iter().enumerate() {
        if failed {
            break;
        }
        let attempts = if gi == 0 { FIRST_REACH_ATTEMPTS } else { 1 };
        let mut done = None;
        for _ in 0..attempts {
            if gi == 0 {
                reach1_attempts += 1;
            }
            done = d.attempt(goal, budget)?;
            if done.is_some() {
                break;
            }
        }
        let Some(done) = done else {
            failed = true;
            break;
        };
        let reach_ok = done.iter().any(|(k, o)| *k == ActionKind::Reach && *o == Outcome::Success);
        let second_ok = match goal {
            Goal::Grasp(_) => done.iter().any(|(k, o)| *k == ActionKind::Grasp && *o == Outcome::Success),
            Goal::Pour(_) => done.iter().any(|(k, o)| *k == ActionKind::Pour && *o == Outcome::Success),
            Goal::Place(cell) => {
                let landed = d.pipeline.scene().object(&cup).and_then(|o| if o.held { None } else { o.grid_cell });
                done.iter().any(|(k, o)| *k == ActionKind::Drop && *o == Outcome::Success) && landed == Some(*cell)
            }
        };
        results.push(ActionResult {
            action: names[0].to_string(),
            success: reach_ok,
        });
        results.push(ActionResult {
            action: names[1].to_string(),
            success: second_ok,
        });
        if !(reach_ok && second_ok) {
            failed = true;
        }
    }
    if failed {
        d.recover(budget * 4)?;
    }
    let per_action_success: Vec<ActionResult> = task
        .actions()
        .iter()
        .map(|a| ActionResult {
            action: a.to_string(),
            success: results.iter().any(|r| r.action == *a && r.success),
        })
        .collect();
    let full_success = per_action_success.iter().all(|r| r.success);
    let record = TaskRecord {
        task,
        repeat,
        cup_cell,
        bowl_cell,
        drop_cell: Some(drop_cell),
        per_action_success: per_action_success.clone(),
        full_success,
        reach1_attempts,
        recovered_from_failure: d.saw_failure_state && d.pipeline.fsm_state() == FsmState::S001,
    };
    let ev = d.pipeline.emit_task_result(TaskResult {
        task: task.name().to_string(),
        repeat,
        per_action_success,
        full_success,
    });
    d.events.push(ev);
    Ok((record, d.events))
}

/// Run `n_repeats` independent repeats. Each repeat re-randomizes the grid and
/// owns a fresh pipeline; the failure seed for repeat `r` derives from `seed`.
pub fn run_task_eval(
    task: TaskKind,
    n_repeats: u32,
    scene: &Scene,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<TaskEvalResult, HarnessError> {
    for label in ["cup", "bowl"] {
        if scene.find_label(label).is_none() {
            return Err(HarnessError::MissingObject(if label == "cup" { "cup" } else { "bowl" }));
        }
    }
    if !scene.objects.iter().any(|o| o.gp == GpBits::SURFACE) {
        return Err(HarnessError::MissingObject("table"));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_repeats as usize);
    let mut events = Vec::with_capacity(n_repeats as usize);
    for repeat in 0..n_repeats {
        let grid_seed = seeds.next_u64();
        let failure_seed = seeds.next_u64();
        let placed = randomize_grid_placement(scene, grid_seed)?;
        let mut c = cfg.clone();
        c.failures.seed = failure_seed;
        let (rec, ev) = run_repeat(task, repeat, placed, &c)?;
        records.push(rec);
        events.push(ev);
    }
    let summary = summarize_tasks(task, &records);
    Ok(TaskEvalResult {
        records,
        summary,
        events,
    })
}
