//! Kinematic arm and glove stand-in: executes actions in simulated time and
//! moves scene objects, with seeded failure injection.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{ActionKind, RobotAction};
use crate::geometry::{Frame, GeometryError, Point3, RigidTransform, WristOffset};
use crate::grasp::{simulate_telemetry, GloveState, GloveTelemetry, GloveThresholds};
use crate::scene::{GpBits, ObjectId, Scene, SceneObject};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobotError {
    #[error("robot is busy executing a previous action")]
    Busy,
    #[error("reach action without a target")]
    MissingTarget,
    #[error("failure probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("invalid robot config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    GraspFail,
    DropFail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub tcp: Point3,
    pub holding: Option<ObjectId>,
    pub glove: GloveState,
    pub busy: bool,
}

impl RobotState {
    pub fn at_home(cfg: &RobotConfig) -> Self {
        Self {
            tcp: Point3::robot(cfg.home[0], cfg.home[1], cfg.home[2]),
            holding: None,
            glove: GloveState::Open,
            busy: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FailureProfile {
    pub p_grasp_fail: f64,
    pub p_drop_during_pour: f64,
    pub seed: u64,
}

impl Default for FailureProfile {
    fn default() -> Self {
        Self {
            p_grasp_fail: 0.0,
            p_drop_during_pour: 0.0,
            seed: 0,
        }
    }
}

impl FailureProfile {
    pub fn validate(&self) -> Result<(), RobotError> {
        for p in [self.p_grasp_fail, self.p_drop_during_pour] {
            if !(0.0..=1.0).contains(&p) {
                return Err(RobotError::BadProbability(p));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    pub speed_mps: f64,
    pub grasp_radius_m: f64,
    /// Home TCP, robot frame.
    pub home: [f64; 3],
    pub glove_actuation_s: f64,
    pub pour_s: f64,
    pub wrist_offset: WristOffset,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            speed_mps: 0.25,
            grasp_radius_m: 0.05,
            home: [0.45, 0.45, 0.60],
            glove_actuation_s: 0.5,
            pour_s: 1.5,
            wrist_offset: WristOffset::zero(),
        }
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<(), RobotError> {
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return Err(RobotError::BadConfig("speed_mps must be positive"));
        }
        if !(self.grasp_radius_m > 0.0) {
            return Err(RobotError::BadConfig("grasp_radius_m must be positive"));
        }
        if !(self.glove_actuation_s >= 0.0 && self.pour_s >= 0.0) {
            return Err(RobotError::BadConfig("durations must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub state: RobotState,
    pub scene: Scene,
    pub outcome: Outcome,
    pub duration_s: f64,
}

/// Everything `execute` needs besides the state it mutates.
pub struct RobotContext<'a> {
    pub cfg: &'a RobotConfig,
    pub profile: &'a FailureProfile,
    pub world_to_robot: &'a RigidTransform,
}

impl RobotContext<'_> {
    fn hand_world(&self, tcp: &Point3) -> Result<Point3, RobotError> {
        let hand = self.cfg.wrist_offset.hand_at(tcp);
        Ok(self.world_to_robot.inverse().apply(&hand)?)
    }
}

fn place_object(scene: &mut Scene, id: &ObjectId, at: &Point3) {
    let half_z = scene.object(id).map_or(0.0, |o| o.extents[2]);
    let free = |o: &&SceneObject| !o.held && &o.id != id;
    let container = scene
        .objects
        .iter()
        .filter(free)
        .find(|o| o.gp == GpBits::CONTAINER && o.contains_xy(at))
        .map(|c| (c.position.x, c.position.y, c.position.z - c.extents[2] + half_z));
    let surface = scene
        .objects
        .iter()
        .filter(free)
        .find(|o| o.gp.is_surface() && o.contains_xy(at))
        .map(|s| s.top_z());
    let cell = scene.grid.cell_containing(at);
    let grid = scene.grid;
    let Some(obj) = scene.object_mut(id) else {
        return;
    };
    obj.held = false;
    obj.grid_cell = None;
    if let Some((x, y, z)) = container {
        obj.position = Point3::world(x, y, z);
    } else if let Some(top) = surface {
        match cell {
            Some(c) => {
                let centre = grid.cell_centre(c).expect("cell in range");
                obj.position = Point3::world(centre.x, centre.y, top + half_z);
                obj.grid_cell = Some(c);
            }
            None => obj.position = Point3::world(at.x, at.y, top + half_z),
        }
    } else {
        obj.position = *at;
    }
}

/// Execute one action. Draws exactly one uniform from `rng` for Grasp and
/// Pour, none otherwise, so failure sequences depend only on the seed and the
/// action sequence.
pub fn execute<R: Rng + ?Sized>(
    state: &RobotState,
    action: &RobotAction,
    scene: &Scene,
    ctx: &RobotContext<'_>,
    rng: &mut R,
) -> Result<Execution, RobotError> {
    if state.busy {
        return Err(RobotError::Busy);
    }
    let mut st = state.clone();
    let mut sc = scene.clone();
    let cfg = ctx.cfg;
    let (outcome, duration_s) = match action.kind {
        ActionKind::Reach => {
            let target = action.target.ok_or(RobotError::MissingTarget)?;
            target.expect_frame(Frame::Robot)?;
            let d = st.tcp.distance(&target);
            st.tcp = target;
            if let Some(id) = st.holding.clone() {
                let hand = ctx.hand_world(&st.tcp)?;
                if let Some(o) = sc.object_mut(&id) {
                    o.position = hand;
                }
            }
            (Outcome::Success, d / cfg.speed_mps)
        }
        ActionKind::Grasp => {
            let u: f64 = rng.random();
            let hand = ctx.hand_world(&st.tcp)?;
            let candidate = sc
                .objects
                .iter()
                .filter(|o| !o.held && o.gp.graspable)
                .map(|o| (o.position.distance(&hand), o.id.clone()))
                .filter(|(d, _)| *d <= cfg.grasp_radius_m)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, id)| id);
            match candidate {
                Some(id) if st.holding.is_none() && u >= ctx.profile.p_grasp_fail => {
                    let o = sc.object_mut(&id).expect("candidate exists");
                    o.held = true;
                    o.grid_cell = None;
                    o.position = hand;
                    st.holding = Some(id);
                    st.glove = GloveState::ClosedHeld;
                    (Outcome::Success, cfg.glove_actuation_s)
                }
                _ => {
                    if st.holding.is_none() {
                        st.glove = GloveState::ClosedEmpty;
                    }
                    (Outcome::GraspFail, cfg.glove_actuation_s)
                }
            }
        }
        ActionKind::Drop | ActionKind::Release => {
            st.glove = GloveState::Open;
            match st.holding.take() {
                Some(id) => {
                    let hand = ctx.hand_world(&st.tcp)?;
                    place_object(&mut sc, &id, &hand);
                    (Outcome::Success, cfg.glove_actuation_s)
                }
                None if action.kind == ActionKind::Release => (Outcome::Success, cfg.glove_actuation_s),
                None => (Outcome::DropFail, cfg.glove_actuation_s),
            }
        }
        ActionKind::Pour => {
            let u: f64 = rng.random();
            match st.holding.clone() {
                Some(id) if u < ctx.profile.p_drop_during_pour => {
                    let hand = ctx.hand_world(&st.tcp)?;
                    place_object(&mut sc, &id, &hand);
                    st.holding = None;
                    st.glove = GloveState::ClosedEmpty;
                    (Outcome::DropFail, cfg.pour_s)
                }
                Some(_) => {
                    if let Some(c) = action.object_id.as_ref().and_then(|c| sc.object_mut(c)) {
                        c.pour_count += 1;
                    }
                    (Outcome::Success, cfg.pour_s)
                }
                None => (Outcome::DropFail, cfg.pour_s),
            }
        }
    };
    Ok(Execution {
        state: st,
        scene: sc,
        outcome,
        duration_s,
    })
}

/// Simulated glove readings for the robot's true glove state.
pub fn telemetry<R: Rng + ?Sized>(state: &RobotState, cfg: &GloveThresholds, rng: &mut R) -> GloveTelemetry {
    simulate_telemetry(state.glove, cfg, rng)
}
