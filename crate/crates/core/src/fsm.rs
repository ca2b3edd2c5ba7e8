//! The four-state action grammar: user state from grip and held-object bits,
//! transitions gated by intent, object category and reachability.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, WristOffset};
use crate::grasp::GripAssessment;
use crate::scene::{GpBits, ObjectId};

/// Grip bit followed by the held object's GP bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmState {
    /// Grip open, nothing held.
    S001,
    /// Grip closed on nothing: grasp failure.
    S101,
    /// Holding a graspable solid.
    S110,
    /// Holding a pourable container.
    S111,
}

impl FsmState {
    pub const ALL: [FsmState; 4] = [FsmState::S001, FsmState::S101, FsmState::S110, FsmState::S111];

    pub fn code(&self) -> &'static str {
        match self {
            FsmState::S001 => "001",
            FsmState::S101 => "101",
            FsmState::S110 => "110",
            FsmState::S111 => "111",
        }
    }

    /// GP bits of the held object, if any.
    pub fn held_gp(&self) -> Option<GpBits> {
        match self {
            FsmState::S110 => Some(GpBits::SOLID),
            FsmState::S111 => Some(GpBits::POURABLE),
            FsmState::S001 | FsmState::S101 => None,
        }
    }

    pub fn holding(gp: GpBits) -> Option<FsmState> {
        match gp {
            GpBits::SOLID => Some(FsmState::S110),
            GpBits::POURABLE => Some(FsmState::S111),
            _ => None,
        }
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Reach,
    Grasp,
    Pour,
    Drop,
    Release,
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActionKind::Reach => "Reach",
            ActionKind::Grasp => "Grasp",
            ActionKind::Pour => "Pour",
            ActionKind::Drop => "Drop",
            ActionKind::Release => "Release",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotAction {
    pub kind: ActionKind,
    /// TCP target in the robot frame, wrist offset applied. Reach only.
    pub target: Option<Point3>,
    pub object_id: Option<ObjectId>,
}

impl RobotAction {
    fn reach(target: Point3, object_id: Option<ObjectId>) -> Self {
        Self {
            kind: ActionKind::Reach,
            target: Some(target),
            object_id,
        }
    }

    fn on(kind: ActionKind, object_id: Option<ObjectId>) -> Self {
        Self {
            kind,
            target: None,
            object_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BowlWhileHoldingPourable {
    #[default]
    Pour,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrammarConfig {
    pub pour_height_m: f64,
    pub container_drop_height_m: f64,
    pub bowl_gaze_while_holding_pourable: BowlWhileHoldingPourable,
    /// Intents that arrive while the robot is executing are discarded.
    pub drop_intents_while_busy: bool,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            pour_height_m: 0.15,
            container_drop_height_m: 0.10,
            bowl_gaze_while_holding_pourable: BowlWhileHoldingPourable::Pour,
            drop_intents_while_busy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionInput {
    pub intent: bool,
    pub gazed_gp: Option<GpBits>,
    pub gazed_object: Option<ObjectId>,
    /// Reach target for the transition this input would trigger (see [`plan_reach`]).
    pub target: Point3,
    pub reachable: bool,
    pub grip: GripAssessment,
}

/// Whether an action is allowed when holding `held_gp` and aiming at `target_gp`.
pub fn grammar_check(held_gp: Option<GpBits>, kind: ActionKind, target_gp: Option<GpBits>) -> bool {
    let target_is = |set: &[GpBits]| target_gp.is_some_and(|t| set.contains(&t));
    let placeable = [GpBits::CONTAINER, GpBits::SURFACE];
    let graspable = [GpBits::SOLID, GpBits::POURABLE];
    match kind {
        ActionKind::Grasp => held_gp.is_none() && target_is(&graspable),
        ActionKind::Drop => held_gp.is_some_and(|h| h.graspable) && target_is(&placeable),
        ActionKind::Pour => held_gp == Some(GpBits::POURABLE) && target_gp == Some(GpBits::CONTAINER),
        ActionKind::Release => held_gp.is_none(),
        ActionKind::Reach => match held_gp {
            None => target_is(&graspable),
            Some(_) => target_is(&placeable),
        },
    }
}

/// Reach target (robot frame, wrist offset applied) for gazing at an object
/// of `gazed_gp` from `state`.
pub fn plan_reach(
    state: FsmState,
    gazed_gp: Option<GpBits>,
    object_centroid: Option<&Point3>,
    gaze_point: &Point3,
    wrist: &WristOffset,
    cfg: &GrammarConfig,
) -> Point3 {
    let raised = |h: f64| object_centroid.map(|c| c.offset(Vector3::new(0.0, 0.0, h)));
    let base = match (state, gazed_gp) {
        (FsmState::S001, Some(gp)) if gp.graspable => object_centroid.copied(),
        (FsmState::S110, Some(GpBits::CONTAINER)) => raised(cfg.container_drop_height_m),
        (FsmState::S111, Some(GpBits::CONTAINER)) => match cfg.bowl_gaze_while_holding_pourable {
            BowlWhileHoldingPourable::Pour => raised(cfg.pour_height_m),
            BowlWhileHoldingPourable::Drop => raised(cfg.container_drop_height_m),
        },
        _ => None,
    };
    wrist.tcp_for(&base.unwrap_or(*gaze_point))
}

/// One FSM transition. Unlisted combinations self-loop with no actions.
pub fn step(state: FsmState, input: &TransitionInput, cfg: &GrammarConfig) -> (FsmState, Vec<RobotAction>) {
    if state == FsmState::S101 {
        return (FsmState::S001, vec![RobotAction::on(ActionKind::Release, None)]);
    }
    if matches!(state, FsmState::S110 | FsmState::S111) && input.grip.is_grasp_failure() {
        return (FsmState::S101, Vec::new());
    }
    if !input.intent || !input.reachable {
        return (state, Vec::new());
    }
    // 001 means the grip is open; a closed glove cannot start a grasp.
    if state == FsmState::S001 && input.grip != GripAssessment::OPEN {
        return (state, Vec::new());
    }
    let Some(gp) = input.gazed_gp else {
        return (state, Vec::new());
    };
    let obj = || input.gazed_object.clone();
    let reach = || RobotAction::reach(input.target, obj());
    let (next, actions) = match (state, gp) {
        (FsmState::S001, GpBits::SOLID | GpBits::POURABLE) => (
            FsmState::holding(gp).expect("graspable"),
            vec![reach(), RobotAction::on(ActionKind::Grasp, obj())],
        ),
        (FsmState::S110 | FsmState::S111, GpBits::SURFACE) => {
            (FsmState::S001, vec![reach(), RobotAction::on(ActionKind::Drop, obj())])
        }
        (FsmState::S110, GpBits::CONTAINER) => (FsmState::S001, vec![reach(), RobotAction::on(ActionKind::Drop, obj())]),
        (FsmState::S111, GpBits::CONTAINER) => match cfg.bowl_gaze_while_holding_pourable {
            BowlWhileHoldingPourable::Pour => (FsmState::S111, vec![reach(), RobotAction::on(ActionKind::Pour, obj())]),
            BowlWhileHoldingPourable::Drop => (FsmState::S001, vec![reach(), RobotAction::on(ActionKind::Drop, obj())]),
        },
        _ => (state, Vec::new()),
    };
    let held = state.held_gp();
    if actions.iter().all(|a| grammar_check(held, a.kind, Some(gp))) {
        (next, actions)
    } else {
        (state, Vec::new())
    }
}
