//! Glove telemetry classification and the simulator-side telemetry generator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraspError {
    #[error("telemetry field `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("telemetry field `{0}` is negative")]
    Negative(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GloveTelemetry {
    pub tendon_tension_n: f64,
    pub motor_voltage_v: f64,
    pub fingertip_force_n: f64,
}

impl GloveTelemetry {
    pub fn validate(&self) -> Result<(), GraspError> {
        for (name, v) in [
            ("tendon_tension_n", self.tendon_tension_n),
            ("motor_voltage_v", self.motor_voltage_v),
            ("fingertip_force_n", self.fingertip_force_n),
        ] {
            if !v.is_finite() {
                return Err(GraspError::NonFinite(name));
            }
        }
        if self.tendon_tension_n < 0.0 {
            return Err(GraspError::Negative("tendon_tension_n"));
        }
        if self.fingertip_force_n < 0.0 {
            return Err(GraspError::Negative("fingertip_force_n"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GripAssessment {
    pub grip_closed: bool,
    pub object_held: bool,
}

impl GripAssessment {
    pub const OPEN: GripAssessment = GripAssessment {
        grip_closed: false,
        object_held: false,
    };
    pub const CLOSED_EMPTY: GripAssessment = GripAssessment {
        grip_closed: true,
        object_held: false,
    };
    pub const CLOSED_HELD: GripAssessment = GripAssessment {
        grip_closed: true,
        object_held: true,
    };

    pub fn is_grasp_failure(&self) -> bool {
        *self == Self::CLOSED_EMPTY
    }
}

/// True physical glove state in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GloveState {
    Open,
    ClosedEmpty,
    ClosedHeld,
}

impl GloveState {
    pub fn assessment(&self) -> GripAssessment {
        match self {
            GloveState::Open => GripAssessment::OPEN,
            GloveState::ClosedEmpty => GripAssessment::CLOSED_EMPTY,
            GloveState::ClosedHeld => GripAssessment::CLOSED_HELD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GloveThresholds {
    pub tension_closed_n: f64,
    pub force_held_n: f64,
    /// Standard deviation of simulated readings.
    #[serde(default = "default_noise")]
    pub noise_sigma_n: f64,
}

fn default_noise() -> f64 {
    0.2
}

impl Default for GloveThresholds {
    fn default() -> Self {
        Self {
            tension_closed_n: 5.0,
            force_held_n: 1.0,
            noise_sigma_n: default_noise(),
        }
    }
}

/// Two-threshold rule. Motor voltage is carried but not used.
pub fn assess(t: &GloveTelemetry, cfg: &GloveThresholds) -> Result<GripAssessment, GraspError> {
    t.validate()?;
    let grip_closed = t.tendon_tension_n >= cfg.tension_closed_n;
    Ok(GripAssessment {
        grip_closed,
        object_held: grip_closed && t.fingertip_force_n >= cfg.force_held_n,
    })
}

const CLOSED_TENSION_N: f64 = 10.0;
const CLOSED_VOLTAGE_V: f64 = 3.0;
const HELD_FORCE_N: f64 = 3.0;

/// Noisy readings around the nominal values for a glove state.
pub fn simulate_telemetry<R: Rng + ?Sized>(state: GloveState, cfg: &GloveThresholds, rng: &mut R) -> GloveTelemetry {
    let (tension, voltage, force) = match state {
        GloveState::Open => (0.0, 0.0, 0.0),
        GloveState::ClosedEmpty => (CLOSED_TENSION_N, CLOSED_VOLTAGE_V, 0.0),
        GloveState::ClosedHeld => (CLOSED_TENSION_N, CLOSED_VOLTAGE_V, HELD_FORCE_N),
    };
    let mut n = || -> f64 { cfg.noise_sigma_n * rng.sample::<f64, _>(StandardNormal) };
    GloveTelemetry {
        tendon_tension_n: (tension + n()).max(0.0),
        motor_voltage_v: voltage + n(),
        fingertip_force_n: (force + n()).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tel(t: f64, f: f64) -> GloveTelemetry {
        GloveTelemetry {
            tendon_tension_n: t,
            motor_voltage_v: 0.0,
            fingertip_force_n: f,
        }
    }

    #[test]
    fn thresholds() {
        let cfg = GloveThresholds::default();
        assert_eq!(assess(&tel(0.0, 0.0), &cfg).unwrap(), GripAssessment::OPEN);
        assert_eq!(assess(&tel(5.0, 1.0), &cfg).unwrap(), GripAssessment::CLOSED_HELD);
        let failure = assess(&tel(8.0, 0.0), &cfg).unwrap();
        assert!(failure.is_grasp_failure());
        // force without closure is not a hold
        assert_eq!(assess(&tel(1.0, 4.0), &cfg).unwrap(), GripAssessment::OPEN);
    }

    #[test]
    fn rejects_nan_and_negative() {
        let cfg = GloveThresholds::default();
        assert!(assess(&tel(f64::NAN, 0.0), &cfg).is_err());
        assert!(assess(&tel(1.0, -0.1), &cfg).is_err());
    }

    #[test]
    fn simulated_states_classify() {
        let cfg = GloveThresholds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for state in [GloveState::Open, GloveState::ClosedEmpty, GloveState::ClosedHeld] {
            let hits = (0..10_000)
                .filter(|_| assess(&simulate_telemetry(state, &cfg, &mut rng), &cfg).unwrap() == state.assessment())
                .count();
            assert!(hits >= 9_990, "{state:?}: {hits}");
        }
    }
}
