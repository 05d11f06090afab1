use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BodyParams, BodyState, Wind};

/// A control law evaluated with the current time, state and wind.
pub type ControlFn = Arc<dyn Fn(f64, &BodyState, &Wind) -> [f64; 3] + Send + Sync>;

/// Square torque pulses of magnitude `magnitude` (alternating sign when
/// `alternate`), each lasting `duty * period`, starting at `start`, with
/// constant forward and lateral thrust throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnPattern {
    #[serde(default = "one")]
    pub forward: f64,
    #[serde(default)]
    pub lateral: f64,
    #[serde(default = "one")]
    pub magnitude: f64,
    pub count: usize,
    pub period: f64,
    #[serde(default = "half")]
    pub duty: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "yes")]
    pub alternate: bool,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

/// Control inputs `[u_par, u_perp, u_phi]` over time.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlSchedule {
    Constant {
        u: [f64; 3],
    },
    /// `(start time, u)` steps; each holds until the next start.
    Piecewise {
        steps: Vec<(f64, [f64; 3])>,
    },
    Turns(TurnPattern),
    /// Lateral thrust pulses with no torque: direction changes without
    /// orientation changes.
    LateralPulses {
        #[serde(default = "one")]
        forward: f64,
        magnitude: f64,
        count: usize,
        period: f64,
        #[serde(default = "half")]
        duty: f64,
    },
    /// Thrust exactly cancels drag so the ground velocity stays fixed in the
    /// world frame, while a constant torque rotates the body.
    HoldCourse {
        u_phi: f64,
    },
    /// Thrust that cancels drag at the current state, no torque. Starting at
    /// rest in the body frame this holds a straight, steady crab.
    Steady,
    #[serde(skip)]
    Callable(ControlFn),
}

impl fmt::Debug for ControlSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSchedule::Callable(_) => f.write_str("Callable(..)"),
            other => write!(f, "{}", serde_json::to_string(other).unwrap_or_default()),
        }
    }
}

impl PartialEq for ControlSchedule {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ControlSchedule::Callable(a), ControlSchedule::Callable(b)) => Arc::ptr_eq(a, b),
            (ControlSchedule::Callable(_), _) | (_, ControlSchedule::Callable(_)) => false,
            (a, b) => serde_json::to_value(a).ok() == serde_json::to_value(b).ok(),
        }
    }
}

fn pulse(t: f64, start: f64, period: f64, duty: f64, count: usize) -> Option<usize> {
    if t < start || period <= 0.0 {
        return None;
    }
    let k = ((t - start) / period).floor();
    let k_us = k as usize;
    (k_us < count && (t - start - k * period) < duty * period).then_some(k_us)
}

impl ControlSchedule {
    pub fn straight() -> Self {
        ControlSchedule::Constant { u: [1.0, 0.0, 0.0] }
    }

    pub fn single_turn(start: f64, duration: f64) -> Self {
        ControlSchedule::Turns(TurnPattern {
            forward: 1.0,
            lateral: 0.0,
            magnitude: 1.0,
            count: 1,
            period: duration,
            duty: 1.0,
            start,
            alternate: false,
        })
    }

    pub fn n_turns(count: usize, period: f64, magnitude: f64) -> Self {
        ControlSchedule::Turns(TurnPattern {
            forward: 1.0,
            lateral: 0.0,
            magnitude,
            count,
            period,
            duty: 0.5,
            start: 0.0,
            alternate: true,
        })
    }

    pub fn orbit(u_phi: f64) -> Self {
        ControlSchedule::Constant { u: [1.0, 0.0, u_phi] }
    }

    pub fn rotate_in_place(u_phi: f64) -> Self {
        ControlSchedule::Constant { u: [0.0, 0.0, u_phi] }
    }

    pub fn constant_course_rotation(u_phi: f64) -> Self {
        ControlSchedule::HoldCourse { u_phi }
    }

    pub fn at(&self, t: f64, x: &BodyState, wind: &Wind, p: &BodyParams) -> [f64; 3] {
        match self {
            ControlSchedule::Constant { u } => *u,
            ControlSchedule::Piecewise { steps } => steps
                .iter()
                .take_while(|(start, _)| *start <= t)
                .last()
                .map(|(_, u)| *u)
                .unwrap_or([0.0; 3]),
            ControlSchedule::Turns(tp) => {
                let u_phi = match pulse(t, tp.start, tp.period, tp.duty, tp.count) {
                    Some(k) if tp.alternate && k % 2 == 1 => -tp.magnitude,
                    Some(_) => tp.magnitude,
                    None => 0.0,
                };
                [tp.forward, tp.lateral, u_phi]
            }
            ControlSchedule::LateralPulses { forward, magnitude, count, period, duty } => {
                let lat = match pulse(t, 0.0, *period, *duty, *count) {
                    Some(k) if k % 2 == 1 => -magnitude,
                    Some(_) => *magnitude,
                    None => 0.0,
                };
                [*forward, lat, 0.0]
            }
            ControlSchedule::HoldCourse { u_phi } => {
                let (u_par, u_perp) = p.drag_cancelling_thrust(x, wind);
                [u_par, u_perp, *u_phi]
            }
            ControlSchedule::Steady => {
                let (u_par, u_perp) = p.drag_cancelling_thrust(x, wind);
                [u_par, u_perp, 0.0]
            }
            ControlSchedule::Callable(f) => f(t, x, wind),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turns_alternate_sign() {
        let s = ControlSchedule::n_turns(3, 2.0, 1.0);
        let p = BodyParams::default();
        let x = BodyState::default();
        let w = Wind::default();
        assert_eq!(s.at(0.5, &x, &w, &p), [1.0, 0.0, 1.0]);
        assert_eq!(s.at(1.5, &x, &w, &p), [1.0, 0.0, 0.0]);
        assert_eq!(s.at(2.5, &x, &w, &p), [1.0, 0.0, -1.0]);
        assert_eq!(s.at(4.5, &x, &w, &p), [1.0, 0.0, 1.0]);
        assert_eq!(s.at(6.5, &x, &w, &p), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn piecewise_holds_last_step() {
        let s = ControlSchedule::Piecewise { steps: vec![(0.0, [1.0, 0.0, 0.0]), (1.0, [0.0, 2.0, 0.0])] };
        let (p, x, w) = (BodyParams::default(), BodyState::default(), Wind::default());
        assert_eq!(s.at(0.99, &x, &w, &p), [1.0, 0.0, 0.0]);
        assert_eq!(s.at(5.0, &x, &w, &p), [0.0, 2.0, 0.0]);
    }
}
