use std::f64::consts::FRAC_PI_2;


use super::{
    integrate, BodyParams, BodyState, ControlSchedule, Signal, SimError, Trajectory, TrajectoryLabel, TurnPattern,
    WindSignal,
};

/// A complete, reproducible flight setup.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: BodyParams,
    pub schedule: ControlSchedule,
    pub wind: WindSignal,
    pub initial: BodyState,
    pub duration: f64,
    pub dt: f64,
    /// Label the trajectory family is expected to receive.
    pub expected: TrajectoryLabel,
}

impl Preset {
    pub fn simulate(&self) -> Result<Trajectory, SimError> {
        integrate(&self.params, &self.schedule, &self.wind, self.dt, self.duration, self.initial)
    }
}

/// The six trajectory families A-F, flown with drag in a constant crosswind
/// from the north (`zeta = pi/2`, `w = 0.5`).
///
/// Turn timing and magnitudes are reconstructions: square torque pulses of
/// unit magnitude with forward thrust held at 1.
pub fn fig2(letter: char) -> Option<Preset> {
    let params = BodyParams { drag: true, ..Default::default() };
    let wind = WindSignal::constant(0.5, FRAC_PI_2);
    let base = Preset {
        name: "",
        params,
        schedule: ControlSchedule::Steady,
        wind,
        initial: BodyState::new(1.0, 0.0, 0.0, 0.0),
        duration: 8.0,
        dt: 0.01,
        expected: TrajectoryLabel::Calibratable,
    };
    let turns = |count: usize, period: f64, duty: f64, start: f64| {
        ControlSchedule::Turns(TurnPattern {
            forward: 1.0,
            lateral: 0.3,
            magnitude: 1.0,
            count,
            period,
            duty,
            start,
            alternate: true,
        })
    };
    Some(match letter.to_ascii_uppercase() {
        // Steady crab: thrust balances drag, nothing changes.
        'A' => Preset {
            name: "A-straight-crab",
            initial: BodyState::new(1.0, 0.2, 0.0, 0.0),
            expected: TrajectoryLabel::Unobservable,
            ..base
        },
        'B' => Preset {
            name: "B-lateral-pulses",
            schedule: ControlSchedule::LateralPulses { forward: 1.0, magnitude: 0.5, count: 4, period: 2.0, duty: 0.5 },
            expected: TrajectoryLabel::ObservableNotCalibratable,
            ..base
        },
        'C' => Preset { name: "C-single-turn", schedule: turns(1, 2.0, 1.0, 3.0), ..base },
        'D' => Preset { name: "D-two-turns", schedule: turns(2, 3.0, 0.5, 1.0), ..base },
        'E' => Preset {
            name: "E-orbit",
            schedule: ControlSchedule::Constant { u: [1.0, 0.3, 0.5] },
            duration: 12.0,
            ..base
        },
        'F' => Preset {
            name: "F-constant-course-rotation",
            schedule: ControlSchedule::constant_course_rotation(0.5),
            initial: BodyState::new(1.0, 0.0, 0.0, 0.5),
            duration: 12.0,
            ..base
        },
        _ => return None,
    })
}

pub const FIG2_LETTERS: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];

/// Slowly varying wind used by the filter experiments: `w` between 0.4 and
/// 0.8 over 150 s, `zeta` swinging 0.6 rad around 1.5 over 240 s.
pub fn fig3_wind() -> WindSignal {
    WindSignal {
        w: Signal::Sinusoid { offset: 0.6, amplitude: 0.2, frequency: 1.0 / 150.0, phase: 0.0 },
        zeta: Signal::Sinusoid { offset: 1.5, amplitude: 0.6, frequency: 1.0 / 240.0, phase: 0.0 },
    }
}

/// `count` alternating turns spread evenly over 200 s with forward and
/// lateral thrust held on, in [`fig3_wind`]. `count = 0` gives the
/// straight-line control run.
pub fn fig3(count: usize) -> Preset {
    let duration = 200.0;
    let (name, schedule, expected) = if count == 0 {
        ("fig3-straight", ControlSchedule::Constant { u: [1.0, 0.3, 0.0] }, TrajectoryLabel::ObservableNotCalibratable)
    } else {
        let name = match count {
            100 => "fig3-100turns",
            34 => "fig3-34turns",
            _ => "fig3-turns",
        };
        let pattern = TurnPattern {
            forward: 1.0,
            lateral: 0.3,
            magnitude: 1.0,
            count,
            period: duration / count as f64,
            duty: 0.5,
            start: 0.0,
            alternate: true,
        };
        (name, ControlSchedule::Turns(pattern), TrajectoryLabel::Calibratable)
    };
    Preset {
        name,
        params: BodyParams { drag: true, ..Default::default() },
        schedule,
        wind: fig3_wind(),
        initial: BodyState::new(1.0, 0.0, 0.0, 0.0),
        duration,
        dt: 0.01,
        expected,
    }
}
