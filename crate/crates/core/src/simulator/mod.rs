//! Planar body-frame flight in wind: RK4 integration, sensor sampling and
//! trajectory classification.
//!
//! Wind is an exogenous signal here, never an integrated state. Heading is
//! stored unwrapped.

mod classify;
mod io;
mod measure;
mod presets;
mod schedule;
mod wind;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Param, StateConfig};

pub use classify::{
    classify_trajectory, rank_label, rank_verdicts, representative_indices, ClassifyConfig, RankVerdict, TrajectoryLabel,
};
pub use io::{gnuplot_script, read_csv, write_csv};
pub use measure::{bind_sample, measure, NoiseSpec};
pub use presets::{fig2, fig3, fig3_wind, Preset, FIG2_LETTERS};
pub use schedule::{ControlFn, ControlSchedule, TurnPattern};
pub use wind::{Signal, Wind, WindField, WindSignal};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error("trajectory file: {0}")]
    Format(String),
}

/// Body, drag and motor constants used by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub drag: bool,
    pub c_par: f64,
    pub c_perp: f64,
    pub c_phi: f64,
    pub m: f64,
    pub inertia: f64,
    pub k_m1: f64,
    pub k_m2: f64,
    pub k_m3: f64,
    pub k_m4: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        BodyParams {
            drag: false,
            c_par: 1.0,
            c_perp: 1.0,
            c_phi: 1.0,
            m: 1.0,
            inertia: 1.0,
            k_m1: 1.0,
            k_m2: 0.0,
            k_m3: 1.0,
            k_m4: 1.0,
        }
    }
}

impl BodyParams {
    /// True parameter values of a model configuration. Absorbed parameters
    /// are mapped back with `m = I = 1`.
    pub fn from_config(cfg: &StateConfig) -> Self {
        let v = |p: Param| cfg.value(p);
        if cfg.absorb_mass {
            BodyParams {
                drag: cfg.drag,
                c_par: v(Param::CParPerMass),
                c_perp: v(Param::CPerpPerMass),
                c_phi: v(Param::CPhiPerInertia),
                m: 1.0,
                inertia: 1.0,
                k_m1: v(Param::Km1PerMass),
                k_m2: v(Param::Km2PerInertia),
                k_m3: v(Param::Km3PerMass),
                k_m4: v(Param::Km4PerInertia),
            }
        } else {
            BodyParams {
                drag: cfg.drag,
                c_par: v(Param::CPar),
                c_perp: v(Param::CPerp),
                c_phi: v(Param::CPhi),
                m: v(Param::Mass),
                inertia: v(Param::Inertia),
                k_m1: v(Param::Km1),
                k_m2: v(Param::Km2),
                k_m3: v(Param::Km3),
                k_m4: v(Param::Km4),
            }
        }
    }

    /// `(u_par, u_perp)` whose thrust cancels the drag at `x`.
    pub fn drag_cancelling_thrust(&self, x: &BodyState, wind: &Wind) -> (f64, f64) {
        if !self.drag {
            return (0.0, 0.0);
        }
        let (a_par, a_perp) = airspeed(x, wind);
        (self.c_par * a_par / self.k_m1, self.c_perp * a_perp / self.k_m3)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub v_par: f64,
    pub v_perp: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl BodyState {
    pub fn new(v_par: f64, v_perp: f64, phi: f64, phi_dot: f64) -> Self {
        BodyState { v_par, v_perp, phi, phi_dot }
    }
}

/// Body-frame airspeed `(a_par, a_perp)`.
pub fn airspeed(x: &BodyState, wind: &Wind) -> (f64, f64) {
    let rel = x.phi - wind.zeta;
    (x.v_par - wind.w * rel.cos(), x.v_perp + wind.w * rel.sin())
}

/// Time derivative of `[v_par, v_perp, phi, phi_dot]`.
pub fn body_derivative(p: &BodyParams, x: &BodyState, wind: &Wind, u: [f64; 3]) -> [f64; 4] {
    let (mut d_par, mut d_perp, mut d_phi) = (0.0, 0.0, 0.0);
    if p.drag {
        let (a_par, a_perp) = airspeed(x, wind);
        d_par = p.c_par * a_par / p.m;
        d_perp = p.c_perp * a_perp / p.m;
        d_phi = p.c_phi * x.phi_dot / p.inertia;
    }
    [
        x.v_perp * x.phi_dot - d_par + u[0] * p.k_m1 / p.m,
        -x.v_par * x.phi_dot - d_perp + u[1] * p.k_m3 / p.m,
        x.phi_dot,
        -d_phi + (u[0] * p.k_m2 + u[2] * p.k_m4) / p.inertia,
    ]
}

/// One time sample of a simulated flight.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: BodyState,
    /// World-frame position, integrated alongside the body state.
    pub position: [f64; 2],
    pub wind: Wind,
    pub controls: [f64; 3],
    /// Noise-free sensor values; `None` where the sensor is undefined.
    pub truth: Vec<Option<f64>>,
    pub noisy: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Sensor channel labels, empty until measured.
    pub channels: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

type Full = [f64; 6];

fn full_derivative(p: &BodyParams, y: &Full, wind: &Wind, u: [f64; 3]) -> Full {
    let x = BodyState::new(y[0], y[1], y[2], y[3]);
    let d = body_derivative(p, &x, wind, u);
    let (s, c) = x.phi.sin_cos();
    [d[0], d[1], d[2], d[3], x.v_par * c - x.v_perp * s, x.v_par * s + x.v_perp * c]
}

fn axpy(y: &Full, h: f64, k: &Full) -> Full {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Integrates the body dynamics with classical RK4 on a uniform grid of
/// `round(t_end / dt) + 1` samples. Controls are evaluated at every stage.
pub fn integrate(
    params: &BodyParams,
    schedule: &ControlSchedule,
    wind: &WindSignal,
    dt: f64,
    t_end: f64,
    initial: BodyState,
) -> Result<Trajectory, SimError> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(SimError::InvalidConfig(format!("need dt > 0 and T >= dt (dt = {dt}, T = {t_end})")));
    }
    let field = wind.realize(t_end + dt)?;
    let steps = (t_end / dt).round() as usize;
    let state_of = |y: &Full| BodyState::new(y[0], y[1], y[2], y[3]);
    let f = |t: f64, y: &Full| {
        let w = field.at(t);
        let u = schedule.at(t, &state_of(y), &w, params);
        full_derivative(params, y, &w, u)
    };

    let mut y: Full = [initial.v_par, initial.v_perp, initial.phi, initial.phi_dot, 0.0, 0.0];
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState { t });
        }
        let x = state_of(&y);
        let w = field.at(t);
        samples.push(Sample {
            t,
            state: x,
            position: [y[4], y[5]],
            wind: w,
            controls: schedule.at(t, &x, &w, params),
            truth: Vec::new(),
            noisy: Vec::new(),
        });
        if k == steps {
            break;
        }
        let k1 = f(t, &y);
        let k2 = f(t + dt / 2.0, &axpy(&y, dt / 2.0, &k1));
        let k3 = f(t + dt / 2.0, &axpy(&y, dt / 2.0, &k2));
        let k4 = f(t + dt, &axpy(&y, dt, &k3));
        y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    Ok(Trajectory { dt, channels: Vec::new(), samples })
}
