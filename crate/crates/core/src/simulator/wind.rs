use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;

/// One scalar wind component as a function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(2 pi frequency t + phase)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Gaussian increments with standard deviation `step_sigma` every
    /// `interval` seconds, linearly interpolated.
    RandomWalk {
        start: f64,
        step_sigma: f64,
        interval: f64,
        seed: u64,
    },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    fn realize(&self, t_end: f64) -> Result<Realized, SimError> {
        Ok(match *self {
            Signal::Constant { value } => Realized::Constant(value),
            Signal::Sinusoid { offset, amplitude, frequency, phase } => {
                Realized::Sinusoid { offset, amplitude, omega: 2.0 * std::f64::consts::PI * frequency, phase }
            }
            Signal::RandomWalk { start, step_sigma, interval, seed } => {
                if !(interval > 0.0) || !(step_sigma >= 0.0) {
                    return Err(SimError::InvalidConfig(
                        "random-walk wind needs interval > 0 and step_sigma >= 0".into(),
                    ));
                }
                let n = (t_end / interval).ceil() as usize + 2;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, step_sigma).expect("finite sigma");
                let mut knots = Vec::with_capacity(n);
                let mut x = start;
                for _ in 0..n {
                    knots.push(x);
                    x += normal.sample(&mut rng);
                }
                Realized::Knots { interval, knots }
            }
        })
    }
}

#[derive(Clone, Debug)]
enum Realized {
    Constant(f64),
    Sinusoid { offset: f64, amplitude: f64, omega: f64, phase: f64 },
    Knots { interval: f64, knots: Vec<f64> },
}

impl Realized {
    /// Value and time derivative.
    fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            Realized::Constant(v) => (*v, 0.0),
            Realized::Sinusoid { offset, amplitude, omega, phase } => {
                let arg = omega * t + phase;
                (offset + amplitude * arg.sin(), amplitude * omega * arg.cos())
            }
            Realized::Knots { interval, knots } => {
                let s = (t / interval).max(0.0);
                let i = (s.floor() as usize).min(knots.len() - 2);
                let frac = s - i as f64;
                let slope = (knots[i + 1] - knots[i]) / interval;
                (knots[i] + frac * (knots[i + 1] - knots[i]), slope)
            }
        }
    }
}

/// Ambient wind magnitude `w(t)` and direction `zeta(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSignal {
    pub w: Signal,
    pub zeta: Signal,
}

impl WindSignal {
    pub fn constant(w: f64, zeta: f64) -> Self {
        WindSignal { w: Signal::constant(w), zeta: Signal::constant(zeta) }
    }

    pub fn realize(&self, t_end: f64) -> Result<WindField, SimError> {
        if let Signal::Sinusoid { offset, amplitude, .. } = self.w {
            if offset < amplitude.abs() {
                return Err(SimError::InvalidConfig("sinusoidal wind magnitude must stay non-negative".into()));
            }
        }
        if let Signal::Constant { value } = self.w {
            if value < 0.0 {
                return Err(SimError::InvalidConfig("wind magnitude must be non-negative".into()));
            }
        }
        Ok(WindField { w: self.w.realize(t_end)?, zeta: self.zeta.realize(t_end)? })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wind {
    pub w: f64,
    pub zeta: f64,
    pub w_dot: f64,
    pub zeta_dot: f64,
}

/// A wind signal with its random parts drawn, evaluable at any time.
#[derive(Clone, Debug)]
pub struct WindField {
    w: Realized,
    zeta: Realized,
}

impl WindField {
    pub fn at(&self, t: f64) -> Wind {
        let (mut w, mut w_dot) = self.w.eval(t);
        // A random walk may cross zero; reflect so the magnitude stays >= 0.
        if w < 0.0 {
            w = -w;
            w_dot = -w_dot;
        }
        let (zeta, zeta_dot) = self.zeta.eval(t);
        Wind { w, zeta, w_dot, zeta_dot }
    }
}
