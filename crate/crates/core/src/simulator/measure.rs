use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Sample, SimError, Trajectory};
use crate::expr::{Evaluator, Symbol};
use crate::models::{Control, DynamicsModel, Param, SensorSet, PHI, PHI_DOT, V_PAR, V_PERP, W, W_DOT, ZETA, ZETA_DOT};

/// Additive Gaussian measurement noise.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation per channel; a single value applies to all.
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    fn sigma_for(&self, channel: usize) -> f64 {
        match self.sigma.len() {
            0 => 0.0,
            1 => self.sigma[0],
            _ => self.sigma.get(channel).copied().unwrap_or(0.0),
        }
    }
}

/// Binds every symbol of `model` at one sample: states and wind from the
/// sample, parameters at their configured true values, controls as applied.
pub fn bind_sample(model: &DynamicsModel, s: &Sample) -> IndexMap<Symbol, f64> {
    let mut point = IndexMap::new();
    for sym in model.registry().iter() {
        let v = match sym.name() {
            V_PAR => s.state.v_par,
            V_PERP => s.state.v_perp,
            PHI => s.state.phi,
            PHI_DOT => s.state.phi_dot,
            W => s.wind.w,
            ZETA => s.wind.zeta,
            W_DOT => s.wind.w_dot,
            ZETA_DOT => s.wind.zeta_dot,
            name => match Control::ALL.iter().find(|c| c.name() == name) {
                Some(c) => s.controls[c.index()],
                None => name.parse::<Param>().map(|p| model.config().value(p)).unwrap_or(f64::NAN),
            },
        };
        point.insert(sym.clone(), v);
    }
    point
}

/// Fills the true and noisy sensor columns. Samples where a channel is
/// undefined (a vanishing denominator) are recorded as missing.
pub fn measure(
    traj: &mut Trajectory,
    model: &DynamicsModel,
    sensors: &SensorSet,
    noise: &NoiseSpec,
) -> Result<(), SimError> {
    if noise.sigma.len() > 1 && noise.sigma.len() != sensors.len() {
        return Err(SimError::InvalidConfig(format!(
            "{} noise levels given for {} sensor channels",
            noise.sigma.len(),
            sensors.len()
        )));
    }
    if noise.sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(SimError::InvalidConfig("noise sigma must be non-negative".into()));
    }
    let exprs = sensors.exprs();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    traj.channels = sensors.labels().iter().map(|s| s.to_string()).collect();
    for s in &mut traj.samples {
        let point = bind_sample(model, s);
        let mut ev = Evaluator::new(&point);
        s.truth = exprs.iter().map(|e| ev.eval(e).ok().filter(|v| v.is_finite())).collect();
        s.noisy = s
            .truth
            .iter()
            .enumerate()
            .map(|(i, v)| {
                // Draw for every channel so streams do not shift when a
                // sample goes missing.
                let z = std_normal.sample(&mut rng);
                v.map(|v| v + noise.sigma_for(i) * z)
            })
            .collect();
    }
    Ok(())
}
