//! Square-root unscented Kalman filter over the extended state of a
//! [`DynamicsModel`], run against simulated measurement streams.
//!
//! Convergence of the filter is local: it says nothing about whether the
//! wind direction is observable from other initial guesses.

mod io;
mod sqrt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Symbol, Tape};
use crate::models::{
    build_dynamics, build_sensors, DynamicsModel, ModelError, Param, SensorConfig, SensorKind, SensorSet,
    StateConfig, PHI, PHI_DOT, V_PAR, V_PERP, W, ZETA,
};
use crate::simulator::{Sample, Trajectory};

pub use io::write_estimates;
pub use sqrt::{cholupdate, refactor, tria};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("filter diverged at t = {t}: non-finite sigma point")]
    NonFiniteSigmaPoint { t: f64 },
    #[error("filter diverged at t = {t}: covariance could not be refactored")]
    CholeskyDowndateFailure { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("filter model: {0}")]
    Eval(#[from] EvalError),
}

impl EstimatorError {
    /// Time of failure for divergence errors.
    pub fn time(&self) -> Option<f64> {
        match self {
            EstimatorError::NonFiniteSigmaPoint { t } | EstimatorError::CholeskyDowndateFailure { t } => Some(*t),
            _ => None,
        }
    }
}

fn one_r() -> Vec<f64> {
    vec![1e-7]
}

fn one_q() -> Vec<f64> {
    vec![1e-10]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UkfConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Diagonal of the measurement covariance; a single value applies to
    /// every channel.
    pub r: Vec<f64>,
    /// Diagonal of the process covariance per step; a single value applies
    /// to every state.
    pub q: Vec<f64>,
    pub dt: f64,
    /// Initial mean over the filter state. Empty: the true initial state.
    pub initial_mean: Vec<f64>,
    /// Initial marginal standard deviations (diagonal square-root factor).
    pub initial_std: Vec<f64>,
}

impl Default for UkfConfig {
    fn default() -> Self {
        UkfConfig {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
            r: one_r(),
            q: one_q(),
            dt: 0.01,
            initial_mean: Vec::new(),
            initial_std: vec![0.1],
        }
    }
}

fn expand(v: &[f64], n: usize, what: &str) -> Result<Vec<f64>, EstimatorError> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v.to_vec()),
        k => Err(EstimatorError::InvalidConfig(format!("{what} has {k} entries, expected 1 or {n}"))),
    }
}

impl UkfConfig {
    pub fn validate(&self, states: usize, channels: usize) -> Result<(), EstimatorError> {
        let bad = |m: String| Err(EstimatorError::InvalidConfig(m));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(states as f64 + self.kappa > 0.0) {
            return bad("n + kappa must be positive".into());
        }
        for (name, v, n) in [("r", &self.r, channels), ("initial_std", &self.initial_std, states)] {
            if expand(v, n, name)?.iter().any(|x| !(*x > 0.0)) {
                return bad(format!("{name} entries must be strictly positive"));
            }
        }
        // Zero process noise is allowed for open-loop checks.
        if expand(&self.q, states, "q")?.iter().any(|x| !(*x >= 0.0)) {
            return bad("q entries must be non-negative".into());
        }
        if !self.initial_mean.is_empty() && self.initial_mean.len() != states {
            return bad(format!("initial_mean has {} entries, expected {states}", self.initial_mean.len()));
        }
        Ok(())
    }
}

/// Mean and lower-triangular square-root covariance at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub t: f64,
    pub mean: DVector<f64>,
    pub sqrt_cov: DMatrix<f64>,
    /// Number of times the covariance factor had to be rebuilt.
    pub repairs: usize,
}

impl FilterState {
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.sqrt_cov * self.sqrt_cov.transpose()
    }

    pub fn std(&self) -> Vec<f64> {
        self.sqrt_cov.row_iter().map(|r| r.norm()).collect()
    }
}

/// Dynamics and measurement functions compiled for fast evaluation.
#[derive(Clone, Debug)]
pub struct FilterModel {
    names: Vec<String>,
    dynamics: Tape,
    channels: Vec<Tape>,
    labels: Vec<String>,
    angular: Vec<bool>,
    /// Values for non-base states (parameters) when no mean is configured.
    defaults: Vec<f64>,
}

impl FilterModel {
    pub fn new(model: &DynamicsModel, sensors: &SensorSet) -> Result<Self, EstimatorError> {
        if !model.config().control_states.is_empty() {
            return Err(EstimatorError::InvalidConfig("controls carried as states are not supported".into()));
        }
        let mut inputs: Vec<Symbol> = model.vars().to_vec();
        inputs.extend(model.controls().iter().cloned());
        let dynamics = Tape::compile(&model.expanded(), &inputs)?;
        let channels = sensors
            .channels
            .iter()
            .map(|c| Tape::compile(std::slice::from_ref(&c.expr), &inputs))
            .collect::<Result<_, _>>()?;
        let defaults = model
            .vars()
            .iter()
            .map(|s| s.name().parse::<Param>().map(|p| model.config().value(p)).unwrap_or(0.0))
            .collect();
        Ok(FilterModel {
            names: model.vars().iter().map(|s| s.name().to_string()).collect(),
            dynamics,
            channels,
            labels: sensors.labels().iter().map(|s| s.to_string()).collect(),
            angular: sensors.channels.iter().map(|c| c.angular).collect(),
            defaults,
        })
    }

    /// The six-state calibrated vision filter with unit parameters.
    pub fn calibrated(drag: bool) -> Self {
        let model = build_dynamics(&StateConfig { drag, ..Default::default() }).expect("calibrated model");
        let sensors = build_sensors(&SensorConfig::new(SensorKind::CalibratedVision), &model).expect("vision sensors");
        FilterModel::new(&model, &sensors).expect("calibrated filter model")
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_angular(&self, channel: usize) -> bool {
        self.angular[channel]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn inputs(&self, x: &[f64], u: [f64; 3]) -> Vec<f64> {
        let mut v = Vec::with_capacity(x.len() + 3);
        v.extend_from_slice(x);
        v.extend_from_slice(&u);
        v
    }

    fn rate(&self, x: &[f64], u: [f64; 3]) -> Result<Vec<f64>, EvalError> {
        self.dynamics.eval(&self.inputs(x, u))
    }

    /// One classical RK4 step with the controls held constant.
    pub fn propagate(&self, x: &[f64], u: [f64; 3], dt: f64) -> Result<Vec<f64>, EvalError> {
        let axpy = |h: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
        let k1 = self.rate(x, u)?;
        let k2 = self.rate(&axpy(dt / 2.0, &k1), u)?;
        let k3 = self.rate(&axpy(dt / 2.0, &k2), u)?;
        let k4 = self.rate(&axpy(dt, &k3), u)?;
        Ok((0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    /// Predicted value of one channel, `None` where it is undefined.
    pub fn measure(&self, channel: usize, x: &[f64], u: [f64; 3]) -> Option<f64> {
        self.channels[channel].eval(&self.inputs(x, u)).ok().map(|v| v[0]).filter(|v| v.is_finite())
    }

    /// The filter state implied by a simulator sample: body and wind states
    /// from the sample, parameters at their configured values.
    pub fn state_of(&self, s: &Sample) -> Vec<f64> {
        self.names
            .iter()
            .zip(&self.defaults)
            .map(|(n, d)| match n.as_str() {
                V_PAR => s.state.v_par,
                V_PERP => s.state.v_perp,
                PHI => s.state.phi,
                PHI_DOT => s.state.phi_dot,
                W => s.wind.w,
                ZETA => s.wind.zeta,
                "w_dot" => s.wind.w_dot,
                "zeta_dot" => s.wind.zeta_dot,
                _ => *d,
            })
            .collect()
    }
}

/// Residual folded into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a - two_pi * (a / two_pi).round();
    if r <= -std::f64::consts::PI {
        r + two_pi
    } else {
        r
    }
}

/// Unscented-transform weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub gamma: f64,
    pub mean0: f64,
    pub cov0: f64,
    /// Weight of every non-central point (same for mean and covariance).
    pub other: f64,
}

impl Weights {
    pub fn new(n: usize, cfg: &UkfConfig) -> Self {
        let n = n as f64;
        let lambda = cfg.alpha * cfg.alpha * (n + cfg.kappa) - n;
        let mean0 = lambda / (n + lambda);
        Weights {
            gamma: (n + lambda).sqrt(),
            mean0,
            cov0: mean0 + 1.0 - cfg.alpha * cfg.alpha + cfg.beta,
            other: 1.0 / (2.0 * (n + lambda)),
        }
    }
}

/// `2n + 1` sigma points as columns: the mean, then `mean + gamma S e_i`,
/// then `mean - gamma S e_i`.
pub fn sigma_points(mean: &DVector<f64>, sqrt_cov: &DMatrix<f64>, w: &Weights) -> DMatrix<f64> {
    let n = mean.len();
    let mut x = DMatrix::zeros(n, 2 * n + 1);
    x.set_column(0, mean);
    for i in 0..n {
        let d = sqrt_cov.column(i) * w.gamma;
        x.set_column(1 + i, &(mean + &d));
        x.set_column(1 + n + i, &(mean - &d));
    }
    x
}

/// Weighted mean of sigma-point columns, accumulated as an offset from the
/// central point to limit cancellation when the central weight is large.
pub fn weighted_mean(points: &DMatrix<f64>, w: &Weights) -> DVector<f64> {
    let c = points.column(0).into_owned();
    let mut acc = DVector::zeros(c.len());
    for j in 1..points.ncols() {
        acc += (points.column(j) - &c) * w.other;
    }
    c + acc
}

/// The square-root UKF itself.
#[derive(Clone, Debug)]
pub struct Ukf {
    pub model: FilterModel,
    pub cfg: UkfConfig,
    weights: Weights,
    sqrt_q: DVector<f64>,
    sqrt_r: DVector<f64>,
}

impl Ukf {
    pub fn new(model: FilterModel, cfg: UkfConfig) -> Result<Self, EstimatorError> {
        let (n, m) = (model.dim(), model.channel_labels().len());
        cfg.validate(n, m)?;
        let weights = Weights::new(n, &cfg);
        let sqrt_q = DVector::from_vec(expand(&cfg.q, n, "q")?).map(f64::sqrt);
        let sqrt_r = DVector::from_vec(expand(&cfg.r, m, "r")?).map(f64::sqrt);
        Ok(Ukf { model, cfg, weights, sqrt_q, sqrt_r })
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Initial state from the configuration, falling back to `truth` for
    /// the mean.
    pub fn initial_state(&self, t: f64, truth: &[f64]) -> FilterState {
        let n = self.model.dim();
        let mean = if self.cfg.initial_mean.is_empty() { truth.to_vec() } else { self.cfg.initial_mean.clone() };
        let std = expand(&self.cfg.initial_std, n, "initial_std").expect("validated");
        FilterState {
            t,
            mean: DVector::from_vec(mean),
            sqrt_cov: DMatrix::from_diagonal(&DVector::from_vec(std)),
            repairs: 0,
        }
    }

    /// Propagates sigma points through one RK4 step and rebuilds the
    /// square-root factor by QR of the weighted deviations plus `sqrt(Q)`.
    pub fn predict(&self, fs: &FilterState, u: [f64; 3]) -> Result<FilterState, EstimatorError> {
        let n = self.model.dim();
        let w = &self.weights;
        let t = fs.t + self.cfg.dt;
        let chi = sigma_points(&fs.mean, &fs.sqrt_cov, w);
        let mut prop = DMatrix::zeros(n, 2 * n + 1);
        for j in 0..chi.ncols() {
            let col: Vec<f64> = chi.column(j).iter().copied().collect();
            let next = self
                .model
                .propagate(&col, u, self.cfg.dt)
                .map_err(|_| EstimatorError::NonFiniteSigmaPoint { t })?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(EstimatorError::NonFiniteSigmaPoint { t });
            }
            prop.set_column(j, &DVector::from_vec(next));
        }
        let mean = weighted_mean(&prop, w);
        let mut a = DMatrix::zeros(3 * n, n);
        for j in 1..prop.ncols() {
            let d = (prop.column(j) - &mean) * w.other.sqrt();
            a.set_row(j - 1, &d.transpose());
        }
        for i in 0..n {
            a[(2 * n + i, i)] = self.sqrt_q[i];
        }
        let d0 = prop.column(0) - &mean;
        let (sqrt_cov, repaired) = self.central_update(a, &d0, t)?;
        Ok(FilterState { t, mean, sqrt_cov, repairs: fs.repairs + repaired as usize })
    }

    /// QR factor of `a` with the central point's (possibly negative)
    /// weight folded in by a rank-one update or downdate.
    fn central_update(
        &self,
        a: DMatrix<f64>,
        d0: &DVector<f64>,
        t: f64,
    ) -> Result<(DMatrix<f64>, bool), EstimatorError> {
        let w0 = self.weights.cov0;
        let s = tria(a.clone());
        let mut updated = s.clone();
        if w0 == 0.0 || cholupdate(&mut updated, &(d0 * w0.abs().sqrt()), w0.signum()) {
            return Ok((updated, false));
        }
        let p = a.transpose() * &a + d0 * d0.transpose() * w0;
        refactor(&p).map(|(l, _)| (l, true)).ok_or(EstimatorError::CholeskyDowndateFailure { t })
    }

    /// Measurement update with the channels that are present in `z` and
    /// defined at every sigma point. Returns the new state and the
    /// innovation norm over the used channels (`None` if none were used).
    pub fn update(
        &self,
        fs: &FilterState,
        z: &[Option<f64>],
        u: [f64; 3],
    ) -> Result<(FilterState, Option<f64>), EstimatorError> {
        let n = self.model.dim();
        let w = &self.weights;
        let chi = sigma_points(&fs.mean, &fs.sqrt_cov, w);
        let cols: Vec<Vec<f64>> = (0..chi.ncols()).map(|j| chi.column(j).iter().copied().collect()).collect();

        let mut used = Vec::new();
        let mut ys: Vec<Vec<f64>> = Vec::new();
        for (k, zk) in z.iter().enumerate().take(self.model.channel_labels().len()) {
            if !zk.is_some_and(f64::is_finite) {
                continue;
            }
            let vals: Option<Vec<f64>> = cols.iter().map(|x| self.model.measure(k, x, u)).collect();
            if let Some(v) = vals {
                used.push(k);
                ys.push(v);
            }
        }
        if used.is_empty() {
            return Ok((fs.clone(), None));
        }
        let m = used.len();
        let np = 2 * n + 1;
        // Deviations relative to the central point, wrapped for angles.
        let mut y = DMatrix::zeros(m, np);
        for (r, (&k, v)) in used.iter().zip(&ys).enumerate() {
            for j in 0..np {
                let d = v[j] - v[0];
                y[(r, j)] = if self.model.is_angular(k) { wrap_angle(d) } else { d };
            }
        }
        let y_mean_off = weighted_mean(&y, w);
        let y_dev = y.map_with_location(|r, _, v| v - y_mean_off[r]);
        let x_dev = DMatrix::from_fn(n, np, |i, j| chi[(i, j)] - fs.mean[i]);

        let mut a = DMatrix::zeros(2 * n + m, m);
        for j in 1..np {
            a.set_row(j - 1, &(y_dev.column(j) * w.other.sqrt()).transpose());
        }
        for (r, &k) in used.iter().enumerate() {
            a[(2 * n + r, r)] = self.sqrt_r[k];
        }
        let d0 = y_dev.column(0).into_owned();
        let (sy, mut repaired) = self.central_update(a, &d0, fs.t)?;

        let mut pxy = x_dev.column(0) * y_dev.column(0).transpose() * w.cov0;
        for j in 1..np {
            pxy += x_dev.column(j) * y_dev.column(j).transpose() * w.other;
        }
        // K = Pxy (Sy Sy^T)^-1 via two triangular solves on the transpose.
        let tmp = sy.solve_lower_triangular(&pxy.transpose()).ok_or(EstimatorError::CholeskyDowndateFailure { t: fs.t })?;
        let k_t = sy
            .transpose()
            .solve_upper_triangular(&tmp)
            .ok_or(EstimatorError::CholeskyDowndateFailure { t: fs.t })?;
        let gain = k_t.transpose();

        let innovation = DVector::from_fn(m, |r, _| {
            let k = used[r];
            let predicted = ys[r][0] + y_mean_off[r];
            let d = z[k].unwrap() - predicted;
            if self.model.is_angular(k) {
                wrap_angle(d)
            } else {
                d
            }
        });
        let mean = &fs.mean + &gain * &innovation;
        let ukt = &gain * &sy;
        let mut s = fs.sqrt_cov.clone();
        let mut ok = true;
        for j in 0..m {
            if !cholupdate(&mut s, &ukt.column(j).into_owned(), -1.0) {
                ok = false;
                break;
            }
        }
        if !ok {
            let p = fs.covariance() - &ukt * ukt.transpose();
            s = refactor(&p).ok_or(EstimatorError::CholeskyDowndateFailure { t: fs.t })?.0;
            repaired = true;
        }
        if mean.iter().any(|v| !v.is_finite()) || s.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFiniteSigmaPoint { t: fs.t });
        }
        Ok((FilterState { t: fs.t, mean, sqrt_cov: s, repairs: fs.repairs + repaired as usize }, Some(innovation.norm())))
    }
}

/// One row of the estimate series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub t: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub innovation_norm: Option<f64>,
}

/// Summary of a filter run. Errors in ζ are circular distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    pub duration: f64,
    pub final_zeta_error: f64,
    pub zeta_error_at_10pct: f64,
    pub zeta_rmse_first_20pct: f64,
    pub zeta_rmse_final_20pct: f64,
    pub final_zeta_std: f64,
    /// The estimate left any plausible range (magnitude or spread above 1e6).
    pub diverged: bool,
    pub repairs: usize,
    /// Channel samples absent from the measurement stream.
    pub missing_measurements: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterRun {
    pub states: Vec<String>,
    pub estimates: Vec<Estimate>,
    pub metrics: Metrics,
}

pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Runs the filter over a measured trajectory: an update at the first
/// sample, then predict (with the controls of the previous sample) and
/// update at every following one. The trajectory step must equal `dt`.
pub fn run_filter(traj: &Trajectory, ukf: &Ukf) -> Result<FilterRun, EstimatorError> {
    if traj.samples.len() < 2 {
        return Err(EstimatorError::InvalidConfig("trajectory needs at least two samples".into()));
    }
    if (traj.dt - ukf.cfg.dt).abs() > 1e-12 * traj.dt.max(1.0) {
        return Err(EstimatorError::InvalidConfig(format!(
            "trajectory step {} differs from filter dt {}",
            traj.dt, ukf.cfg.dt
        )));
    }
    if traj.channels != ukf.model.channel_labels() {
        return Err(EstimatorError::InvalidConfig(format!(
            "trajectory channels {:?} do not match the filter's {:?}",
            traj.channels,
            ukf.model.channel_labels()
        )));
    }
    let zeta = ukf
        .model
        .index_of(ZETA)
        .ok_or_else(|| EstimatorError::InvalidConfig("filter state has no wind direction".into()))?;
    let first = &traj.samples[0];
    let mut fs = ukf.initial_state(first.t, &ukf.model.state_of(first));
    let mut estimates = Vec::with_capacity(traj.samples.len());
    let mut missing = 0;
    for (k, s) in traj.samples.iter().enumerate() {
        if k > 0 {
            fs = ukf.predict(&fs, traj.samples[k - 1].controls)?;
            fs.t = s.t;
        }
        let (next, innov) = ukf.update(&fs, &s.noisy, s.controls)?;
        missing += s.noisy.iter().filter(|v| v.is_none()).count();
        fs = next;
        estimates.push(Estimate { t: s.t, mean: fs.mean.iter().copied().collect(), std: fs.std(), innovation_norm: innov });
    }

    let errors: Vec<f64> =
        estimates.iter().zip(&traj.samples).map(|(e, s)| circular_distance(e.mean[zeta], s.wind.zeta)).collect();
    let n = errors.len();
    let fifth = (n / 5).max(1);
    let rms = |xs: &[f64]| (xs.iter().map(|e| e * e).sum::<f64>() / xs.len() as f64).sqrt();
    let last = estimates.last().expect("non-empty");
    let metrics = Metrics {
        steps: n,
        duration: traj.duration(),
        final_zeta_error: errors[n - 1],
        zeta_error_at_10pct: errors[n / 10],
        zeta_rmse_first_20pct: rms(&errors[..fifth]),
        zeta_rmse_final_20pct: rms(&errors[n - fifth..]),
        final_zeta_std: last.std[zeta],
        diverged: last.mean.iter().chain(&last.std).any(|v| v.abs() > 1e6),
        repairs: fs.repairs,
        missing_measurements: missing,
    };
    Ok(FilterRun { states: ukf.model.state_names().to_vec(), estimates, metrics })
}
