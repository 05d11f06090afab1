use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{airspeed, BodyParams, Trajectory};
use crate::expr::{substitute, Expr};
use crate::models::{
    build_dynamics, build_sensors, Control, Param, SensorConfig, SensorKind, StateConfig, PHI, PHI_DOT, V_PAR,
    V_PERP, W, ZETA,
};
use crate::observability::{
    build_algebra, lie_derivative, operating_point, rank_at, Algebra, AlgebraEntry, AlgebraSpec,
    ObservabilityError, Query, TolPolicy,
};

/// Wind-direction verdict for a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryLabel {
    Unobservable,
    /// Observable with calibrated sensors, but the uncalibrated system is not.
    ObservableNotCalibratable,
    /// Observable even with uncalibrated sensors and motors.
    Calibratable,
}

impl fmt::Display for TrajectoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryLabel::Unobservable => "unobservable",
            TrajectoryLabel::ObservableNotCalibratable => "observable-not-calibratable",
            TrajectoryLabel::Calibratable => "calibratable",
        })
    }
}

impl std::str::FromStr for TrajectoryLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unobservable" => Ok(TrajectoryLabel::Unobservable),
            "observable-not-calibratable" | "observable" => Ok(TrajectoryLabel::ObservableNotCalibratable),
            "calibratable" => Ok(TrajectoryLabel::Calibratable),
            other => Err(format!("unknown trajectory label `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    /// Magnitudes at or below this count as zero.
    pub eps: f64,
    /// Number of consecutive sample intervals a predicate must hold for.
    pub dwell: usize,
    /// Require forward or lateral thrust for the calibrated verdict.
    pub require_thrust: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { eps: 1e-6, dwell: 1, require_thrust: true }
    }
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    a - two_pi * ((a + std::f64::consts::PI) / two_pi).floor()
}

/// Labels a trajectory from the required-state and required-actuation
/// conditions, checked sample by sample:
///
/// * observable: non-zero ground speed and airspeed, a change in course or
///   orientation, and (by default) forward or lateral thrust;
/// * calibratable: additionally a non-zero turn rate with both forward and
///   lateral thrust at once.
pub fn classify_trajectory(traj: &Trajectory, cfg: &ClassifyConfig) -> TrajectoryLabel {
    let n = traj.samples.len();
    if n < 2 {
        return TrajectoryLabel::Unobservable;
    }
    let course = |k: usize| {
        let x = &traj.samples[k].state;
        x.phi + x.v_perp.atan2(x.v_par)
    };
    let nz = |v: f64| v.abs() > cfg.eps;
    let mut obs = Vec::with_capacity(n - 1);
    let mut cal = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let s = &traj.samples[k];
        let x = &s.state;
        let (a_par, a_perp) = airspeed(x, &s.wind);
        let moving = nz(x.v_par.hypot(x.v_perp)) && nz(a_par.hypot(a_perp));
        let dt = traj.samples[k + 1].t - s.t;
        let course_rate = wrap(course(k + 1) - course(k)) / dt;
        let turning = nz(x.phi_dot);
        let [u_par, u_perp, _] = s.controls;
        let thrust = !cfg.require_thrust || nz(u_par) || nz(u_perp);
        obs.push(moving && (nz(course_rate) || turning) && thrust);
        cal.push(moving && turning && nz(u_par) && nz(u_perp));
    }
    let dwells = |flags: &[bool]| {
        let mut run = 0;
        flags.iter().any(|f| {
            run = if *f { run + 1 } else { 0 };
            run >= cfg.dwell.max(1)
        })
    };
    if dwells(&cal) {
        TrajectoryLabel::Calibratable
    } else if dwells(&obs) {
        TrajectoryLabel::ObservableNotCalibratable
    } else {
        TrajectoryLabel::Unobservable
    }
}

/// Rank-test verdicts at one trajectory sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankVerdict {
    pub t: f64,
    /// Calibrated model, Lie derivatives along the realized vector field.
    pub observable: bool,
    /// Uncalibrated model, control-affine second-order algebra.
    pub calibratable: bool,
    pub observable_ranks: (usize, usize),
    pub calibratable_ranks: (usize, usize),
}

fn known_values(p: &BodyParams) -> StateConfig {
    let values = [
        (Param::CPar, p.c_par),
        (Param::CPerp, p.c_perp),
        (Param::CPhi, p.c_phi),
        (Param::Mass, p.m),
        (Param::Inertia, p.inertia),
        (Param::Km1, p.k_m1),
        (Param::Km2, p.k_m2),
        (Param::Km3, p.k_m3),
        (Param::Km4, p.k_m4),
    ];
    StateConfig { drag: p.drag, values: values.into_iter().collect(), ..Default::default() }
}

/// Evenly spaced interior sample indices.
pub fn representative_indices(traj: &Trajectory, count: usize) -> Vec<usize> {
    let n = traj.samples.len();
    if n < 3 {
        return (0..n).collect();
    }
    (1..=count).map(|i| (i * (n - 1) / (count + 1)).max(1)).collect()
}

/// Point-wise rank verdicts for ζ at `indices`.
///
/// The calibrated test differentiates along the vector field actually
/// flown (drift plus the applied controls, held at their sampled values) at
/// the sampled state, so a steady flight whose thrust balances drag stays
/// unobservable. The calibratable test uses the uncalibrated-vision model
/// with unknown body, motor and sensor parameters and the second-order
/// algebra over the controls that are non-zero at the sample. It is
/// evaluated at a prime point with the states that vanish at the sample
/// pinned to zero, since raw trajectory values (such as `phi = 0`) are often
/// non-generic.
pub fn rank_verdicts(
    traj: &Trajectory,
    params: &BodyParams,
    indices: &[usize],
    cfg: &ClassifyConfig,
    tol: &TolPolicy,
) -> Result<Vec<RankVerdict>, ObservabilityError> {
    let cal_model = build_dynamics(&known_values(params))?;
    let cal_sensors = build_sensors(&SensorConfig::new(SensorKind::CalibratedVision), &cal_model)?;
    let unc_cfg = StateConfig {
        drag: params.drag,
        unknown: vec![
            Param::CPar,
            Param::CPerp,
            Param::CPhi,
            Param::Ks1,
            Param::Ks2,
            Param::Ks3,
            Param::Ks4,
            Param::Ks5,
            Param::Mass,
            Param::Inertia,
            Param::Km1,
            Param::Km3,
        ],
        ..Default::default()
    };
    let unc_model = build_dynamics(&unc_cfg)?;
    let unc_sensors = build_sensors(&SensorConfig::new(SensorKind::UncalibratedVision), &unc_model)?;
    let zeta_cal = Query::parse(ZETA, &cal_model)?;
    let zeta_unc = Query::parse(ZETA, &unc_model)?;
    let expanded = cal_model.expanded();
    let state_names = [V_PAR, V_PERP, PHI, PHI_DOT, W, ZETA];

    let mut out = Vec::with_capacity(indices.len());
    for &k in indices {
        let s = &traj.samples[k];
        let values = [s.state.v_par, s.state.v_perp, s.state.phi, s.state.phi_dot, s.wind.w, s.wind.zeta];
        let actual: Vec<(String, f64)> = state_names.iter().zip(values).map(|(n, v)| (n.to_string(), v)).collect();

        let bind: HashMap<_, _> =
            Control::ALL.iter().map(|c| (cal_model.control(*c).clone(), Expr::real(s.controls[c.index()]))).collect();
        let realized: Vec<Expr> = expanded.iter().map(|e| substitute(e, &bind)).collect();
        let mut entries = Vec::new();
        let mut current = cal_sensors.exprs();
        for order in 0..3 {
            if order > 0 {
                current = lie_derivative(&current, &realized, cal_model.vars());
            }
            let label = format!("{}h", "LF ".repeat(order));
            for (i, e) in current.iter().enumerate() {
                entries.push(AlgebraEntry {
                    label: format!("{label}[{}]", i + 1),
                    path: vec![],
                    channel: i,
                    expr: e.clone(),
                });
            }
        }
        let realized_algebra = Algebra::new(entries, cal_model.vars().to_vec());
        let point = operating_point(&cal_model, &[], &actual)?;
        let (observable, observable_ranks) =
            match rank_at(&realized_algebra, &point, std::slice::from_ref(&zeta_cal), tol) {
                Ok(r) => (r.queries[0].observable, (r.rank, r.queries[0].augmented_rank)),
                Err(ObservabilityError::SingularEvaluation(_)) => (false, (0, 0)),
                Err(e) => return Err(e),
            };

        let active: Vec<Control> =
            Control::ALL.into_iter().filter(|c| s.controls[c.index()].abs() > cfg.eps).collect();
        let vanishing: Vec<(String, f64)> =
            actual.iter().filter(|(_, v)| v.abs() <= cfg.eps).map(|(n, _)| (n.clone(), 0.0)).collect();
        let spec = AlgebraSpec::new(2, &active);
        let algebra = build_algebra(&unc_model, &unc_sensors, &spec)?;
        let point = operating_point(&unc_model, &active, &vanishing)?;
        let (calibratable, calibratable_ranks) = match rank_at(&algebra, &point, std::slice::from_ref(&zeta_unc), tol)
        {
            Ok(r) => (r.queries[0].observable, (r.rank, r.queries[0].augmented_rank)),
            Err(ObservabilityError::SingularEvaluation(_)) => (false, (0, 0)),
            Err(e) => return Err(e),
        };
        out.push(RankVerdict { t: s.t, observable, calibratable, observable_ranks, calibratable_ranks });
    }
    Ok(out)
}

impl RankVerdict {
    pub fn label(&self) -> TrajectoryLabel {
        if self.calibratable && self.observable {
            TrajectoryLabel::Calibratable
        } else if self.observable {
            TrajectoryLabel::ObservableNotCalibratable
        } else {
            TrajectoryLabel::Unobservable
        }
    }
}

/// The strongest label reached at any of the verdicts.
pub fn rank_label(verdicts: &[RankVerdict]) -> TrajectoryLabel {
    verdicts.iter().map(RankVerdict::label).max().unwrap_or(TrajectoryLabel::Unobservable)
}
