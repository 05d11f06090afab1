use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Control, DynamicsModel, ModelError, Param, PHI, PHI_DOT, V_PAR, V_PERP};
use crate::expr::{substitute, Expr, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    /// `[phi, a_perp/a_par, v_perp/v_par]`
    CalibratedVision,
    /// `[k_s1 phi, k_s2 a_perp/a_par + k_s3, k_s4 v_perp/v_par + k_s5]`
    UncalibratedVision,
    /// Direction of acceleration instead of velocity, plus the two thrust
    /// commands as efference copies.
    CalibratedInertial,
    UncalibratedInertial,
}

impl SensorKind {
    pub fn is_calibrated(self) -> bool {
        matches!(self, SensorKind::CalibratedVision | SensorKind::CalibratedInertial)
    }

    pub fn is_inertial(self) -> bool {
        matches!(self, SensorKind::CalibratedInertial | SensorKind::UncalibratedInertial)
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorKind::CalibratedVision => "calibrated-vision",
            SensorKind::UncalibratedVision => "uncalibrated-vision",
            SensorKind::CalibratedInertial => "calibrated-inertial",
            SensorKind::UncalibratedInertial => "uncalibrated-inertial",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub kind: SensorKind,
    /// Measure the turn rate instead of the heading (`k_s1 phi_dot + k_s0`).
    #[serde(default)]
    pub phi_dot: bool,
    /// Append an extra turn-rate channel `k_s6 phi_dot + k_s7`.
    #[serde(default)]
    pub augmented_phi_dot: bool,
}

impl SensorConfig {
    pub fn new(kind: SensorKind) -> Self {
        SensorConfig { kind, phi_dot: false, augmented_phi_dot: false }
    }
}

#[derive(Clone, Debug)]
pub struct SensorChannel {
    pub label: String,
    pub expr: Expr,
    /// Residuals on this channel are angles and wrap at +-pi.
    pub angular: bool,
}

/// Ordered measurement functions `h(x)`.
#[derive(Clone, Debug)]
pub struct SensorSet {
    pub config: SensorConfig,
    pub channels: Vec<SensorChannel>,
}

impl SensorSet {
    pub fn exprs(&self) -> Vec<Expr> {
        self.channels.iter().map(|c| c.expr.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.label.as_str()).collect()
    }
}

pub fn build_sensors(cfg: &SensorConfig, model: &DynamicsModel) -> Result<SensorSet, ModelError> {
    if cfg.kind.is_inertial() && !model.config().drag {
        return Err(ModelError::IncompatibleConfig(
            "inertial sensing needs the drag model to express accelerations".into(),
        ));
    }
    let state = model.config();
    let k = |p: Param| -> Expr {
        if cfg.kind.is_calibrated() {
            return Expr::real(if p == Param::Ks0 || p == Param::Ks3 || p == Param::Ks5 || p == Param::Ks7 {
                0.0
            } else {
                1.0
            });
        }
        match model.symbol(p.name()) {
            Some(s) if state.is_unknown(p) => Expr::sym(s),
            _ => Expr::real(state.value(p)),
        }
    };
    let s = |n: &str| Expr::sym(model.symbol(n).expect("base state"));
    let (a_par, a_perp) = model.airspeed();

    let mut channels = Vec::new();
    if cfg.phi_dot {
        channels.push(SensorChannel {
            label: "turn_rate".into(),
            expr: k(Param::Ks1) * s(PHI_DOT) + k(Param::Ks0),
            angular: false,
        });
    } else {
        channels.push(SensorChannel {
            label: "heading".into(),
            expr: k(Param::Ks1) * s(PHI),
            angular: true,
        });
    }
    channels.push(SensorChannel {
        label: "airspeed_angle".into(),
        expr: k(Param::Ks2) * (a_perp / a_par) + k(Param::Ks3),
        angular: false,
    });

    if cfg.kind.is_inertial() {
        // Written over placeholder accelerations, then the dynamics rows are
        // substituted in so the channel depends on states and controls only.
        let vd_par = Symbol::new("v_par_dot");
        let vd_perp = Symbol::new("v_perp_dot");
        let raw = k(Param::Ks4) * (Expr::sym(&vd_perp) / Expr::sym(&vd_par)) + k(Param::Ks5);
        let rows = model.expanded();
        let bindings = HashMap::from([(vd_par, rows[0].clone()), (vd_perp, rows[1].clone())]);
        channels.push(SensorChannel {
            label: "acceleration_angle".into(),
            expr: substitute(&raw, &bindings),
            angular: false,
        });
        for c in [Control::Par, Control::Perp] {
            channels.push(SensorChannel {
                label: c.name().into(),
                expr: Expr::sym(model.control(c)),
                angular: false,
            });
        }
    } else {
        channels.push(SensorChannel {
            label: "drift_angle".into(),
            expr: k(Param::Ks4) * (s(V_PERP) / s(V_PAR)) + k(Param::Ks5),
            angular: false,
        });
    }

    if cfg.augmented_phi_dot {
        channels.push(SensorChannel {
            label: "turn_rate_aux".into(),
            expr: k(Param::Ks6) * s(PHI_DOT) + k(Param::Ks7),
            angular: false,
        });
    }

    let set = SensorSet { config: cfg.clone(), channels };
    model.check_symbols(&set.exprs())?;
    Ok(set)
}
