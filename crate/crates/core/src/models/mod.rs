//! Symbolic dynamics and sensor suites for a planar flyer in wind.
//!
//! The extended state always starts with the six body/wind states
//! `[v_par, v_perp, phi, phi_dot, w, zeta]`, optionally followed by the wind
//! rates `[w_dot, zeta_dot]`, then by every parameter flagged as unknown.
//! Unknown parameters are states with zero dynamics; known parameters are
//! substituted by their numeric value when the model is built.

mod params;
mod sensors;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, Registry, Symbol};

pub use params::Param;
pub use sensors::{build_sensors, SensorChannel, SensorConfig, SensorKind, SensorSet};

pub const V_PAR: &str = "v_par";
pub const V_PERP: &str = "v_perp";
pub const PHI: &str = "phi";
pub const PHI_DOT: &str = "phi_dot";
pub const W: &str = "w";
pub const ZETA: &str = "zeta";
pub const W_DOT: &str = "w_dot";
pub const ZETA_DOT: &str = "zeta_dot";

pub const BASE_STATES: [&str; 6] = [V_PAR, V_PERP, PHI, PHI_DOT, W, ZETA];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("incompatible configuration: {0}")]
    IncompatibleConfig(String),
    #[error("symbol `{0}` is referenced but not declared by the model")]
    UndeclaredSymbol(String),
}

/// Thrust or torque channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Control {
    #[serde(rename = "u_par")]
    Par,
    #[serde(rename = "u_perp")]
    Perp,
    #[serde(rename = "u_phi")]
    Phi,
}

impl Control {
    pub const ALL: [Control; 3] = [Control::Par, Control::Perp, Control::Phi];

    pub fn name(self) -> &'static str {
        match self {
            Control::Par => "u_par",
            Control::Perp => "u_perp",
            Control::Phi => "u_phi",
        }
    }

    pub fn field(self) -> Field {
        match self {
            Control::Par => Field::Par,
            Control::Perp => Field::Perp,
            Control::Phi => Field::Phi,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the four vector fields of the control-affine decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "f0")]
    Drift,
    #[serde(rename = "fpar")]
    Par,
    #[serde(rename = "fperp")]
    Perp,
    #[serde(rename = "fphi")]
    Phi,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Drift => "f0",
            Field::Par => "fpar",
            Field::Perp => "fperp",
            Field::Phi => "fphi",
        }
    }

    pub fn parse(s: &str) -> Option<Field> {
        match s {
            "f0" => Some(Field::Drift),
            "fpar" => Some(Field::Par),
            "fperp" => Some(Field::Perp),
            "fphi" => Some(Field::Phi),
            _ => None,
        }
    }
}

/// Which parts of the extended state exist and which parameters are unknown.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateConfig {
    /// Linear aerodynamic drag on airspeed and turn rate.
    pub drag: bool,
    /// Adds `w_dot` and `zeta_dot` as unknown constant rates.
    pub dynamic_wind: bool,
    /// Use mass- and inertia-normalized body/motor parameters.
    pub absorb_mass: bool,
    /// Parameters appended to the extended state, in this order.
    pub unknown: Vec<Param>,
    /// Numeric values for known parameters; unlisted ones use
    /// [`Param::default_value`].
    pub values: BTreeMap<Param, f64>,
    /// Controls carried in the extended state as piecewise-constant
    /// variables, needed when a control is itself measured.
    pub control_states: Vec<Control>,
}

impl StateConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.unknown {
            if !seen.insert(*p) {
                return Err(ModelError::IncompatibleConfig(format!(
                    "parameter `{p}` listed twice as unknown"
                )));
            }
            if self.values.contains_key(p) {
                return Err(ModelError::IncompatibleConfig(format!(
                    "parameter `{p}` is both unknown and given a value"
                )));
            }
        }
        for (i, c) in self.control_states.iter().enumerate() {
            if self.control_states[..i].contains(c) {
                return Err(ModelError::IncompatibleConfig(format!("control `{}` listed twice", c.name())));
            }
        }
        for p in self.unknown.iter().chain(self.values.keys()) {
            if p.is_body() && p.is_absorbed() != self.absorb_mass {
                let why = if self.absorb_mass {
                    "is not used once mass and inertia are absorbed"
                } else {
                    "only exists when mass and inertia are absorbed"
                };
                return Err(ModelError::IncompatibleConfig(format!("parameter `{p}` {why}")));
            }
        }
        Ok(())
    }

    pub fn value(&self, p: Param) -> f64 {
        self.values.get(&p).copied().unwrap_or_else(|| p.default_value())
    }

    pub fn is_unknown(&self, p: Param) -> bool {
        self.unknown.contains(&p)
    }
}

/// Control-affine planar dynamics `x' = f0 + u_par f_par + u_perp f_perp + u_phi f_phi`
/// over the extended state.
#[derive(Clone, Debug)]
pub struct DynamicsModel {
    config: StateConfig,
    registry: Registry,
    vars: Vec<Symbol>,
    controls: [Symbol; 3],
    fields: [Vec<Expr>; 4],
}

/// Airspeed components in the body frame:
/// `a_par = v_par - w cos(phi - zeta)`, `a_perp = v_perp + w sin(phi - zeta)`.
pub fn airspeed_components(
    v_par: &Expr,
    v_perp: &Expr,
    phi: &Expr,
    w: &Expr,
    zeta: &Expr,
) -> (Expr, Expr) {
    let rel = phi - zeta;
    (v_par - w * rel.cos(), v_perp + w * rel.sin())
}

pub fn build_dynamics(cfg: &StateConfig) -> Result<DynamicsModel, ModelError> {
    cfg.validate()?;
    let mut reg = Registry::new();
    let mut vars: Vec<Symbol> = BASE_STATES.iter().map(|n| reg.symbol(n)).collect();
    if cfg.dynamic_wind {
        vars.push(reg.symbol(W_DOT));
        vars.push(reg.symbol(ZETA_DOT));
    }
    for p in &cfg.unknown {
        vars.push(reg.symbol(p.name()));
    }
    let controls = Control::ALL.map(|c| reg.symbol(c.name()));
    for c in &cfg.control_states {
        vars.push(controls[c.index()].clone());
    }

    let s = |name: &str| Expr::sym(&Symbol::new(name));
    let p = |param: Param| -> Expr {
        if cfg.is_unknown(param) {
            Expr::sym(&Symbol::new(param.name()))
        } else {
            Expr::real(cfg.value(param))
        }
    };
    let (v_par, v_perp, phi, phi_dot, w, zeta) =
        (s(V_PAR), s(V_PERP), s(PHI), s(PHI_DOT), s(W), s(ZETA));
    let (a_par, a_perp) = airspeed_components(&v_par, &v_perp, &phi, &w, &zeta);

    // Coefficients as they appear in the vector fields, in either the raw
    // (divided by m or I) or the absorbed parameterization.
    let (c_par, c_perp, c_phi, km1, km2, km3, km4) = if cfg.absorb_mass {
        (
            p(Param::CParPerMass),
            p(Param::CPerpPerMass),
            p(Param::CPhiPerInertia),
            p(Param::Km1PerMass),
            p(Param::Km2PerInertia),
            p(Param::Km3PerMass),
            p(Param::Km4PerInertia),
        )
    } else {
        let m = p(Param::Mass);
        let inertia = p(Param::Inertia);
        (
            p(Param::CPar) / &m,
            p(Param::CPerp) / &m,
            p(Param::CPhi) / &inertia,
            p(Param::Km1) / &m,
            p(Param::Km2) / &inertia,
            p(Param::Km3) / &m,
            p(Param::Km4) / &inertia,
        )
    };

    let n = vars.len();
    let mut f0 = vec![Expr::zero(); n];
    f0[0] = &v_perp * &phi_dot;
    f0[1] = -(&v_par * &phi_dot);
    f0[2] = phi_dot.clone();
    if cfg.drag {
        f0[0] = -(&c_par * &a_par) + &f0[0];
        f0[1] = -(&c_perp * &a_perp) + &f0[1];
        f0[3] = -(&c_phi * &phi_dot);
    }
    if cfg.dynamic_wind {
        f0[4] = s(W_DOT);
        f0[5] = s(ZETA_DOT);
    }
    let mut f_par = vec![Expr::zero(); n];
    f_par[0] = km1;
    f_par[3] = km2;
    let mut f_perp = vec![Expr::zero(); n];
    f_perp[1] = km3;
    let mut f_phi = vec![Expr::zero(); n];
    f_phi[3] = km4;

    let model = DynamicsModel {
        config: cfg.clone(),
        registry: reg,
        vars,
        controls,
        fields: [f0, f_par, f_perp, f_phi],
    };
    for f in &model.fields {
        model.check_symbols(f)?;
    }
    Ok(model)
}

impl DynamicsModel {
    pub fn config(&self) -> &StateConfig {
        &self.config
    }

    /// The extended state, in Jacobian column order.
    pub fn vars(&self) -> &[Symbol] {
        &self.vars
    }

    pub fn field(&self, f: Field) -> &[Expr] {
        let i = match f {
            Field::Drift => 0,
            Field::Par => 1,
            Field::Perp => 2,
            Field::Phi => 3,
        };
        &self.fields[i]
    }

    pub fn control(&self, c: Control) -> &Symbol {
        &self.controls[c.index()]
    }

    pub fn controls(&self) -> &[Symbol; 3] {
        &self.controls
    }

    /// Looks up a declared symbol (state, unknown parameter or control).
    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.registry.get(name)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|s| s.name() == name)
    }

    /// `f0 + u_par f_par + u_perp f_perp + u_phi f_phi`, with the controls
    /// left symbolic.
    pub fn expanded(&self) -> Vec<Expr> {
        (0..self.vars.len())
            .map(|i| {
                let mut terms = vec![self.fields[0][i].clone()];
                for c in Control::ALL {
                    terms.push(Expr::sym(self.control(c)) * &self.field(c.field())[i]);
                }
                Expr::sum(terms)
            })
            .collect()
    }

    /// Body-frame airspeed components as expressions over this model's states.
    pub fn airspeed(&self) -> (Expr, Expr) {
        let s = |n: &str| Expr::sym(self.symbol(n).expect("base state"));
        airspeed_components(&s(V_PAR), &s(V_PERP), &s(PHI), &s(W), &s(ZETA))
    }

    /// Every referenced symbol must be an extended-state variable or a control.
    pub fn check_symbols(&self, exprs: &[Expr]) -> Result<(), ModelError> {
        for e in exprs {
            for s in e.free_symbols() {
                if !self.registry.contains(&s) {
                    return Err(ModelError::UndeclaredSymbol(s.name().to_string()));
                }
            }
        }
        Ok(())
    }
}
