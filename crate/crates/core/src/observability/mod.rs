//! Observability Lie algebras and numeric rank tests.
//!
//! An algebra is the sensor vector `h` plus iterated Lie derivatives along
//! the drift and the active control fields. Its Jacobian over the extended
//! state is evaluated at a point where every variable holds a distinct prime
//! and its rank is found by singular-value thresholding. A quantity is
//! locally observable at that point iff appending its gradient leaves the
//! rank unchanged.

mod algebra;
mod rank;

use thiserror::Error;

use crate::expr::{parse, Expr, ParseError};
use crate::models::{Control, DynamicsModel, ModelError};

pub use algebra::{
    build_algebra, build_algebra_from_paths, lie_derivative, path_label, Algebra, AlgebraEntry, AlgebraSpec,
};
pub use rank::{
    independent_rows, numeric_jacobian, numeric_rank, observability_map, prime_point, primes, rank_at,
    state_observable, NumericRank, Point, QueryVerdict, RankReport, TolPolicy,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservabilityError {
    /// A denominator vanished: the operating point itself is degenerate.
    #[error("unobservable at this point: sensor undefined ({0})")]
    SingularEvaluation(String),
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("`{0}` is not a variable of the extended state")]
    UnknownVariable(String),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("bad query `{query}`: {source}")]
    Query { query: String, source: ParseError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A quantity tested for observability, e.g. `zeta` or `phi - zeta`.
#[derive(Clone, Debug)]
pub struct Query {
    pub label: String,
    pub expr: Expr,
}

impl Query {
    pub fn parse(text: &str, model: &DynamicsModel) -> Result<Query, ObservabilityError> {
        let expr = parse(text, model.registry())
            .map_err(|source| ObservabilityError::Query { query: text.to_string(), source })?;
        Ok(Query { label: text.trim().to_string(), expr })
    }

    /// One query per extended-state variable.
    pub fn each_var(model: &DynamicsModel) -> Vec<Query> {
        model.vars().iter().map(|s| Query { label: s.name().to_string(), expr: Expr::sym(s) }).collect()
    }
}

/// Prime point over the extended state with overrides applied, plus every
/// control bound to 1 if listed in `active` and 0 otherwise.
pub fn operating_point(
    model: &DynamicsModel,
    active: &[Control],
    overrides: &[(String, f64)],
) -> Result<Point, ObservabilityError> {
    let mut ov = Vec::with_capacity(overrides.len());
    let mut control_ov = Vec::new();
    for (name, v) in overrides {
        match model.symbol(name) {
            Some(s) if model.vars().contains(s) => ov.push((s.clone(), *v)),
            Some(s) if model.controls().contains(s) => control_ov.push((s.clone(), *v)),
            _ => return Err(ObservabilityError::UnknownVariable(name.clone())),
        }
    }
    let mut point = prime_point(model.vars(), &ov)?;
    for c in Control::ALL {
        let s = model.control(c);
        if !point.contains_key(s) {
            point.insert(s.clone(), if active.contains(&c) { 1.0 } else { 0.0 });
        }
    }
    for (s, v) in control_ov {
        point.insert(s, v);
    }
    Ok(point)
}

/// Checks that adding every second-order cross term to a restricted algebra
/// leaves the rank unchanged at `point`. Returns `(restricted, full)` ranks.
pub fn verify_redundancy(
    model: &DynamicsModel,
    sensors: &crate::models::SensorSet,
    spec: &AlgebraSpec,
    point: &Point,
    tol: &TolPolicy,
) -> Result<(usize, usize), ObservabilityError> {
    let restricted = build_algebra(model, sensors, spec)?;
    let full = build_algebra_from_paths(model, sensors, &spec.full_second_order_paths());
    let a = rank_at(&restricted, point, &[], tol)?.rank;
    let b = rank_at(&full, point, &[], tol)?.rank;
    Ok((a, b))
}
