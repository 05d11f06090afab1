use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ObservabilityError;
use crate::expr::{differentiate, jacobian, Expr, Symbol};
use crate::models::{Control, DynamicsModel, Field, SensorSet};

/// `L_f h = sum_j (dh/dx_j) f_j` for every `h`.
pub fn lie_derivative(hs: &[Expr], f: &[Expr], vars: &[Symbol]) -> Vec<Expr> {
    hs.iter()
        .map(|h| {
            let terms: Vec<Expr> = vars
                .iter()
                .zip(f)
                .filter(|(_, fj)| !fj.is_zero())
                .map(|(x, fj)| differentiate(h, x) * fj)
                .collect();
            Expr::sum(terms)
        })
        .collect()
}

/// Which Lie derivatives go into the algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    /// 1: `{h, Lf0 h, Lfc h}`; 2 additionally `{Lf0 Lf0 h, Lf0 Lfc h}`.
    #[serde(default = "default_order")]
    pub order: u8,
    /// Active actuation channels `c`.
    #[serde(default)]
    pub controls: Vec<Control>,
    /// With order 2, also append `Lfc Lf0 h`.
    #[serde(default)]
    pub cross_terms: bool,
    /// Explicit derivation words such as `"Lf0 Lfpar h"`; replaces the
    /// order-based construction when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<String>>,
}

fn default_order() -> u8 {
    1
}

impl Default for AlgebraSpec {
    fn default() -> Self {
        AlgebraSpec { order: 1, controls: Vec::new(), cross_terms: false, terms: None }
    }
}

impl AlgebraSpec {
    pub fn new(order: u8, controls: &[Control]) -> Self {
        AlgebraSpec { order, controls: controls.to_vec(), ..Default::default() }
    }

    /// Derivation paths, outermost derivative first. The empty path is `h`.
    pub fn paths(&self) -> Result<Vec<Vec<Field>>, ObservabilityError> {
        if let Some(terms) = &self.terms {
            return terms.iter().map(|t| parse_term(t)).collect();
        }
        if !(1..=2).contains(&self.order) {
            return Err(ObservabilityError::InvalidAlgebra(format!(
                "order must be 1 or 2, got {}",
                self.order
            )));
        }
        let ctrl: Vec<Field> = self.controls.iter().map(|c| c.field()).collect();
        let mut paths = vec![vec![], vec![Field::Drift]];
        paths.extend(ctrl.iter().map(|c| vec![*c]));
        if self.order == 2 {
            paths.push(vec![Field::Drift, Field::Drift]);
            paths.extend(ctrl.iter().map(|c| vec![Field::Drift, *c]));
            if self.cross_terms {
                paths.extend(ctrl.iter().map(|c| vec![*c, Field::Drift]));
            }
        }
        Ok(paths)
    }

    /// Every second-order combination `{h, O1, Lg O1 : g in {f0} + controls}`,
    /// used to check that the restricted construction loses nothing.
    pub fn full_second_order_paths(&self) -> Vec<Vec<Field>> {
        let mut gens = vec![Field::Drift];
        gens.extend(self.controls.iter().map(|c| c.field()));
        let mut first = vec![vec![]];
        first.extend(gens.iter().map(|g| vec![*g]));
        let mut paths = first.clone();
        for g in &gens {
            for p in &first[1..] {
                let mut q = vec![*g];
                q.extend(p);
                paths.push(q);
            }
        }
        paths
    }
}

fn parse_term(t: &str) -> Result<Vec<Field>, ObservabilityError> {
    let words: Vec<&str> = t.split_whitespace().collect();
    match words.split_last() {
        Some((&"h", ops)) => ops
            .iter()
            .map(|w| {
                w.strip_prefix('L')
                    .and_then(Field::parse)
                    .ok_or_else(|| ObservabilityError::InvalidAlgebra(format!("bad operator `{w}` in `{t}`")))
            })
            .collect(),
        _ => Err(ObservabilityError::InvalidAlgebra(format!("term `{t}` must end with `h`"))),
    }
}

pub fn path_label(path: &[Field]) -> String {
    let mut s = String::new();
    for f in path {
        s.push('L');
        s.push_str(f.name());
        s.push(' ');
    }
    s.push('h');
    s
}

#[derive(Clone, Debug)]
pub struct AlgebraEntry {
    /// Derivation path and 1-based sensor channel, e.g. `Lf0 Lfpar h[2]`.
    pub label: String,
    pub path: Vec<Field>,
    pub channel: usize,
    pub expr: Expr,
}

/// An observability Lie algebra together with the variable ordering used
/// for its Jacobian.
#[derive(Debug)]
pub struct Algebra {
    pub entries: Vec<AlgebraEntry>,
    pub vars: Vec<Symbol>,
    jacobian: OnceLock<Vec<Vec<Expr>>>,
}

impl Clone for Algebra {
    fn clone(&self) -> Self {
        Algebra::new(self.entries.clone(), self.vars.clone())
    }
}

impl Algebra {
    pub fn new(entries: Vec<AlgebraEntry>, vars: Vec<Symbol>) -> Self {
        Algebra { entries, vars, jacobian: OnceLock::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn exprs(&self) -> Vec<Expr> {
        self.entries.iter().map(|e| e.expr.clone()).collect()
    }

    /// Symbolic Jacobian with respect to `vars`, computed once.
    pub fn jacobian(&self) -> &[Vec<Expr>] {
        self.jacobian.get_or_init(|| jacobian(&self.exprs(), &self.vars))
    }

    /// Copy with extra entries appended.
    pub fn extended(&self, extra: impl IntoIterator<Item = AlgebraEntry>) -> Algebra {
        let mut entries = self.entries.clone();
        entries.extend(extra);
        Algebra::new(entries, self.vars.clone())
    }
}

/// Builds the algebra for the given derivation paths. Paths sharing a suffix
/// reuse the inner Lie derivatives.
pub fn build_algebra_from_paths(
    model: &DynamicsModel,
    sensors: &SensorSet,
    paths: &[Vec<Field>],
) -> Algebra {
    let hs = sensors.exprs();
    let mut cache: HashMap<Vec<Field>, Vec<Expr>> = HashMap::new();
    cache.insert(vec![], hs);
    let mut entries = Vec::new();
    for path in paths {
        let exprs = derive(model, path, &mut cache);
        let label = path_label(path);
        for (i, e) in exprs.into_iter().enumerate() {
            entries.push(AlgebraEntry {
                label: format!("{label}[{}]", i + 1),
                path: path.clone(),
                channel: i,
                expr: e,
            });
        }
    }
    Algebra::new(entries, model.vars().to_vec())
}

fn derive(
    model: &DynamicsModel,
    path: &[Field],
    cache: &mut HashMap<Vec<Field>, Vec<Expr>>,
) -> Vec<Expr> {
    if let Some(v) = cache.get(path) {
        return v.clone();
    }
    let inner = derive(model, &path[1..], cache);
    let out = lie_derivative(&inner, model.field(path[0]), model.vars());
    cache.insert(path.to_vec(), out.clone());
    out
}

pub fn build_algebra(
    model: &DynamicsModel,
    sensors: &SensorSet,
    spec: &AlgebraSpec,
) -> Result<Algebra, ObservabilityError> {
    Ok(build_algebra_from_paths(model, sensors, &spec.paths()?))
}
