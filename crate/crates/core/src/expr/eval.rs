use std::collections::{BTreeMap, HashMap};
use std::marker::PhantomData;

use indexmap::IndexMap;
use thiserror::Error;

use super::{Expr, Node, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("symbol `{0}` is not bound at the evaluation point")]
    UnboundSymbol(String),
    #[error("division by zero while evaluating `{0}`")]
    DivisionByZero(String),
}

/// Anything that can supply a value for a symbol.
pub trait Bindings {
    fn value(&self, s: &Symbol) -> Option<f64>;
}

impl Bindings for HashMap<Symbol, f64> {
    fn value(&self, s: &Symbol) -> Option<f64> {
        self.get(s).copied()
    }
}

impl Bindings for BTreeMap<Symbol, f64> {
    fn value(&self, s: &Symbol) -> Option<f64> {
        self.get(s).copied()
    }
}

impl Bindings for IndexMap<Symbol, f64> {
    fn value(&self, s: &Symbol) -> Option<f64> {
        self.get(s).copied()
    }
}

impl<B: Bindings + ?Sized> Bindings for &B {
    fn value(&self, s: &Symbol) -> Option<f64> {
        (**self).value(s)
    }
}

pub fn evaluate<B: Bindings>(e: &Expr, point: &B) -> Result<f64, EvalError> {
    Evaluator::new(point).eval(e)
}

/// Evaluates many expressions at one point, sharing a cache of node values.
///
/// The lifetime ties every evaluated expression to the evaluator so cached
/// node identities cannot be recycled while the cache is alive.
pub struct Evaluator<'e, B> {
    point: B,
    cache: HashMap<usize, f64>,
    _exprs: PhantomData<&'e Expr>,
}

impl<'e, B: Bindings> Evaluator<'e, B> {
    pub fn new(point: B) -> Self {
        Evaluator { point, cache: HashMap::new(), _exprs: PhantomData }
    }

    pub fn eval(&mut self, e: &'e Expr) -> Result<f64, EvalError> {
        if let Some(v) = self.cache.get(&e.id()) {
            return Ok(*v);
        }
        let v = match e.node() {
            Node::Const(c) => c.value(),
            Node::Sym(s) => self
                .point
                .value(s)
                .ok_or_else(|| EvalError::UnboundSymbol(s.name().to_string()))?,
            Node::Neg(a) => -self.eval(a)?,
            Node::Sum(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += self.eval(t)?;
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= self.eval(f)?;
                }
                acc
            }
            Node::Quotient(n, d) => {
                let den = self.eval(d)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero(d.to_string()));
                }
                self.eval(n)? / den
            }
            Node::Pow(b, k) => {
                let base = self.eval(b)?;
                if *k < 0 && base == 0.0 {
                    return Err(EvalError::DivisionByZero(b.to_string()));
                }
                base.powi(*k)
            }
            Node::Sin(a) => self.eval(a)?.sin(),
            Node::Cos(a) => self.eval(a)?.cos(),
        };
        self.cache.insert(e.id(), v);
        Ok(v)
    }
}
