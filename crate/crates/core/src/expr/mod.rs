//! A small computer-algebra layer.
//!
//! Expressions are immutable trees with shared subtrees (`Arc`), so the
//! repeated differentiation needed for Lie derivatives builds DAGs rather
//! than exponentially large copies. Every traversal in this module memoizes
//! on node identity to exploit that sharing.
//!
//! Tangents never appear as nodes. Angular sensors such as `tan(gamma)` are
//! written directly as quotients of vector components.

mod calculus;
mod constant;
mod display;
mod eval;
mod parse;
mod simplify;
mod tape;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use calculus::{differentiate, jacobian, substitute};
pub use constant::Constant;
pub use eval::{evaluate, Bindings, EvalError, Evaluator};
pub use parse::{parse, ParseError};
pub use simplify::simplify;
pub use tape::Tape;

/// A named scalar variable. Two symbols are equal iff their names are equal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The set of symbols a model is allowed to reference.
///
/// Each model owns its own registry; nothing is interned globally.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    symbols: IndexMap<String, Symbol>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the symbol called `name`, declaring it on first use.
    pub fn symbol(&mut self, name: &str) -> Symbol {
        self.symbols
            .entry(name.to_string())
            .or_insert_with(|| Symbol::new(name))
            .clone()
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn contains(&self, symbol: &Symbol) -> bool {
        self.symbols.contains_key(symbol.name())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// One node of an expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(Constant),
    Sym(Symbol),
    Neg(Expr),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Expr, Expr),
    /// Integer power.
    Pow(Expr, i32),
    Sin(Expr),
    Cos(Expr),
}

/// A shared, immutable expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Expr {
    /// Wraps a node verbatim, without any folding.
    pub fn raw(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: Constant) -> Self {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Self {
        Expr::constant(Constant::ZERO)
    }

    pub fn one() -> Self {
        Expr::constant(Constant::ONE)
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(Constant::integer(n))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Expr::constant(Constant::rational(num, den))
    }

    pub fn real(x: f64) -> Self {
        Expr::constant(Constant::real(x))
    }

    pub fn sym(s: &Symbol) -> Self {
        Expr::raw(Node::Sym(s.clone()))
    }

    pub fn as_constant(&self) -> Option<Constant> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// Sum with flattening, constant folding and zero elimination.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut acc = Constant::ZERO;
        let mut out = Vec::new();
        for t in terms {
            match t.node() {
                Node::Const(c) => acc = acc.add(*c),
                Node::Sum(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(c) => acc = acc.add(*c),
                            _ => out.push(u.clone()),
                        }
                    }
                }
                _ => out.push(t),
            }
        }
        if !acc.is_zero() {
            out.push(Expr::constant(acc));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::raw(Node::Sum(out)),
        }
    }

    /// Product with flattening, constant folding, and removal of unit factors.
    /// A zero factor annihilates the product.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = Constant::ONE;
        let mut out = Vec::new();
        let push = |f: &Expr, coeff: &mut Constant, out: &mut Vec<Expr>| match f.node() {
            Node::Const(c) => *coeff = coeff.mul(*c),
            Node::Neg(inner) => {
                *coeff = coeff.neg();
                out.push(inner.clone());
            }
            _ => out.push(f.clone()),
        };
        for f in factors {
            match f.node() {
                Node::Product(inner) => {
                    for g in inner {
                        push(g, &mut coeff, &mut out);
                    }
                }
                _ => push(&f, &mut coeff, &mut out),
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        let body = match out.len() {
            0 => return Expr::constant(coeff),
            1 => out.pop().unwrap(),
            _ => {
                if coeff.is_one() || coeff.neg().is_one() {
                    Expr::raw(Node::Product(out))
                } else {
                    out.insert(0, Expr::constant(coeff));
                    return Expr::raw(Node::Product(out));
                }
            }
        };
        if coeff.is_one() {
            body
        } else if coeff.neg().is_one() {
            Expr::raw(Node::Neg(body))
        } else {
            Expr::raw(Node::Product(vec![Expr::constant(coeff), body]))
        }
    }

    pub fn neg_of(e: &Expr) -> Expr {
        match e.node() {
            Node::Const(c) => Expr::constant(c.neg()),
            Node::Neg(inner) => inner.clone(),
            Node::Product(fs) if fs.first().and_then(Expr::as_constant).is_some() => {
                let c = fs[0].as_constant().unwrap().neg();
                Expr::product(std::iter::once(Expr::constant(c)).chain(fs[1..].iter().cloned()))
            }
            _ => Expr::raw(Node::Neg(e.clone())),
        }
    }

    /// Quotient. A zero constant denominator is kept as a node so that the
    /// singularity surfaces at evaluation time.
    pub fn quotient(num: Expr, den: Expr) -> Expr {
        if num.is_zero() && !den.is_zero() {
            return Expr::zero();
        }
        if let Some(d) = den.as_constant() {
            if d.is_one() {
                return num;
            }
            if let Some(inv) = Constant::ONE.div(d) {
                return Expr::product([Expr::constant(inv), num]);
            }
        }
        Expr::raw(Node::Quotient(num, den))
    }

    pub fn powi(&self, exp: i32) -> Expr {
        match (self.node(), exp) {
            (_, 0) => Expr::one(),
            (_, 1) => self.clone(),
            (Node::Const(c), _) => match c.powi(exp) {
                Some(v) => Expr::constant(v),
                None => Expr::raw(Node::Pow(self.clone(), exp)),
            },
            (Node::Pow(base, k), _) => match k.checked_mul(exp) {
                Some(kk) => base.powi(kk),
                None => Expr::raw(Node::Pow(self.clone(), exp)),
            },
            _ => Expr::raw(Node::Pow(self.clone(), exp)),
        }
    }

    pub fn sin(&self) -> Expr {
        if self.is_zero() {
            Expr::zero()
        } else {
            Expr::raw(Node::Sin(self.clone()))
        }
    }

    pub fn cos(&self) -> Expr {
        if self.is_zero() {
            Expr::one()
        } else {
            Expr::raw(Node::Cos(self.clone()))
        }
    }

    /// Children of this node, in order.
    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Sym(_) => Vec::new(),
            Node::Neg(a) | Node::Pow(a, _) | Node::Sin(a) | Node::Cos(a) => vec![a],
            Node::Sum(xs) | Node::Product(xs) => xs.iter().collect(),
            Node::Quotient(a, b) => vec![a, b],
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut seen = HashSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            if let Node::Sym(s) = e.node() {
                out.insert(s.clone());
            }
            stack.extend(e.children());
        }
        out
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if seen.insert(e.id()) {
                stack.extend(e.children());
            }
        }
        seen.len()
    }
}

impl From<&Symbol> for Expr {
    fn from(s: &Symbol) -> Self {
        Expr::sym(s)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$trait::$method(self, rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                ops::$trait::$method(self.clone(), rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                ops::$trait::$method(self.clone(), rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a, b]));
binop!(Sub, sub, |a, b| Expr::sum([a, Expr::neg_of(&b)]));
binop!(Mul, mul, |a, b| Expr::product([a, b]));
binop!(Div, div, Expr::quotient);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_of(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_of(self)
    }
}
